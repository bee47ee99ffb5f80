//! Command-line front door: strict config parsing, experiment execution,
//! analyses, and the CSV + SVG report bundle.
//!
//! Subcommands: `gen-corpus`, `train`, `prune-exp`, `pies`, `influence`,
//! `readability`, `report`. Every command is rerunnable and idempotent given
//! identical inputs; `--jobs` changes wall time only, never an output byte.
//! Exit codes: 0 success, 2 config error, 3 missing input, 4 numeric failure.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{self, LabelKind, SyntheticSpec};
use crate::harness::{self, Condition, ExperimentConfig, HarnessError, Split};
use crate::influence::{self, InfluenceError};
use crate::nn::NnError;
use crate::pie::{self, PIEReport, PieError};
use crate::plot::{self, Series};
use crate::prune::PruneError;
use crate::readability::{self, EasyWordList, ReadabilityError};

/// Exit-code-bearing command error.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or invalid analysis parameters (exit 2).
    Config(String),
    /// A required file or artifact is absent (exit 3).
    MissingInput(String),
    /// Non-finite numbers detected (exit 4).
    Numeric(String),
    /// Everything else (exit 1).
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::MissingInput(m) => write!(f, "missing input: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CorpusErrorWrap> for CliError {
    fn from(w: CorpusErrorWrap) -> Self {
        use corpus::CorpusError as E;
        match w.0 {
            E::MissingFile(p) => CliError::MissingInput(format!("corpus file {}", p.display())),
            e @ (E::BadManifest { .. }
            | E::BadRecord { .. }
            | E::EmptyLabels { .. }
            | E::LabelOutOfRange { .. }
            | E::DuplicateId { .. }
            | E::InvalidSpec(_)
            | E::InvalidCoverage(_)
            | E::EmptyLengths) => CliError::Config(e.to_string()),
            e @ E::Io { .. } => CliError::Failure(e.to_string()),
        }
    }
}

struct CorpusErrorWrap(corpus::CorpusError);

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidConfig(m) => CliError::Config(m),
            HarnessError::Corpus(c) => CorpusErrorWrap(c).into(),
            HarnessError::Prune(p) => p.into(),
            HarnessError::Nn(n) => n.into(),
            HarnessError::MissingInput(m) => CliError::MissingInput(m),
            HarnessError::Parse { path, msg } => {
                CliError::MissingInput(format!("unusable file {}: {msg}", path.display()))
            }
            e @ (HarnessError::Io { .. }
            | HarnessError::Metric(_)
            | HarnessError::EmptySplit(_)
            | HarnessError::Pool(_)) => CliError::Failure(e.to_string()),
        }
    }
}

impl From<PruneError> for CliError {
    fn from(e: PruneError) -> Self {
        match e {
            e @ (PruneError::ForbiddenCombo
            | PruneError::InvalidTarget(_)
            | PruneError::InvalidFraction(_)
            | PruneError::InvalidIterations
            | PruneError::UnknownPruner(_)) => CliError::Config(e.to_string()),
            e @ PruneError::Diverged { .. } => CliError::Numeric(e.to_string()),
            PruneError::Nn(n) => n.into(),
            e @ (PruneError::ShapeMismatch(_) | PruneError::Io { .. }) => {
                CliError::Failure(e.to_string())
            }
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            e @ (NnError::BadMagic
            | NnError::Truncated
            | NnError::ChecksumMismatch
            | NnError::BadMetadata(_)
            | NnError::UnsupportedVersion(_)
            | NnError::MissingArray(_)) => CliError::MissingInput(e.to_string()),
            e => CliError::Failure(e.to_string()),
        }
    }
}

impl From<InfluenceError> for CliError {
    fn from(e: InfluenceError) -> Self {
        match e {
            InfluenceError::MissingCheckpoint(p) => {
                CliError::MissingInput(format!("checkpoint {}", p.display()))
            }
            e @ InfluenceError::TooFewExamples { .. } => CliError::Config(e.to_string()),
            InfluenceError::Nn(n) => n.into(),
            InfluenceError::Harness(h) => (*h).into(),
            e => CliError::Failure(e.to_string()),
        }
    }
}

impl From<PieError> for CliError {
    fn from(e: PieError) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<ReadabilityError> for CliError {
    fn from(e: ReadabilityError) -> Self {
        match e {
            e @ ReadabilityError::EmptyWordList(_) => CliError::Config(e.to_string()),
            e => CliError::Failure(e.to_string()),
        }
    }
}

fn io_fail(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Failure(format!("io error on {}: {e}", path.display()))
}

fn ensure_finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<(), CliError> {
    for v in values {
        if !v.is_finite() {
            return Err(CliError::Numeric(format!("non-finite value in {what}")));
        }
    }
    Ok(())
}

/// pielab: train, prune, and analyze small text classifiers.
#[derive(Debug, Parser)]
#[command(name = "pielab", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus directory.
    GenCorpus(GenCorpusArgs),
    /// Train the unpruned baseline models of a config (no pruners).
    Train(RunArgs),
    /// Run the full pruning experiment of a config.
    PruneExp(RunArgs),
    /// Detect PIEs for every pruned condition of a finished run.
    Pies(PiesArgs),
    /// Influence profile, percentile bins, and PIE fraction per bin.
    Influence(InfluenceArgs),
    /// Readability battery and PIE-to-all ratio table.
    Readability(ReadabilityArgs),
    /// Assemble the CSV + figure report bundle.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    /// JSON file holding the synthetic corpus description.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output corpus directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 2000)]
    pub train: usize,
    #[arg(long, default_value_t = 400)]
    pub validation: usize,
    #[arg(long, default_value_t = 400)]
    pub test: usize,
    #[arg(long, default_value_t = 0.25)]
    pub hard_fraction: f64,
    /// "single" or "multi".
    #[arg(long, default_value = "single")]
    pub kind: String,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (strict JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the config's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parallel workers for independent model runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct PiesArgs {
    /// Run directory produced by prune-exp.
    pub run_dir: PathBuf,
    /// Split to analyze: "test" (default) or "train".
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Debug, Args)]
pub struct InfluenceArgs {
    pub run_dir: PathBuf,
    /// Profile each pruned condition's own checkpoints instead of the
    /// unpruned baseline's.
    #[arg(long)]
    pub profile_pruned: bool,
}

#[derive(Debug, Args)]
pub struct ReadabilityArgs {
    pub run_dir: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Easy-word list file (one word per line); defaults to the bundled list.
    #[arg(long)]
    pub easy_words: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub run_dir: PathBuf,
}

fn parse_split(name: &str) -> Result<Split, CliError> {
    match name {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        "validation" => Ok(Split::Validation),
        other => Err(CliError::Config(format!(
            "unknown split '{other}' (expected train, validation, or test)"
        ))),
    }
}

/// Parse and validate an experiment config file. Unknown keys are hard
/// errors. A relative corpus path resolves against `PIELAB_DATA` when that
/// variable is set.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingInput(format!("config file {}", path.display()))
        } else {
            CliError::Failure(format!("io error on {}: {e}", path.display()))
        }
    })?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let (Some(corpus_path), Ok(root)) = (&config.corpus.path, std::env::var("PIELAB_DATA")) {
        if corpus_path.is_relative() {
            config.corpus.path = Some(PathBuf::from(root).join(corpus_path));
        }
    }
    config.validate()?;
    Ok(config)
}

/// Execute a parsed CLI invocation.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenCorpus(args) => gen_corpus(args),
        Command::Train(args) => {
            let mut config = apply_overrides(&args)?;
            config.pruners.clear();
            let dir = harness::run_experiment(&config, args.jobs)?;
            println!("trained unpruned baselines into {}", dir.display());
            Ok(())
        }
        Command::PruneExp(args) => {
            let config = apply_overrides(&args)?;
            let dir = harness::run_experiment(&config, args.jobs)?;
            println!("experiment complete: {}", dir.display());
            Ok(())
        }
        Command::Pies(args) => {
            let split = parse_split(&args.split)?;
            let analysis = analyze_pies(&args.run_dir, split)?;
            for cond in &analysis.conditions {
                println!(
                    "{} @ {}: pie fraction {:.4}",
                    cond.pruner_id, cond.threshold, cond.report.pie_fraction
                );
            }
            Ok(())
        }
        Command::Influence(args) => {
            let rows = analyze_influence(&args.run_dir, args.profile_pruned)?;
            for (pruner_id, threshold, fractions) in &rows {
                println!(
                    "{pruner_id} @ {threshold}: bottom-bin {:.4}, top-bin {:.4}",
                    fractions.first().copied().unwrap_or(0.0),
                    fractions.last().copied().unwrap_or(0.0)
                );
            }
            Ok(())
        }
        Command::Readability(args) => {
            let split = parse_split(&args.split)?;
            let easy = match &args.easy_words {
                Some(path) => {
                    if !path.is_file() {
                        return Err(CliError::MissingInput(format!(
                            "easy-word list {}",
                            path.display()
                        )));
                    }
                    EasyWordList::load(path)?
                }
                None => EasyWordList::builtin(),
            };
            analyze_readability(&args.run_dir, split, &easy)?;
            println!(
                "readability analysis written under {}",
                args.run_dir.display()
            );
            Ok(())
        }
        Command::Report(args) => {
            let bundle = build_report(&args.run_dir)?;
            for path in &bundle.artifacts {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn apply_overrides(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = parse_config(&args.config)?;
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    Ok(config)
}

fn gen_corpus(args: GenCorpusArgs) -> Result<(), CliError> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    CliError::MissingInput(format!("corpus spec {}", path.display()))
                } else {
                    CliError::Failure(format!("io error on {}: {e}", path.display()))
                }
            })?;
            serde_json::from_str::<SyntheticSpec>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => SyntheticSpec {
            classes: args.classes,
            train: args.train,
            validation: args.validation,
            test: args.test,
            seed: 0,
            hard_fraction: args.hard_fraction,
            kind: match args.kind.as_str() {
                "single" => LabelKind::Single,
                "multi" => LabelKind::Multi,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown label kind '{other}' (expected single or multi)"
                    )))
                }
            },
        },
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let splits = corpus::generate_synthetic_corpus(&spec).map_err(CorpusErrorWrap)?;
    corpus::write_corpus(&splits, &args.out).map_err(CorpusErrorWrap)?;
    println!(
        "wrote {} corpus ({} train / {} validation / {} test, {} classes) to {}",
        splits.label_space.kind,
        splits.train.len(),
        splits.validation.len(),
        splits.test.len(),
        splits.label_space.num_classes(),
        args.out.display()
    );
    Ok(())
}

/// PIE detection results for one pruned condition.
pub struct ConditionPies {
    pub condition: Condition,
    pub pruner_id: String,
    pub threshold: f64,
    pub report: PIEReport,
}

pub struct PiesAnalysis {
    pub split: Split,
    pub conditions: Vec<ConditionPies>,
}

fn pruned_conditions(config: &ExperimentConfig) -> Result<Vec<(Condition, String, f64)>, CliError> {
    Ok(config
        .conditions()?
        .into_iter()
        .filter_map(|(cond, spec)| spec.map(|s| (cond, s.canonical_id().to_string(), s.target)))
        .collect())
}

fn train_class_counts(corpus: &corpus::CorpusSplits) -> Vec<usize> {
    let mut counts = vec![0usize; corpus.label_space.num_classes()];
    for ex in &corpus.train {
        for &l in &ex.labels {
            counts[l] += 1;
        }
    }
    counts
}

/// Detect PIEs for every pruned condition on `split` and persist per-example
/// verdicts, class distributions, and the aggregate occurrence and
/// subset-accuracy tables under `<run>/analysis/`.
pub fn analyze_pies(run_dir: &Path, split: Split) -> Result<PiesAnalysis, CliError> {
    let config = harness::load_run_config(run_dir)?;
    let data = harness::prepare_data(&config, Some(run_dir))?;
    let kind = data.corpus.label_space.kind;
    let class_counts = train_class_counts(&data.corpus);
    let examples = match split {
        Split::Train => &data.corpus.train,
        Split::Validation => &data.corpus.validation,
        Split::Test => &data.corpus.test,
    };
    let unpruned = harness::load_prediction_matrix(
        run_dir,
        &Condition::Unpruned,
        split,
        config.n_initializations,
    )?;

    let analysis_dir = run_dir.join("analysis");
    let mut out = Vec::new();
    for (cond, pruner_id, threshold) in pruned_conditions(&config)? {
        let pruned =
            harness::load_prediction_matrix(run_dir, &cond, split, config.n_initializations)?;
        let report = pie::build_report(&pruned, &unpruned, examples, &class_counts, kind)?;
        ensure_finite([report.pie_fraction], "pie fractions")?;

        let cond_dir = analysis_dir.join(cond.dir_name());
        std::fs::create_dir_all(&cond_dir).map_err(io_fail(&cond_dir))?;
        pie::write_pies_csv(
            &cond_dir.join(format!("pies_{split}.csv")),
            &report.verdicts,
        )?;
        write_class_distribution_csv(
            &cond_dir.join(format!("class_distribution_{split}.csv")),
            &data.corpus,
            &report,
        )?;
        out.push(ConditionPies {
            condition: cond,
            pruner_id,
            threshold,
            report,
        });
    }

    write_pie_fractions_csv(&analysis_dir, split, &out)?;
    write_subset_accuracy_csv(&analysis_dir, split, &out)?;
    Ok(PiesAnalysis {
        split,
        conditions: out,
    })
}

fn write_class_distribution_csv(
    path: &Path,
    corpus: &corpus::CorpusSplits,
    report: &PIEReport,
) -> Result<(), CliError> {
    let mut body = Vec::new();
    writeln!(body, "class_index,class_name,all_fraction,pie_fraction").map_err(io_fail(path))?;
    let dist = &report.class_distribution;
    for (i, &class) in dist.class_order.iter().enumerate() {
        writeln!(
            body,
            "{},{},{},{}",
            class,
            corpus.label_space.class_names[class],
            dist.all_fraction[i],
            dist.pie_fraction[i]
        )
        .map_err(io_fail(path))?;
    }
    std::fs::write(path, body).map_err(io_fail(path))
}

fn write_pie_fractions_csv(
    analysis_dir: &Path,
    split: Split,
    conditions: &[ConditionPies],
) -> Result<(), CliError> {
    let path = analysis_dir.join(format!("pie_fractions_{split}.csv"));
    let mut body = Vec::new();
    writeln!(body, "pruner_id,threshold,split,pie_fraction").map_err(io_fail(&path))?;
    for c in conditions {
        writeln!(
            body,
            "{},{},{},{}",
            c.pruner_id, c.threshold, split, c.report.pie_fraction
        )
        .map_err(io_fail(&path))?;
    }
    std::fs::write(&path, body).map_err(io_fail(&path))
}

fn subset_cell(m: Option<pie::SubsetMetrics>) -> (String, String) {
    match m {
        Some(v) => (
            format!("{}", v.per_init_mean),
            format!("{}", v.majority_vote),
        ),
        None => ("undefined".into(), "undefined".into()),
    }
}

fn write_subset_accuracy_csv(
    analysis_dir: &Path,
    split: Split,
    conditions: &[ConditionPies],
) -> Result<(), CliError> {
    let path = analysis_dir.join(format!("subset_accuracy_{split}.csv"));
    let mut body = Vec::new();
    writeln!(
        body,
        "pruner_id,threshold,subset,model,per_init_mean,majority_vote"
    )
    .map_err(io_fail(&path))?;
    for c in conditions {
        let s = &c.report.subset_accuracy;
        for (subset, model, metrics) in [
            ("all", "pruned", s.pruned_on_all),
            ("all", "unpruned", s.unpruned_on_all),
            ("pies", "pruned", s.pruned_on_pies),
            ("pies", "unpruned", s.unpruned_on_pies),
        ] {
            let (mean, vote) = subset_cell(metrics);
            writeln!(
                body,
                "{},{},{subset},{model},{mean},{vote}",
                c.pruner_id, c.threshold
            )
            .map_err(io_fail(&path))?;
        }
    }
    std::fs::write(&path, body).map_err(io_fail(&path))
}

/// Compute influence profiles and per-bin PIE fractions (train split) for
/// every pruned condition. Returns (pruner_id, threshold, fractions) rows.
pub fn analyze_influence(
    run_dir: &Path,
    profile_pruned: bool,
) -> Result<Vec<(String, f64, Vec<f64>)>, CliError> {
    let config = harness::load_run_config(run_dir)?;
    let data = harness::prepare_data(&config, Some(run_dir))?;
    let kind = data.corpus.label_space.kind;
    let n = config.n_initializations;

    let unpruned_meta = harness::load_condition_meta(run_dir, &Condition::Unpruned)?;
    let unpruned_profile = if profile_pruned {
        None
    } else {
        Some(influence::profile(
            run_dir,
            &Condition::Unpruned,
            unpruned_meta.epochs_total,
            n,
            &data.train,
        )?)
    };
    let unpruned_matrix =
        harness::load_prediction_matrix(run_dir, &Condition::Unpruned, Split::Train, n)?;

    let analysis_dir = run_dir.join("analysis");
    let mut rows = Vec::new();
    for (cond, pruner_id, threshold) in pruned_conditions(&config)? {
        let profile = match &unpruned_profile {
            Some(p) => p.clone(),
            None => {
                let meta = harness::load_condition_meta(run_dir, &cond)?;
                influence::profile(run_dir, &cond, meta.epochs_total, n, &data.train)?
            }
        };
        ensure_finite(profile.scores.iter().copied(), "influence scores")?;
        let bins = influence::bins(&profile, 20)?;
        let pruned_matrix = harness::load_prediction_matrix(run_dir, &cond, Split::Train, n)?;
        let verdicts = pie::detect_pies(&pruned_matrix, &unpruned_matrix, kind)?;
        let fractions = influence::pie_fraction_per_bin(&bins, &verdicts)?;

        let cond_dir = analysis_dir.join(cond.dir_name());
        std::fs::create_dir_all(&cond_dir).map_err(io_fail(&cond_dir))?;
        influence::write_influence_csv(&cond_dir.join("influence.csv"), &profile, &bins)?;
        influence::write_influence_bins_csv(
            &cond_dir.join("influence_bins.csv"),
            &bins,
            &fractions,
        )?;
        rows.push((pruner_id, threshold, fractions));
    }
    Ok(rows)
}

/// Score readability for `split` and write per-condition score tables plus
/// the PIE-to-all ratio aggregate.
pub fn analyze_readability(
    run_dir: &Path,
    split: Split,
    easy: &EasyWordList,
) -> Result<Vec<readability::RatioRow>, CliError> {
    let config = harness::load_run_config(run_dir)?;
    let data = harness::prepare_data(&config, Some(run_dir))?;
    let kind = data.corpus.label_space.kind;
    let examples = match split {
        Split::Train => &data.corpus.train,
        Split::Validation => &data.corpus.validation,
        Split::Test => &data.corpus.test,
    };
    let scores = readability::score_examples(examples, easy);
    let unpruned = harness::load_prediction_matrix(
        run_dir,
        &Condition::Unpruned,
        split,
        config.n_initializations,
    )?;

    let analysis_dir = run_dir.join("analysis");
    let mut condition_verdicts = Vec::new();
    for (cond, pruner_id, threshold) in pruned_conditions(&config)? {
        let pruned =
            harness::load_prediction_matrix(run_dir, &cond, split, config.n_initializations)?;
        let verdicts = pie::detect_pies(&pruned, &unpruned, kind)?;
        let cond_dir = analysis_dir.join(cond.dir_name());
        std::fs::create_dir_all(&cond_dir).map_err(io_fail(&cond_dir))?;
        readability::write_readability_csv(
            &cond_dir.join(format!("readability_{split}.csv")),
            &scores,
            &verdicts,
        )?;
        condition_verdicts.push((pruner_id, threshold, verdicts));
    }

    let rows = readability::ratio_report(&scores, &condition_verdicts);
    ensure_finite(rows.iter().filter_map(|r| r.ratio), "readability ratios")?;
    std::fs::create_dir_all(&analysis_dir).map_err(io_fail(&analysis_dir))?;
    readability::write_ratios_csv(
        &analysis_dir.join(format!("readability_ratios_{split}.csv")),
        &rows,
    )?;
    Ok(rows)
}

/// Paths written by [`build_report`].
pub struct ReportBundle {
    pub artifacts: Vec<PathBuf>,
}

struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_csv(path: &Path) -> Result<CsvTable, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| CliError::MissingInput(format!("{}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap_or("")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok(CsvTable { header, rows })
}

impl CsvTable {
    fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Failure(format!("csv column {name} not found")))
    }
}

/// Assemble the report bundle: `summary.csv`, `pies.csv`,
/// `influence_bins.csv`, `readability_ratios.csv`, and five figures (each
/// figure's plotted numbers also exist as a CSV). Fails with the full list of
/// missing inputs when analyses have not run.
pub fn build_report(run_dir: &Path) -> Result<ReportBundle, CliError> {
    let config = harness::load_run_config(run_dir)?;
    let conditions = pruned_conditions(&config)?;
    let analysis = run_dir.join("analysis");

    // Collect every required input before writing anything.
    let mut required = vec![
        run_dir.join("summary.csv"),
        analysis.join("pie_fractions_test.csv"),
        analysis.join("subset_accuracy_test.csv"),
        analysis.join("readability_ratios_test.csv"),
    ];
    for (cond, _, _) in &conditions {
        let dir = analysis.join(cond.dir_name());
        required.push(dir.join("pies_test.csv"));
        required.push(dir.join("class_distribution_test.csv"));
        required.push(dir.join("influence_bins.csv"));
    }
    let missing: Vec<String> = required
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::MissingInput(format!(
            "report inputs not ready: {}",
            missing.join(", ")
        )));
    }

    let report_dir = run_dir.join("report");
    std::fs::create_dir_all(&report_dir).map_err(io_fail(&report_dir))?;
    let mut artifacts = Vec::new();

    // summary.csv: verbatim copy of the run summary.
    let summary_dst = report_dir.join("summary.csv");
    std::fs::copy(run_dir.join("summary.csv"), &summary_dst).map_err(io_fail(&summary_dst))?;
    artifacts.push(summary_dst);

    // pies.csv: per-example verdicts stacked over conditions.
    let pies_dst = report_dir.join("pies.csv");
    {
        let mut body = Vec::new();
        writeln!(
            body,
            "pruner_id,threshold,example_id,is_pie,pruned_majority,unpruned_majority"
        )
        .map_err(io_fail(&pies_dst))?;
        for (cond, pruner_id, threshold) in &conditions {
            let table = read_csv(&analysis.join(cond.dir_name()).join("pies_test.csv"))?;
            for row in &table.rows {
                writeln!(body, "{pruner_id},{threshold},{}", row.join(","))
                    .map_err(io_fail(&pies_dst))?;
            }
        }
        std::fs::write(&pies_dst, body).map_err(io_fail(&pies_dst))?;
        artifacts.push(pies_dst);
    }

    // influence_bins.csv: stacked per-condition bin tables.
    let bins_dst = report_dir.join("influence_bins.csv");
    let mut bin_series = Vec::new();
    {
        let mut body = Vec::new();
        writeln!(body, "pruner_id,threshold,bin_index,size,pie_fraction")
            .map_err(io_fail(&bins_dst))?;
        for (cond, pruner_id, threshold) in &conditions {
            let table = read_csv(&analysis.join(cond.dir_name()).join("influence_bins.csv"))?;
            let bi = table.column("bin_index")?;
            let fi = table.column("pie_fraction")?;
            let mut points = Vec::new();
            for row in &table.rows {
                writeln!(body, "{pruner_id},{threshold},{}", row.join(","))
                    .map_err(io_fail(&bins_dst))?;
                let bin: f64 = row[bi].parse().unwrap_or(f64::NAN);
                let frac: f64 = row[fi].parse().unwrap_or(f64::NAN);
                ensure_finite([bin, frac], "influence bins")?;
                points.push((bin + 1.0, frac));
            }
            bin_series.push(Series::new(format!("{pruner_id} @ {threshold}"), points));
        }
        std::fs::write(&bins_dst, body).map_err(io_fail(&bins_dst))?;
        artifacts.push(bins_dst);
    }

    // readability_ratios.csv: verbatim copy of the aggregate.
    let ratios_dst = report_dir.join("readability_ratios.csv");
    std::fs::copy(analysis.join("readability_ratios_test.csv"), &ratios_dst)
        .map_err(io_fail(&ratios_dst))?;
    artifacts.push(ratios_dst.clone());

    // Figure 1: PIE fraction vs threshold, one line per pruner.
    {
        let table = read_csv(&analysis.join("pie_fractions_test.csv"))?;
        let pi = table.column("pruner_id")?;
        let ti = table.column("threshold")?;
        let fi = table.column("pie_fraction")?;
        let fig_csv = report_dir.join("fig_pie_fraction.csv");
        std::fs::copy(analysis.join("pie_fractions_test.csv"), &fig_csv)
            .map_err(io_fail(&fig_csv))?;
        artifacts.push(fig_csv);

        let mut by_pruner: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for row in &table.rows {
            let t: f64 = row[ti].parse().unwrap_or(f64::NAN);
            let f: f64 = row[fi].parse().unwrap_or(f64::NAN);
            ensure_finite([t, f], "pie fractions")?;
            by_pruner.entry(row[pi].clone()).or_default().push((t, f));
        }
        let series: Vec<Series> = by_pruner
            .into_iter()
            .map(|(label, mut pts)| {
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                Series::new(label, pts)
            })
            .collect();
        let fig = report_dir.join("fig_pie_fraction.svg");
        plot::line_chart(
            &fig,
            "PIE fraction per pruning threshold (test split)",
            "pruning threshold",
            "PIE fraction",
            &series,
            None,
        )
        .map_err(io_fail(&fig))?;
        artifacts.push(fig);
    }

    // Figure 2: per-init mean accuracy on PIEs vs all data points.
    {
        let src = analysis.join("subset_accuracy_test.csv");
        let table = read_csv(&src)?;
        let fig_csv = report_dir.join("fig_subset_accuracy.csv");
        std::fs::copy(&src, &fig_csv).map_err(io_fail(&fig_csv))?;
        artifacts.push(fig_csv);

        let pi = table.column("pruner_id")?;
        let ti = table.column("threshold")?;
        let si = table.column("subset")?;
        let mi = table.column("model")?;
        let vi = table.column("per_init_mean")?;
        let mut series_map: BTreeMap<(String, bool), Vec<(f64, f64)>> = BTreeMap::new();
        for row in &table.rows {
            if row[vi] == "undefined" {
                continue;
            }
            let t: f64 = row[ti].parse().unwrap_or(f64::NAN);
            let v: f64 = row[vi].parse().unwrap_or(f64::NAN);
            ensure_finite([t, v], "subset accuracy")?;
            let label = match (row[si].as_str(), row[mi].as_str()) {
                ("pies", "pruned") => (format!("{} pruned on PIEs", row[pi]), false),
                ("pies", "unpruned") => (format!("{} unpruned on PIEs", row[pi]), true),
                ("all", "pruned") => (format!("{} pruned on all", row[pi]), false),
                _ => ("unpruned on all".to_string(), true),
            };
            series_map.entry(label).or_default().push((t, v));
        }
        let series: Vec<Series> = series_map
            .into_iter()
            .map(|((label, dashed), mut pts)| {
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                pts.dedup();
                if dashed {
                    Series::dashed(label, pts)
                } else {
                    Series::new(label, pts)
                }
            })
            .collect();
        let fig = report_dir.join("fig_subset_accuracy.svg");
        plot::line_chart(
            &fig,
            "Per-init mean accuracy: PIEs vs all (test split)",
            "pruning threshold",
            "accuracy",
            &series,
            None,
        )
        .map_err(io_fail(&fig))?;
        artifacts.push(fig);
    }

    // Figure 3: class distribution of PIEs vs all, first pruner at the
    // lowest and highest thresholds.
    {
        let fig_csv = report_dir.join("fig_class_distribution.csv");
        let mut body = Vec::new();
        writeln!(
            body,
            "pruner_id,threshold,class_index,class_name,all_fraction,pie_fraction"
        )
        .map_err(io_fail(&fig_csv))?;
        for (cond, pruner_id, threshold) in &conditions {
            let table = read_csv(
                &analysis
                    .join(cond.dir_name())
                    .join("class_distribution_test.csv"),
            )?;
            for row in &table.rows {
                writeln!(body, "{pruner_id},{threshold},{}", row.join(","))
                    .map_err(io_fail(&fig_csv))?;
            }
        }
        std::fs::write(&fig_csv, body).map_err(io_fail(&fig_csv))?;
        artifacts.push(fig_csv);

        let first_pruner = conditions
            .first()
            .map(|(_, id, _)| id.clone())
            .unwrap_or_default();
        let mut thresholds: Vec<f64> = conditions
            .iter()
            .filter(|(_, id, _)| *id == first_pruner)
            .map(|(_, _, t)| *t)
            .collect();
        thresholds.sort_by(f64::total_cmp);
        let mut groups = Vec::new();
        let mut categories = Vec::new();
        for (which, t) in [thresholds.first(), thresholds.last()]
            .into_iter()
            .flatten()
            .enumerate()
        {
            let cond = Condition::Pruned {
                pruner_id: first_pruner.clone(),
                threshold: *t,
            };
            let table = read_csv(
                &analysis
                    .join(cond.dir_name())
                    .join("class_distribution_test.csv"),
            )?;
            let ci = table.column("class_index")?;
            let ai = table.column("all_fraction")?;
            let pi = table.column("pie_fraction")?;
            if which == 0 {
                categories = table.rows.iter().map(|r| format!("c{}", r[ci])).collect();
                let all: Vec<f64> = table
                    .rows
                    .iter()
                    .map(|r| r[ai].parse().unwrap_or(0.0))
                    .collect();
                groups.push(("all data".to_string(), all));
            }
            let pies: Vec<f64> = table
                .rows
                .iter()
                .map(|r| r[pi].parse().unwrap_or(0.0))
                .collect();
            groups.push((format!("PIEs {first_pruner} @ {t}"), pies));
        }
        let fig = report_dir.join("fig_class_distribution.svg");
        plot::bar_chart(
            &fig,
            "Class distribution: all data vs PIEs (test split)",
            "class (sorted by train frequency)",
            "fraction",
            &categories,
            &groups,
        )
        .map_err(io_fail(&fig))?;
        artifacts.push(fig);
    }

    // Figure 4: PIE fraction per influence bin.
    {
        let fig = report_dir.join("fig_influence_bins.svg");
        plot::line_chart(
            &fig,
            "PIE fraction per influence bin (train split)",
            "influence bin (ascending score)",
            "PIE fraction",
            &bin_series,
            None,
        )
        .map_err(io_fail(&fig))?;
        artifacts.push(fig);
    }

    // Figure 5: readability ratios (across-pruner mean per metric).
    {
        let table = read_csv(&ratios_dst)?;
        let pi = table.column("pruner_id")?;
        let ti = table.column("threshold")?;
        let mi = table.column("metric")?;
        let ri = table.column("ratio")?;
        let mut by_metric: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for row in &table.rows {
            if row[pi] != "mean" || row[ri] == "undefined" {
                continue;
            }
            let t: f64 = row[ti].parse().unwrap_or(f64::NAN);
            let r: f64 = row[ri].parse().unwrap_or(f64::NAN);
            ensure_finite([t, r], "readability ratios")?;
            by_metric.entry(row[mi].clone()).or_default().push((t, r));
        }
        let series: Vec<Series> = by_metric
            .into_iter()
            .map(|(label, mut pts)| {
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                Series::new(label, pts)
            })
            .collect();
        let fig = report_dir.join("fig_readability_ratios.svg");
        plot::line_chart(
            &fig,
            "PIE-to-all readability ratios (mean over pruners)",
            "pruning threshold",
            "ratio (1.0 = parity)",
            &series,
            Some(1.0),
        )
        .map_err(io_fail(&fig))?;
        artifacts.push(fig);
    }

    Ok(ReportBundle { artifacts })
}

/// Run the whole pipeline for a config: experiment, the three analyses at
/// their default splits, and the report bundle. Returns the run directory.
pub fn run_full_pipeline(config: &ExperimentConfig, jobs: usize) -> Result<PathBuf, CliError> {
    let run_dir = harness::run_experiment(config, jobs)?;
    analyze_pies(&run_dir, Split::Test)?;
    analyze_influence(&run_dir, false)?;
    analyze_readability(&run_dir, Split::Test, &EasyWordList::builtin())?;
    build_report(&run_dir)?;
    Ok(run_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_config_key_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            r#"{"corpus": {"synthetic": {"classes": 2, "train": 10, "validation": 10, "test": 10, "seed": 0, "kind": "single"}}, "model": {"family": "mean-embedding-mlp"}, "thresholdz": [0.2]}"#,
        )
        .unwrap();
        let err = parse_config(&path).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("thresholdz"), "{err}");
    }

    #[test]
    fn random_rewind_combo_is_rejected_with_rule() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            r#"{"corpus": {"synthetic": {"classes": 2, "train": 10, "validation": 10, "test": 10, "seed": 0, "kind": "single"}}, "model": {"family": "mean-embedding-mlp"}, "pruners": [{"scoring": "random", "schedule": "iterative", "tuning": "rewind"}]}"#,
        )
        .unwrap();
        let err = parse_config(&path).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(
            err.to_string()
                .contains("random scoring cannot be combined with weight rewinding"),
            "{err}"
        );
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            r#"{"corpus": {"synthetic": {"classes": 2, "train": 10, "validation": 10, "test": 10, "seed": 0, "kind": "single"}}, "model": {"family": "bilstm"}}"#,
        )
        .unwrap();
        let config = parse_config(&path).unwrap();
        assert_eq!(config.n_initializations, 5);
        assert_eq!(config.epochs, 4);
        assert_eq!(config.thresholds, vec![0.2, 0.5, 0.7, 0.9, 0.99]);
        assert_eq!(config.pruners.len(), 8);
        assert_eq!(config.max_tokens_coverage, 0.85);
    }

    #[test]
    fn missing_config_is_exit_three() {
        let err = parse_config(Path::new("/nonexistent/config.json")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::MissingInput("x".into()).exit_code(), 3);
        assert_eq!(CliError::Numeric("x".into()).exit_code(), 4);
        assert_eq!(CliError::Failure("x".into()).exit_code(), 1);
        let diverged: CliError = PruneError::Diverged { epoch: 3 }.into();
        assert_eq!(diverged.exit_code(), 4);
    }

    #[test]
    fn split_parsing() {
        assert_eq!(parse_split("train").unwrap(), Split::Train);
        assert_eq!(parse_split("test").unwrap(), Split::Test);
        assert!(parse_split("dev").is_err());
    }
}
