//! Multi-initialization experiment runner and effectiveness metrics.
//!
//! One experiment trains N unpruned initializations plus, per
//! (pruner, threshold) pair, N pruned initializations with the same seeds, so
//! that initialization k of the pruned and unpruned conditions starts from
//! identical parameter bytes. Prediction matrices and epoch checkpoints are
//! persisted into an append-only run directory; reruns of the same config
//! reproduce identical bytes.
//!
//! Run directory layout:
//!
//! ```text
//! <out>/
//!   config.json                      resolved config, defaults echoed
//!   corpus/                          materialized synthetic corpus
//!   <condition>/meta.json            epochs, prune events
//!   <condition>/init_<k>/checkpoint_epoch_<e>.bin
//!   <condition>/init_<k>/predictions_<split>.csv
//!   summary.csv
//! ```

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    self, CorpusError, CorpusSplits, EncodedExample, LabelKind, SyntheticSpec, Vocabulary,
};
use crate::nn::{self, Hyper, ModelFamily, ModelSpec, NnError, OptState, Tensor};
use crate::prune::{
    self, PruneError, PruneEvent, PrunerSpec, RunContext, Schedule, Scoring, Tuning,
};
use crate::rngutil::derive_seed;
use crate::train;

/// Sigmoid outputs at or above this value count as positive class
/// predictions in multi-label settings.
pub const POSITIVE_THRESHOLD: f32 = 0.5;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("malformed file {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("metric input mismatch: {0}")]
    Metric(String),
    #[error("empty example set: {0}")]
    EmptySplit(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Data split identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A model condition: the shared unpruned baseline, or one
/// (pruner, threshold) group.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Unpruned,
    Pruned { pruner_id: String, threshold: f64 },
}

impl Condition {
    /// Directory name inside the run directory.
    pub fn dir_name(&self) -> String {
        match self {
            Condition::Unpruned => "unpruned".to_string(),
            Condition::Pruned {
                pruner_id,
                threshold,
            } => format!("{pruner_id}_{threshold}"),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dir_name())
    }
}

/// Per-initialization class probabilities for one condition on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub condition: Condition,
    pub split: Split,
    pub example_ids: Vec<u64>,
    pub classes: usize,
    /// One row-major `[examples x classes]` block per initialization.
    pub per_init: Vec<Vec<f32>>,
}

impl PredictionMatrix {
    pub fn n_inits(&self) -> usize {
        self.per_init.len()
    }

    pub fn n_examples(&self) -> usize {
        self.example_ids.len()
    }

    pub fn prob(&self, init: usize, example: usize, class: usize) -> f32 {
        self.per_init[init][example * self.classes + class]
    }

    /// Argmax class of one example under one initialization; ties break
    /// toward the lowest class index.
    pub fn hard_class(&self, init: usize, example: usize) -> usize {
        let row = &self.per_init[init][example * self.classes..(example + 1) * self.classes];
        let mut best = 0usize;
        for (c, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = c;
            }
        }
        best
    }
}

/// Fraction of argmax predictions equal to the gold label.
pub fn accuracy(hard_preds: &[usize], gold: &[usize]) -> Result<f64, HarnessError> {
    if hard_preds.len() != gold.len() {
        return Err(HarnessError::Metric(format!(
            "{} predictions vs {} gold labels",
            hard_preds.len(),
            gold.len()
        )));
    }
    if hard_preds.is_empty() {
        return Err(HarnessError::EmptySplit(
            "accuracy over zero examples".into(),
        ));
    }
    let correct = hard_preds.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / hard_preds.len() as f64)
}

/// Macro-F1 of thresholded probabilities against gold label sets.
///
/// Per class, F1 = 2TP / (2TP + FP + FN); a class with no predicted and no
/// gold positives has an undefined value and contributes 0 by convention.
pub fn macro_f1(
    probs: &Tensor,
    gold_sets: &[Vec<usize>],
    positive_threshold: f32,
) -> Result<f64, HarnessError> {
    let classes = *probs.shape().last().unwrap_or(&0);
    if probs.shape()[0] != gold_sets.len() {
        return Err(HarnessError::Metric(format!(
            "{} probability rows vs {} gold sets",
            probs.shape()[0],
            gold_sets.len()
        )));
    }
    let pred_sets: Vec<Vec<usize>> = (0..gold_sets.len())
        .map(|e| {
            (0..classes)
                .filter(|&c| probs.at2(e, c) >= positive_threshold)
                .collect()
        })
        .collect();
    Ok(macro_f1_sets(&pred_sets, gold_sets, classes))
}

/// Macro-F1 from explicit predicted label sets.
pub fn macro_f1_sets(pred_sets: &[Vec<usize>], gold_sets: &[Vec<usize>], classes: usize) -> f64 {
    if classes == 0 {
        return 0.0;
    }
    let mut f1_total = 0.0f64;
    for c in 0..classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (pred, gold) in pred_sets.iter().zip(gold_sets) {
            let p = pred.contains(&c);
            let g = gold.contains(&c);
            match (p, g) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        if denom > 0 {
            f1_total += 2.0 * tp as f64 / denom as f64;
        }
    }
    f1_total / classes as f64
}

/// Mean and sample (n-1) standard deviation; std is 0 for a single value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn default_pruners() -> Vec<PrunerChoice> {
    [
        "IIBP-WR", "IIBP-FT", "IBP-AI", "IMP-WR", "IMP-FT", "MP-AI", "IRP-FT", "RP-AI",
    ]
    .iter()
    .map(|id| PrunerChoice::Id(id.to_string()))
    .collect()
}

fn default_thresholds() -> Vec<f64> {
    vec![0.2, 0.5, 0.7, 0.9, 0.99]
}

fn default_n_initializations() -> usize {
    5
}

fn default_epochs() -> u32 {
    4
}

fn default_batch_size() -> usize {
    32
}

fn default_learning_rate() -> f64 {
    0.05
}

fn default_momentum() -> f64 {
    0.9
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/experiment")
}

fn default_coverage() -> f64 {
    0.85
}

/// Where the corpus comes from: a directory on disk or the synthetic
/// generator. Exactly one must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

/// Architecture knobs; vocabulary size and class count come from the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: ModelFamily,
    #[serde(default = "default_embedding_dim")]
    pub embedding_dim: usize,
    #[serde(default = "default_hidden_dim")]
    pub hidden_dim: usize,
}

fn default_embedding_dim() -> usize {
    16
}

fn default_hidden_dim() -> usize {
    32
}

/// A pruner in config form: either a canonical id string ("IMP-FT") or its
/// parts spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrunerChoice {
    Id(String),
    Parts {
        scoring: Scoring,
        schedule: Schedule,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tuning: Option<Tuning>,
    },
}

impl PrunerChoice {
    pub fn resolve(&self, target: f64) -> Result<PrunerSpec, PruneError> {
        match self {
            PrunerChoice::Id(id) => PrunerSpec::from_canonical(id, target),
            PrunerChoice::Parts {
                scoring,
                schedule,
                tuning,
            } => PrunerSpec::new(*scoring, *schedule, tuning.unwrap_or(Tuning::None), target),
        }
    }
}

/// Full declarative description of one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusSource,
    pub model: ModelConfig,
    #[serde(default = "default_pruners")]
    pub pruners: Vec<PrunerChoice>,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_n_initializations")]
    pub n_initializations: usize,
    /// Epochs per training phase (N). Iterative pruners consume 4N in total.
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_coverage")]
    pub max_tokens_coverage: f64,
}

impl ExperimentConfig {
    /// Check every invariant that does not require touching the filesystem.
    /// Invalid pruner x threshold combinations are rejected here, before any
    /// training.
    pub fn validate(&self) -> Result<(), HarnessError> {
        match (&self.corpus.path, &self.corpus.synthetic) {
            (Some(_), Some(_)) => {
                return Err(HarnessError::InvalidConfig(
                    "corpus: set either path or synthetic, not both".into(),
                ))
            }
            (None, None) => {
                return Err(HarnessError::InvalidConfig(
                    "corpus: one of path or synthetic is required".into(),
                ))
            }
            _ => {}
        }
        if self.n_initializations < 1 {
            return Err(HarnessError::InvalidConfig(
                "n_initializations must be >= 1".into(),
            ));
        }
        if self.epochs < 1 {
            return Err(HarnessError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(HarnessError::InvalidConfig(
                "batch_size must be >= 1".into(),
            ));
        }
        if !(self.max_tokens_coverage > 0.0 && self.max_tokens_coverage <= 1.0) {
            return Err(HarnessError::InvalidConfig(
                "max_tokens_coverage must lie in (0, 1]".into(),
            ));
        }
        if self.thresholds.is_empty() {
            return Err(HarnessError::InvalidConfig(
                "at least one threshold is required".into(),
            ));
        }
        for pruner in &self.pruners {
            for &t in &self.thresholds {
                pruner.resolve(t)?;
            }
        }
        Ok(())
    }

    pub fn hyper(&self) -> Hyper {
        Hyper {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
        }
    }

    /// All conditions in deterministic order: unpruned first, then pruners in
    /// config order crossed with thresholds in config order.
    pub fn conditions(&self) -> Result<Vec<(Condition, Option<PrunerSpec>)>, HarnessError> {
        let mut out = vec![(Condition::Unpruned, None)];
        for pruner in &self.pruners {
            for &t in &self.thresholds {
                let spec = pruner.resolve(t)?;
                out.push((
                    Condition::Pruned {
                        pruner_id: spec.canonical_id().to_string(),
                        threshold: t,
                    },
                    Some(spec),
                ));
            }
        }
        Ok(out)
    }
}

/// Per-condition metadata persisted next to the initialization directories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionMeta {
    pub condition: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruner_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub epochs_total: u32,
    pub epochs_per_phase: u32,
    pub n_initializations: usize,
    #[serde(default)]
    pub prune_events: Vec<PruneEvent>,
}

/// Corpus plus its encoded splits and the derived model dimensions.
pub struct PreparedData {
    pub corpus: CorpusSplits,
    pub vocab: Vocabulary,
    pub max_tokens: usize,
    pub train: Vec<EncodedExample>,
    pub validation: Vec<EncodedExample>,
    pub test: Vec<EncodedExample>,
    pub model_spec: ModelSpec,
}

/// Load or generate the corpus for a config. Synthetic corpora prefer the
/// materialized copy inside the run directory when one exists.
pub fn materialize_corpus(
    config: &ExperimentConfig,
    run_dir: Option<&Path>,
) -> Result<CorpusSplits, HarnessError> {
    if let Some(path) = &config.corpus.path {
        return Ok(corpus::load_corpus(path)?);
    }
    let spec = config
        .corpus
        .synthetic
        .as_ref()
        .expect("validated corpus source");
    if let Some(run_dir) = run_dir {
        let materialized = run_dir.join("corpus");
        if materialized.join("manifest.json").is_file() {
            return Ok(corpus::load_corpus(&materialized)?);
        }
    }
    Ok(corpus::generate_synthetic_corpus(spec)?)
}

/// Encode all splits and derive the model spec for a config.
pub fn prepare_data(
    config: &ExperimentConfig,
    run_dir: Option<&Path>,
) -> Result<PreparedData, HarnessError> {
    let corpus = materialize_corpus(config, run_dir)?;
    let vocab = Vocabulary::build(&corpus.train);
    let max_tokens = corpus.max_tokens(config.max_tokens_coverage)?;
    let train = corpus.encode_split(&corpus.train, &vocab, max_tokens);
    let validation = corpus.encode_split(&corpus.validation, &vocab, max_tokens);
    let test = corpus.encode_split(&corpus.test, &vocab, max_tokens);
    let model_spec = ModelSpec {
        family: config.model.family,
        vocab_size: vocab.size(),
        embedding_dim: config.model.embedding_dim,
        hidden_dim: config.model.hidden_dim,
        num_classes: corpus.label_space.num_classes(),
        kind: corpus.label_space.kind,
    };
    model_spec.validate()?;
    Ok(PreparedData {
        corpus,
        vocab,
        max_tokens,
        train,
        validation,
        test,
        model_spec,
    })
}

/// Write one initialization's probabilities for a split.
fn write_predictions_csv(path: &Path, ids: &[u64], probs: &Tensor) -> Result<(), HarnessError> {
    let classes = *probs.shape().last().unwrap_or(&0);
    let mut out = Vec::new();
    let header: Vec<String> = (0..classes).map(|c| format!("p_class_{c}")).collect();
    writeln!(out, "example_id,{}", header.join(",")).map_err(io_err(path))?;
    for (e, &id) in ids.iter().enumerate() {
        let row: Vec<String> = (0..classes)
            .map(|c| format!("{}", probs.at2(e, c)))
            .collect();
        writeln!(out, "{},{}", id, row.join(",")).map_err(io_err(path))?;
    }
    fs::write(path, out).map_err(io_err(path))
}

fn parse_predictions_csv(path: &Path) -> Result<(Vec<u64>, usize, Vec<f32>), HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|_| HarnessError::MissingInput(format!("prediction file {}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| HarnessError::Parse {
        path: path.to_path_buf(),
        msg: "empty file".into(),
    })?;
    let classes = header.split(',').count().saturating_sub(1);
    let mut ids = Vec::new();
    let mut probs = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let id: u64 = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|e| HarnessError::Parse {
                path: path.to_path_buf(),
                msg: format!("line {}: bad id: {e}", i + 2),
            })?;
        ids.push(id);
        let mut count = 0;
        for field in fields {
            let p: f32 = field.parse().map_err(|e| HarnessError::Parse {
                path: path.to_path_buf(),
                msg: format!("line {}: bad probability: {e}", i + 2),
            })?;
            probs.push(p);
            count += 1;
        }
        if count != classes {
            return Err(HarnessError::Parse {
                path: path.to_path_buf(),
                msg: format!("line {}: {count} probabilities, expected {classes}", i + 2),
            });
        }
    }
    Ok((ids, classes, probs))
}

/// Load the persisted prediction matrix of one condition and split.
pub fn load_prediction_matrix(
    run_dir: &Path,
    condition: &Condition,
    split: Split,
    n_inits: usize,
) -> Result<PredictionMatrix, HarnessError> {
    let mut per_init = Vec::with_capacity(n_inits);
    let mut example_ids: Option<Vec<u64>> = None;
    let mut classes = 0usize;
    for k in 0..n_inits {
        let path = run_dir
            .join(condition.dir_name())
            .join(format!("init_{k}"))
            .join(format!("predictions_{split}.csv"));
        if !path.is_file() {
            return Err(HarnessError::MissingInput(format!(
                "predictions for condition {} initialization {k} ({})",
                condition.dir_name(),
                path.display()
            )));
        }
        let (ids, c, probs) = parse_predictions_csv(&path)?;
        match &example_ids {
            None => {
                example_ids = Some(ids);
                classes = c;
            }
            Some(existing) => {
                if existing != &ids || classes != c {
                    return Err(HarnessError::Parse {
                        path,
                        msg: "initializations disagree on example ids or classes".into(),
                    });
                }
            }
        }
        per_init.push(probs);
    }
    Ok(PredictionMatrix {
        condition: condition.clone(),
        split,
        example_ids: example_ids.unwrap_or_default(),
        classes,
        per_init,
    })
}

struct UnitOutcome {
    condition_index: usize,
    init: usize,
    epochs_total: u32,
    prune_events: Vec<PruneEvent>,
}

/// Run the full experiment described by `config`, scheduling independent
/// model runs across `jobs` workers. Returns the run directory. Rerunning
/// with an identical config reproduces identical bytes; `jobs` affects wall
/// time only.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<PathBuf, HarnessError> {
    config.validate()?;
    let out = config.output_dir.clone();
    fs::create_dir_all(&out).map_err(io_err(&out))?;

    // Materialize a synthetic corpus inside the run directory so the run is
    // self-describing even if the generator evolves.
    if config.corpus.synthetic.is_some() {
        let corpus_dir = out.join("corpus");
        let corpus = materialize_corpus(config, None)?;
        corpus::write_corpus(&corpus, &corpus_dir)?;
    }
    let data = prepare_data(config, Some(&out))?;

    let config_path = out.join("config.json");
    let body = serde_json::to_string_pretty(config).map_err(|e| HarnessError::Parse {
        path: config_path.clone(),
        msg: e.to_string(),
    })?;
    fs::write(&config_path, body).map_err(io_err(&config_path))?;

    let conditions = config.conditions()?;
    let hyper = config.hyper();

    // One unit of work per (condition, initialization).
    let mut units = Vec::new();
    for (ci, _) in conditions.iter().enumerate() {
        for k in 0..config.n_initializations {
            units.push((ci, k));
        }
    }
    for (condition, _) in &conditions {
        for k in 0..config.n_initializations {
            let dir = out.join(condition.dir_name()).join(format!("init_{k}"));
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
    }

    let run_unit = |&(ci, k): &(usize, usize)| -> Result<UnitOutcome, HarnessError> {
        let (condition, pruner) = &conditions[ci];
        let seed = config.base_seed.wrapping_add(k as u64);
        let dir = out.join(condition.dir_name()).join(format!("init_{k}"));
        let (final_params, epochs_total, prune_events) = match pruner {
            None => {
                let mut params = nn::init_params(&data.model_spec, seed);
                let mut opt = OptState::new(&params);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "shuffle"));
                train::write_epoch_checkpoint(&dir, 0, &params, &opt, None, &rng)?;
                train::train_epochs(
                    &mut params,
                    &mut opt,
                    &mut rng,
                    &data.train,
                    &hyper,
                    config.batch_size,
                    None,
                    1..=config.epochs,
                    |epoch, p, o, r| {
                        train::write_epoch_checkpoint(&dir, epoch, p, o, None, r)?;
                        Ok(())
                    },
                )?;
                (params, config.epochs, Vec::new())
            }
            Some(spec) => {
                let ctx = RunContext {
                    model_spec: &data.model_spec,
                    train: &data.train,
                    hyper: &hyper,
                    batch_size: config.batch_size,
                    epochs_per_phase: config.epochs,
                    out_dir: &dir,
                };
                let result = prune::run_pruner(spec, seed, &ctx)?;
                (
                    result.final_params,
                    result.total_epochs,
                    result.prune_events,
                )
            }
        };
        for (split, encoded, raw) in [
            (Split::Train, &data.train, &data.corpus.train),
            (Split::Test, &data.test, &data.corpus.test),
        ] {
            let probs = nn::predict(&final_params, encoded)?;
            let ids: Vec<u64> = raw.iter().map(|e| e.id).collect();
            let path = dir.join(format!("predictions_{split}.csv"));
            write_predictions_csv(&path, &ids, &probs)?;
        }
        Ok(UnitOutcome {
            condition_index: ci,
            init: k,
            epochs_total,
            prune_events,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let outcomes: Vec<UnitOutcome> =
        pool.install(|| units.par_iter().map(run_unit).collect::<Result<_, _>>())?;

    // Condition metadata comes from each condition's initialization 0; the
    // schedule bookkeeping is identical across initializations.
    for outcome in outcomes.iter().filter(|o| o.init == 0) {
        let (condition, spec) = &conditions[outcome.condition_index];
        let meta = ConditionMeta {
            condition: condition.dir_name(),
            pruner_id: spec.map(|s| s.canonical_id().to_string()),
            threshold: spec.map(|s| s.target),
            epochs_total: outcome.epochs_total,
            epochs_per_phase: config.epochs,
            n_initializations: config.n_initializations,
            prune_events: outcome.prune_events.clone(),
        };
        let path = out.join(condition.dir_name()).join("meta.json");
        let body = serde_json::to_string_pretty(&meta).map_err(|e| HarnessError::Parse {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        fs::write(&path, body).map_err(io_err(&path))?;
    }

    summarize(&out)?;
    Ok(out)
}

/// Read the resolved config echoed into a run directory.
pub fn load_run_config(run_dir: &Path) -> Result<ExperimentConfig, HarnessError> {
    let path = run_dir.join("config.json");
    let text = fs::read_to_string(&path)
        .map_err(|_| HarnessError::MissingInput(format!("run config {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path,
        msg: e.to_string(),
    })
}

pub fn load_condition_meta(
    run_dir: &Path,
    condition: &Condition,
) -> Result<ConditionMeta, HarnessError> {
    let path = run_dir.join(condition.dir_name()).join("meta.json");
    let text = fs::read_to_string(&path)
        .map_err(|_| HarnessError::MissingInput(format!("condition meta {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path,
        msg: e.to_string(),
    })
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub condition: String,
    pub pruner_id: String,
    pub threshold: String,
    pub split: Split,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

/// Mean and standard deviation of per-initialization effectiveness for every
/// condition.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub rows: Vec<SummaryRow>,
}

/// Compute per-condition mean +- std over initializations and write
/// `summary.csv`. A pure function of the run-directory contents.
pub fn summarize(run_dir: &Path) -> Result<MetricsSummary, HarnessError> {
    let config = load_run_config(run_dir)?;
    let data = prepare_data(&config, Some(run_dir))?;
    let kind = data.corpus.label_space.kind;
    let metric_name = match kind {
        LabelKind::Single => "accuracy",
        LabelKind::Multi => "macro_f1",
    };

    let mut rows = Vec::new();
    for (condition, spec) in config.conditions()? {
        for (split, raw) in [
            (Split::Train, &data.corpus.train),
            (Split::Test, &data.corpus.test),
        ] {
            let matrix =
                load_prediction_matrix(run_dir, &condition, split, config.n_initializations)?;
            let gold_sets: Vec<Vec<usize>> = raw.iter().map(|e| e.labels.clone()).collect();
            if matrix.example_ids != raw.iter().map(|e| e.id).collect::<Vec<_>>() {
                return Err(HarnessError::Metric(format!(
                    "prediction ids do not match the {split} split for {}",
                    condition.dir_name()
                )));
            }
            let mut scores = Vec::with_capacity(matrix.n_inits());
            for k in 0..matrix.n_inits() {
                let score = match kind {
                    LabelKind::Single => {
                        let preds: Vec<usize> = (0..matrix.n_examples())
                            .map(|e| matrix.hard_class(k, e))
                            .collect();
                        let gold: Vec<usize> = gold_sets.iter().map(|g| g[0]).collect();
                        accuracy(&preds, &gold)?
                    }
                    LabelKind::Multi => {
                        let probs = Tensor::from_vec(
                            vec![matrix.n_examples(), matrix.classes],
                            matrix.per_init[k].clone(),
                        );
                        macro_f1(&probs, &gold_sets, POSITIVE_THRESHOLD)?
                    }
                };
                scores.push(score);
            }
            let (mean, std) = mean_std(&scores);
            let (cond_label, pruner_id, threshold) = match &condition {
                Condition::Unpruned => ("unpruned".to_string(), "-".to_string(), "-".to_string()),
                Condition::Pruned {
                    pruner_id,
                    threshold,
                } => (
                    "pruned".to_string(),
                    pruner_id.clone(),
                    format!("{threshold}"),
                ),
            };
            rows.push(SummaryRow {
                condition: cond_label,
                pruner_id,
                threshold,
                split,
                metric: metric_name.to_string(),
                mean,
                std,
            });
        }
        let _ = spec;
    }

    let path = run_dir.join("summary.csv");
    let mut out = Vec::new();
    writeln!(out, "condition,pruner_id,threshold,split,metric,mean,std").map_err(io_err(&path))?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.condition, r.pruner_id, r.threshold, r.split, r.metric, r.mean, r.std
        )
        .map_err(io_err(&path))?;
    }
    fs::write(&path, out).map_err(io_err(&path))?;
    Ok(MetricsSummary { rows })
}
