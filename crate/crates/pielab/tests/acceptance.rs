//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured values. Criteria 7-10 share one bundled desk-scale pipeline
//! run (executed twice to check determinism across job counts).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pielab::cli;
use pielab::corpus::{EncodedExample, LabelKind, SyntheticSpec};
use pielab::harness::{
    self, Condition, CorpusSource, ExperimentConfig, ModelConfig, PredictionMatrix, PrunerChoice,
    Split,
};
use pielab::influence;
use pielab::nn::{self, oracle, ModelFamily, ModelSpec, OptState};
use pielab::pie;
use pielab::prune::{self, PrunerSpec, RunContext, Schedule, Scoring, Tuning};
use pielab::readability::{self, EasyWordList};

fn mlp_spec(kind: LabelKind) -> ModelSpec {
    ModelSpec {
        family: ModelFamily::MeanEmbeddingMlp,
        vocab_size: 12,
        embedding_dim: 5,
        hidden_dim: 6,
        num_classes: 3,
        kind,
    }
}

fn bilstm_spec(kind: LabelKind) -> ModelSpec {
    ModelSpec {
        family: ModelFamily::Bilstm,
        vocab_size: 10,
        embedding_dim: 4,
        hidden_dim: 4,
        num_classes: 3,
        kind,
    }
}

/// Criterion 1: analytic gradients vs central finite differences (eps 1e-3)
/// for 20 random tiny models per family, max relative error <= 1e-4,
/// runtime < 1 min.
#[test]
fn criterion_01_gradient_oracle() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for family in ["mlp", "bilstm"] {
        for seed in 0..20u64 {
            // Half the models per family use the multi-label loss.
            let kind = if seed < 10 {
                LabelKind::Single
            } else {
                LabelKind::Multi
            };
            let spec = match family {
                "mlp" => mlp_spec(kind),
                _ => bilstm_spec(kind),
            };
            let err = oracle::gradient_check(&spec, seed, 1e-3);
            assert!(
                err <= 1e-4,
                "{family} seed {seed}: relative error {err:.3e} exceeds 1e-4"
            );
            worst = worst.max(err);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!(
        "criterion 1: PASS — gradient oracle, 40 tiny models, worst rel err {worst:.3e} in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2 support: an independent brute-force PIE detector, written
// directly from the definitions (mode with ascending tie-break; strict > N/2
// majority sets).

fn brute_argmax_lowest(row: &[f32]) -> usize {
    let best = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    (0..row.len()).find(|&c| row[c] == best).unwrap()
}

fn brute_mode_ascending(votes: &[usize], classes: usize) -> usize {
    let counts: Vec<usize> = (0..classes)
        .map(|c| votes.iter().filter(|&&v| v == c).count())
        .collect();
    let max = *counts.iter().max().unwrap();
    (0..classes).find(|&c| counts[c] == max).unwrap()
}

fn brute_is_pie(
    pruned: &PredictionMatrix,
    unpruned: &PredictionMatrix,
    example: usize,
    kind: LabelKind,
) -> bool {
    let classes = pruned.classes;
    let majority = |m: &PredictionMatrix| -> Vec<usize> {
        match kind {
            LabelKind::Single => {
                let votes: Vec<usize> = (0..m.n_inits())
                    .map(|k| {
                        let row: Vec<f32> = (0..classes).map(|c| m.prob(k, example, c)).collect();
                        brute_argmax_lowest(&row)
                    })
                    .collect();
                vec![brute_mode_ascending(&votes, classes)]
            }
            LabelKind::Multi => (0..classes)
                .filter(|&c| {
                    let positive = (0..m.n_inits())
                        .filter(|&k| m.prob(k, example, c) >= 0.5)
                        .count();
                    2 * positive > m.n_inits()
                })
                .collect(),
        }
    };
    majority(pruned) != majority(unpruned)
}

fn random_matrix(
    rng: &mut ChaCha8Rng,
    n_inits: usize,
    examples: usize,
    classes: usize,
) -> PredictionMatrix {
    PredictionMatrix {
        condition: Condition::Unpruned,
        split: Split::Test,
        example_ids: (0..examples as u64).collect(),
        classes,
        // A coarse probability grid makes argmax ties and exact-0.5
        // threshold hits common, exercising both boundary rules.
        per_init: (0..n_inits)
            .map(|_| {
                (0..examples * classes)
                    .map(|_| rng.gen_range(0..5) as f32 / 4.0)
                    .collect()
            })
            .collect(),
    }
}

/// Criterion 2: >= 1000 random prediction-matrix trials agree 100% with the
/// brute-force detector for both label kinds, including tie and strict-N/2
/// boundary cases. Runtime < 1 min.
#[test]
fn criterion_02_pie_oracle_equivalence() {
    let start = Instant::now();

    // The stated tie and boundary cases first.
    assert_eq!(pie::majority_class(&[0, 0, 1, 1]).unwrap(), 0);
    assert_eq!(pie::majority_class(&[2, 0, 2, 1, 2]).unwrap(), 2);
    assert_eq!(pie::majority_set(&[2], 4).unwrap(), Vec::<usize>::new());
    assert_eq!(pie::majority_set(&[3], 5).unwrap(), vec![0]);
    assert_eq!(pie::majority_set(&[2], 2).unwrap(), vec![0]);

    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut trials = 0usize;
    let mut examples_checked = 0usize;
    while trials < 1000 {
        let n_inits = rng.gen_range(1..=7);
        let examples = rng.gen_range(1..=200);
        let classes = rng.gen_range(2..=5);
        let pruned = random_matrix(&mut rng, n_inits, examples, classes);
        let unpruned = random_matrix(&mut rng, n_inits, examples, classes);
        for kind in [LabelKind::Single, LabelKind::Multi] {
            let verdicts = pie::detect_pies(&pruned, &unpruned, kind).unwrap();
            for (e, v) in verdicts.iter().enumerate() {
                let expect = brute_is_pie(&pruned, &unpruned, e, kind);
                assert_eq!(
                    v.is_pie, expect,
                    "trial {trials} kind {kind} example {e}: implementation disagrees with brute force"
                );
                examples_checked += 1;
            }
            trials += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!(
        "criterion 2: PASS — PIE oracle equivalence, {trials} trials / {examples_checked} examples, 100% agreement in {elapsed:?}"
    );
}

const ALL_PRUNERS: [&str; 8] = [
    "IIBP-WR", "IIBP-FT", "IBP-AI", "IMP-WR", "IMP-FT", "MP-AI", "IRP-FT", "RP-AI",
];
const ALL_THRESHOLDS: [f64; 5] = [0.2, 0.5, 0.7, 0.9, 0.99];

/// Criterion 3: after every schedule at every threshold, per-layer active
/// fractions match the target within floor-rounding slack; embeddings,
/// biases, and the classifier are never masked; masked weights are exactly
/// 0.0 in every subsequent checkpoint.
#[test]
fn criterion_03_pruning_exactness() {
    let spec = bilstm_spec(LabelKind::Single);
    let train = oracle::random_batch(&spec, 77, 24, 6, false);
    let hyper = nn::Hyper {
        learning_rate: 0.1,
        momentum: 0.9,
    };
    let mut schedules = 0usize;
    for id in ALL_PRUNERS {
        for target in ALL_THRESHOLDS {
            let pruner = PrunerSpec::from_canonical(id, target).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let ctx = RunContext {
                model_spec: &spec,
                train: &train,
                hyper: &hyper,
                batch_size: 8,
                epochs_per_phase: 1,
                out_dir: dir.path(),
            };
            let result = prune::run_pruner(&pruner, 3, &ctx).unwrap();

            // Per-layer exactness within floor slack.
            let steps = match pruner.schedule {
                Schedule::AtInit => 1.0,
                Schedule::Iterative => 3.0,
            };
            for layer in result.final_params.layers.iter().filter(|l| l.prunable) {
                let n = layer.tensor.len() as f64;
                let active = result.final_mask.active_count(&layer.name).unwrap() as f64;
                let diff = (active / n - (1.0 - target)).abs();
                assert!(
                    diff <= steps / n + 1e-12,
                    "{id}@{target} layer {}: active fraction off by {diff}",
                    layer.name
                );
            }

            // Exclusion and absorption, checked in every checkpoint.
            let mut prev_bits: BTreeMap<String, Vec<bool>> = BTreeMap::new();
            for path in &result.checkpoint_paths {
                let ckpt = nn::load_checkpoint(path).unwrap();
                if let Some(mask) = &ckpt.mask {
                    for layer in &ckpt.params.layers {
                        let bits = mask.layer_bits(&layer.name);
                        if !layer.prunable {
                            assert!(
                                bits.is_none(),
                                "{id}@{target}: mask exists for non-prunable {}",
                                layer.name
                            );
                            continue;
                        }
                        let bits = bits.expect("prunable layers are masked");
                        if let Some(prev) = prev_bits.get(&layer.name) {
                            for (now, before) in bits.iter().zip(prev) {
                                assert!(!(*now && !*before), "mask bit flipped 0 -> 1");
                            }
                        }
                        for (w, &keep) in layer.tensor.data().iter().zip(bits) {
                            if !keep {
                                assert_eq!(
                                    *w,
                                    0.0,
                                    "{id}@{target}: masked weight nonzero in {}",
                                    path.display()
                                );
                            }
                        }
                        prev_bits.insert(layer.name.clone(), bits.to_vec());
                    }
                }
            }
            schedules += 1;
        }
    }
    println!(
        "criterion 3: PASS — pruning exactness over {schedules} schedule x threshold runs (8 pruners x 5 thresholds)"
    );
}

/// Criterion 4: after each rewind event, active weights are bit-equal to the
/// recorded initialization and the optimizer state is reset. Verified end to
/// end: each post-rewind epoch of a real IMP-WR run is reproduced from the
/// epoch-0 checkpoint, the event's mask, a fresh optimizer, and the stored
/// RNG stream; the reproduction must match the run's checkpoint bit for bit.
#[test]
fn criterion_04_weight_rewinding() {
    let spec = mlp_spec(LabelKind::Single);
    let train = oracle::random_batch(&spec, 55, 40, 6, false);
    let hyper = nn::Hyper {
        learning_rate: 0.1,
        momentum: 0.9,
    };
    let batch_size = 8usize;
    let n = 2u32; // epochs per phase
    let dir = tempfile::tempdir().unwrap();
    let pruner = PrunerSpec::from_canonical("IMP-WR", 0.7).unwrap();
    let ctx = RunContext {
        model_spec: &spec,
        train: &train,
        hyper: &hyper,
        batch_size,
        epochs_per_phase: n,
        out_dir: dir.path(),
    };
    let result = prune::run_pruner(&pruner, 11, &ctx).unwrap();
    assert_eq!(result.prune_events.len(), 3);

    let init = nn::load_checkpoint(&result.checkpoint_paths[0]).unwrap();
    let mut events_checked = 0;
    for event in &result.prune_events {
        let pre =
            nn::load_checkpoint(&result.checkpoint_paths[event.after_epoch as usize]).unwrap();
        let post_idx = event.after_epoch as usize + 1;
        let post = nn::load_checkpoint(&result.checkpoint_paths[post_idx]).unwrap();
        let mask = post.mask.clone().expect("mask recorded after pruning");

        // Rewind: active weights bit-equal the initialization, pruned 0.0.
        let mut params = init.params.clone();
        let mut opt = OptState::new(&params);
        prune::rewind_weights(&mut params, &init.params, &mask, &mut opt).unwrap();
        for (layer, init_layer) in params.layers.iter().zip(&init.params.layers) {
            let bits = mask.layer_bits(&layer.name);
            for (i, (w, w0)) in layer
                .tensor
                .data()
                .iter()
                .zip(init_layer.tensor.data())
                .enumerate()
            {
                match bits {
                    Some(b) if !b[i] => assert_eq!(*w, 0.0),
                    _ => assert_eq!(w.to_bits(), w0.to_bits(), "active weight not bit-equal"),
                }
            }
        }
        assert!(opt.velocity.iter().flatten().all(|&v| v == 0.0));

        // Replay the first post-rewind epoch with the stored RNG stream and
        // a fresh optimizer; it must land exactly on the run's checkpoint.
        let mut rng = pre.rng.restore().unwrap();
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let batch: Vec<EncodedExample> = chunk.iter().map(|&i| train[i].clone()).collect();
            let grads = nn::backward(&params, &batch).unwrap();
            nn::opt_step(&mut params, &grads, Some(&mask), &mut opt, &hyper);
        }
        assert_eq!(
            params, post.params,
            "epoch {post_idx} is not reproducible from rewound state + fresh optimizer"
        );
        events_checked += 1;
    }
    println!(
        "criterion 4: PASS — weight rewinding bit-equality and optimizer reset verified at {events_checked} rewind events"
    );
}

/// Criterion 5: hand-valued EL2N cases at 1e-9; scores bounded by sqrt(2)
/// for one-hot targets; 20-bin partition sizes differ by at most one.
#[test]
fn criterion_05_el2n_correctness() {
    assert!(influence::el2n(&[0.0, 1.0], &[0.0, 1.0]).unwrap().abs() < 1e-9);
    // sqrt(0.5) = 0.70711..., sqrt(0.38) = 0.61644...
    let v = influence::el2n(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
    assert!((v - 0.5f64.sqrt()).abs() < 1e-9, "{v} vs sqrt(0.5)");
    let v = influence::el2n(&[0.2, 0.5, 0.3], &[0.0, 1.0, 0.0]).unwrap();
    assert!((v - 0.38f64.sqrt()).abs() < 1e-9, "{v} vs sqrt(0.38)");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bound = 2.0f64.sqrt();
    for _ in 0..2000 {
        let classes = rng.gen_range(2..8);
        let raw: Vec<f64> = (0..classes).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let mut y = vec![0.0f64; classes];
        y[rng.gen_range(0..classes)] = 1.0;
        let v = influence::el2n(&p, &y).unwrap();
        assert!((0.0..=bound + 1e-12).contains(&v), "{v} out of [0, sqrt 2]");
    }

    for n in [100usize, 103, 2000, 259] {
        let profile = influence::EL2NProfile {
            example_ids: (0..n as u64).collect(),
            scores: (0..n)
                .map(|i| ((i * 7919) % 1000) as f64 / 1000.0)
                .collect(),
            monitored_epochs: (1, 1),
            n_initializations: 1,
        };
        let bins = influence::bins(&profile, 20).unwrap();
        assert_eq!(bins.bins.len(), 20);
        assert_eq!(bins.bins.iter().map(Vec::len).sum::<usize>(), n);
        let max = bins.bins.iter().map(Vec::len).max().unwrap();
        let min = bins.bins.iter().map(Vec::len).min().unwrap();
        assert!(max - min <= 1, "n={n}: bin sizes {min}..{max}");
    }
    println!("criterion 5: PASS — EL2N hand values at 1e-9, sqrt(2) bound, 20-bin partition sizes differ by <= 1");
}

/// Criterion 6: a 10-sentence fixture with independently computed values for
/// all 8 metrics matches to 1e-6, plus the stated single-sentence examples.
#[test]
fn criterion_06_readability_fixtures() {
    let easy = EasyWordList::small_fallback();

    // Spec hand examples on "the cat sat on the mat".
    let tiny = readability::compute_stats("the cat sat on the mat", &easy);
    let g = readability::grade_scores(&tiny).unwrap();
    assert!((g.flesch_kincaid - (-1.45)).abs() < 1e-6);
    assert!((g.gunning_fog - 2.4).abs() < 1e-6);
    assert!((g.dale_chall - 0.2976).abs() < 1e-6);

    // 10-sentence fixture; expectations computed by an independent oracle
    // implementing the stated tokenizer, sentence, syllable, and formula
    // rules, then frozen here.
    let fixture = "The cat sat on the mat. \
                   A small dog ran over the green hill! \
                   Did you see the bird by the window? \
                   We like to read a good book at night. \
                   The teacher gave every child a paper boat. \
                   Some people walk to school when the sun is out; others ride the bus. \
                   My mother made a wonderful dinner for the family. \
                   The happy children played a simple game near the water. \
                   This beautiful morning began with a quiet song.";
    let stats = readability::compute_stats(fixture, &easy);
    assert_eq!(stats.sentences, 10, "fixture must split into 10 sentences");
    assert_eq!(stats.words, 80);
    assert_eq!(stats.letters, 311);
    assert_eq!(stats.total_syllables(), 102);
    assert_eq!(stats.complex_word_count, 4);
    assert_eq!(stats.difficult_word_count, 34);
    assert_eq!(stats.token_length, 80);

    let g = readability::grade_scores(&stats).unwrap();
    let expect = [
        ("ari", g.ari, 0.8801249999999996),
        ("coleman_liau", g.coleman_liau, 3.3584999999999994),
        ("flesch_kincaid", g.flesch_kincaid, 2.5749999999999993),
        ("linsear_write", g.linsear_write, 3.4000000000000004),
        ("gunning_fog", g.gunning_fog, 5.2),
        ("dale_chall", g.dale_chall, 10.744050000000001),
        ("difficult_words", stats.difficult_word_count as f64, 34.0),
        ("token_length", stats.token_length as f64, 80.0),
    ];
    for (name, got, want) in expect {
        assert!(
            (got - want).abs() < 1e-6,
            "{name}: got {got}, expected {want}"
        );
    }
    println!("criterion 6: PASS — readability fixture, 8 metrics within 1e-6 of independent oracle values");
}

// ---------------------------------------------------------------------------
// Shared bundled pipeline for criteria 7-10.

struct Pipeline {
    _tmp: tempfile::TempDir,
    run_dir: PathBuf,
    config: ExperimentConfig,
    first_csvs: BTreeMap<String, Vec<u8>>,
    second_csvs: BTreeMap<String, Vec<u8>>,
    first_svgs: BTreeMap<String, Vec<u8>>,
    second_svgs: BTreeMap<String, Vec<u8>>,
}

fn bundled_config(output_dir: PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        corpus: CorpusSource {
            path: None,
            synthetic: Some(SyntheticSpec {
                classes: 3,
                train: 2000,
                validation: 400,
                test: 400,
                seed: 0,
                hard_fraction: 0.25,
                kind: LabelKind::Single,
            }),
        },
        model: ModelConfig {
            family: ModelFamily::MeanEmbeddingMlp,
            embedding_dim: 16,
            hidden_dim: 8,
        },
        pruners: vec![
            PrunerChoice::Id("RP-AI".into()),
            PrunerChoice::Id("MP-AI".into()),
            PrunerChoice::Id("IMP-FT".into()),
        ],
        // Criterion 7 compares 0.2 vs 0.99; criterion 8 reads the bundled
        // run at 0.9, so the bundle carries all three.
        thresholds: vec![0.2, 0.9, 0.99],
        n_initializations: 5,
        epochs: 3,
        batch_size: 32,
        learning_rate: 0.1,
        momentum: 0.9,
        base_seed: 0,
        output_dir,
        max_tokens_coverage: 0.85,
    }
}

fn snapshot(dir: &Path, extension: &str) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == extension) {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn pipeline() -> &'static Pipeline {
    static PIPELINE: OnceLock<Pipeline> = OnceLock::new();
    PIPELINE.get_or_init(|| {
        let tmp = tempfile::tempdir().expect("tempdir");
        let run_dir = tmp.path().join("bundled");
        let config = bundled_config(run_dir.clone());

        // First execution with one worker, second with four: identical
        // config, identical directory, different job counts.
        cli::run_full_pipeline(&config, 1).expect("first pipeline run");
        let first_csvs = snapshot(&run_dir, "csv");
        let first_svgs = snapshot(&run_dir, "svg");
        cli::run_full_pipeline(&config, 4).expect("second pipeline run");
        let second_csvs = snapshot(&run_dir, "csv");
        let second_svgs = snapshot(&run_dir, "svg");

        Pipeline {
            _tmp: tmp,
            run_dir,
            config,
            first_csvs,
            second_csvs,
            first_svgs,
            second_svgs,
        }
    })
}

fn majority_correct_counts(matrix: &PredictionMatrix, gold: &[usize], subset: &[usize]) -> usize {
    subset
        .iter()
        .filter(|&&e| {
            let votes: Vec<usize> = (0..matrix.n_inits())
                .map(|k| matrix.hard_class(k, e))
                .collect();
            pie::majority_class(&votes).unwrap() == gold[e]
        })
        .count()
}

/// Criterion 7: desk-scale trend reproduction on the bundled single-label
/// corpus. (a) PIE fraction at 0.99 strictly exceeds the fraction at 0.2 for
/// every pruner; (b) pruned per-init mean accuracy on PIEs is lower than on
/// all test points for every condition with a non-empty PIE set; (c) on
/// PIEs, pruned + unpruned majority-vote accuracies sum to <= 1 exactly.
#[test]
fn criterion_07_desk_scale_trends() {
    let start = Instant::now();
    let p = pipeline();
    let analysis = cli::analyze_pies(&p.run_dir, Split::Test).expect("pies analysis");

    // (a) strict monotone PIE fraction per pruner between 0.2 and 0.99.
    let mut fractions: BTreeMap<(String, String), f64> = BTreeMap::new();
    for cond in &analysis.conditions {
        fractions.insert(
            (cond.pruner_id.clone(), format!("{}", cond.threshold)),
            cond.report.pie_fraction,
        );
    }
    for pruner in ["RP-AI", "MP-AI", "IMP-FT"] {
        let low = fractions[&(pruner.to_string(), "0.2".to_string())];
        let high = fractions[&(pruner.to_string(), "0.99".to_string())];
        assert!(
            high > low,
            "(a) {pruner}: PIE fraction at 0.99 ({high}) must exceed 0.2 ({low})"
        );
    }

    // (b) pruned per-init mean accuracy on PIEs < on all test points.
    let mut checked_b = 0;
    for cond in &analysis.conditions {
        let s = &cond.report.subset_accuracy;
        if let (Some(on_pies), Some(on_all)) = (s.pruned_on_pies, s.pruned_on_all) {
            assert!(
                on_pies.per_init_mean < on_all.per_init_mean,
                "(b) {} @ {}: accuracy on PIEs {} !< on all {}",
                cond.pruner_id,
                cond.threshold,
                on_pies.per_init_mean,
                on_all.per_init_mean
            );
            checked_b += 1;
        }
    }
    assert!(checked_b > 0, "(b) no condition had a non-empty PIE set");

    // (c) theorem-level, zero tolerance, via integer counts.
    let config = &p.config;
    let data = harness::prepare_data(config, Some(&p.run_dir)).unwrap();
    let gold: Vec<usize> = data.corpus.test.iter().map(|e| e.labels[0]).collect();
    let unpruned = harness::load_prediction_matrix(
        &p.run_dir,
        &Condition::Unpruned,
        Split::Test,
        config.n_initializations,
    )
    .unwrap();
    let mut checked_c = 0;
    for cond in &analysis.conditions {
        let pies: Vec<usize> = cond
            .report
            .verdicts
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_pie)
            .map(|(i, _)| i)
            .collect();
        if pies.is_empty() {
            continue;
        }
        let pruned = harness::load_prediction_matrix(
            &p.run_dir,
            &cond.condition,
            Split::Test,
            config.n_initializations,
        )
        .unwrap();
        let c_p = majority_correct_counts(&pruned, &gold, &pies);
        let c_u = majority_correct_counts(&unpruned, &gold, &pies);
        assert!(
            c_p + c_u <= pies.len(),
            "(c) {} @ {}: {c_p} + {c_u} > {} PIEs",
            cond.pruner_id,
            cond.threshold,
            pies.len()
        );
        checked_c += 1;
    }
    assert!(checked_c > 0);

    assert!(
        start.elapsed().as_secs() < 600,
        "criterion 7 checks must finish within the 10-minute budget"
    );
    let rp_low = fractions[&("RP-AI".to_string(), "0.2".to_string())];
    let rp_high = fractions[&("RP-AI".to_string(), "0.99".to_string())];
    println!(
        "criterion 7: PASS — (a) strict PIE growth for 3 pruners (e.g. RP-AI {rp_low:.4} -> {rp_high:.4}); (b) {checked_b} conditions with lower accuracy on PIEs; (c) majority-vote sum <= 1 on {checked_c} conditions; total pipeline+checks {:?}",
        start.elapsed()
    );
}

/// Criterion 8: at threshold 0.9, the PIE fraction in the top EL2N bin
/// exceeds the bottom bin's for at least 2 of the 3 pruners.
#[test]
fn criterion_08_influence_concentration() {
    let p = pipeline();
    let rows = cli::analyze_influence(&p.run_dir, false).expect("influence analysis");
    let mut holds = 0usize;
    let mut detail = Vec::new();
    for (pruner, threshold, fractions) in &rows {
        if (*threshold - 0.9).abs() > 1e-12 {
            continue;
        }
        let bottom = *fractions.first().unwrap();
        let top = *fractions.last().unwrap();
        detail.push(format!("{pruner}: bottom {bottom:.4} top {top:.4}"));
        if top > bottom {
            holds += 1;
        }
    }
    assert_eq!(detail.len(), 3, "expected all three pruners at 0.9");
    assert!(
        holds >= 2,
        "influence concentration holds only for {holds} of 3 pruners: {detail:?}"
    );
    println!(
        "criterion 8: PASS — top vs bottom EL2N bin PIE fraction at 0.9 for {holds}/3 pruners ({})",
        detail.join("; ")
    );
}

/// Criterion 9: executing the full pipeline twice from the same config
/// yields byte-identical CSV outputs, and the job count changes no output
/// byte.
#[test]
fn criterion_09_determinism() {
    let p = pipeline();
    assert!(!p.first_csvs.is_empty());
    let names_first: Vec<&String> = p.first_csvs.keys().collect();
    let names_second: Vec<&String> = p.second_csvs.keys().collect();
    assert_eq!(names_first, names_second, "CSV inventory differs");
    for (name, bytes) in &p.first_csvs {
        assert_eq!(
            bytes,
            p.second_csvs.get(name).unwrap(),
            "CSV {name} differs between jobs=1 and jobs=4 runs"
        );
    }
    // Figures are deterministic too.
    for (name, bytes) in &p.first_svgs {
        assert_eq!(
            bytes,
            p.second_svgs.get(name).unwrap(),
            "figure {name} differs between runs"
        );
    }
    println!(
        "criterion 9: PASS — {} CSV files and {} figures byte-identical across reruns with jobs=1 vs jobs=4",
        p.first_csvs.len(),
        p.first_svgs.len()
    );
}

/// Criterion 10: the random + weight-rewinding combination is rejected for
/// every target, and iterative runs consume exactly 4N epochs with prune
/// events after epochs N, 2N, and 3N.
#[test]
fn criterion_10_combo_guard_and_bookkeeping() {
    for target in ALL_THRESHOLDS {
        assert!(
            matches!(
                PrunerSpec::new(Scoring::Random, Schedule::Iterative, Tuning::Rewind, target),
                Err(prune::PruneError::ForbiddenCombo)
            ),
            "random + rewind must be rejected at target {target}"
        );
    }

    let p = pipeline();
    let n = p.config.epochs;
    let mut iterative_checked = 0usize;
    for (condition, spec) in p.config.conditions().unwrap() {
        let Some(spec) = spec else { continue };
        let meta = harness::load_condition_meta(&p.run_dir, &condition).unwrap();
        match spec.schedule {
            Schedule::Iterative => {
                assert_eq!(meta.epochs_total, 4 * n, "{}", condition.dir_name());
                let after: Vec<u32> = meta.prune_events.iter().map(|e| e.after_epoch).collect();
                assert_eq!(after, vec![n, 2 * n, 3 * n], "{}", condition.dir_name());
                // Every epoch checkpoint 0..=4N exists, and no more.
                for k in 0..p.config.n_initializations {
                    let dir = p
                        .run_dir
                        .join(condition.dir_name())
                        .join(format!("init_{k}"));
                    for epoch in 0..=4 * n {
                        assert!(
                            dir.join(format!("checkpoint_epoch_{epoch}.bin")).is_file(),
                            "missing epoch {epoch} checkpoint in {}",
                            dir.display()
                        );
                    }
                    assert!(!dir
                        .join(format!("checkpoint_epoch_{}.bin", 4 * n + 1))
                        .is_file());
                }
                iterative_checked += 1;
            }
            Schedule::AtInit => {
                assert_eq!(meta.epochs_total, n);
                assert_eq!(meta.prune_events.len(), 1);
                assert_eq!(meta.prune_events[0].after_epoch, 0);
            }
        }
    }
    assert!(iterative_checked > 0, "bundle must include iterative runs");
    println!(
        "criterion 10: PASS — random+rewind rejected at all 5 targets; {iterative_checked} iterative conditions consumed exactly 4N epochs with events after N, 2N, 3N"
    );
}
