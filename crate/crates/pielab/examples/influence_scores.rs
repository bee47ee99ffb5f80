//! Score training examples by influence (distance between predicted
//! probabilities and the target, averaged over monitored epochs and
//! initializations), bin them into 20 percentile groups, and show where the
//! PIEs of a pruned condition concentrate.
//!
//! Run with: cargo run --example influence_scores

use pielab::cli::analyze_influence;
use pielab::corpus::{LabelKind, SyntheticSpec};
use pielab::harness::{run_experiment, CorpusSource, ExperimentConfig, ModelConfig, PrunerChoice};
use pielab::influence::monitor_start_epoch;
use pielab::nn::ModelFamily;

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        corpus: CorpusSource {
            path: None,
            synthetic: Some(SyntheticSpec {
                classes: 3,
                train: 600,
                validation: 100,
                test: 100,
                seed: 0,
                hard_fraction: 0.3,
                kind: LabelKind::Single,
            }),
        },
        model: ModelConfig {
            family: ModelFamily::MeanEmbeddingMlp,
            embedding_dim: 16,
            hidden_dim: 8,
        },
        pruners: vec![PrunerChoice::Id("RP-AI".into())],
        thresholds: vec![0.9],
        n_initializations: 5,
        epochs: 4,
        batch_size: 32,
        learning_rate: 0.1,
        momentum: 0.9,
        base_seed: 0,
        output_dir: tmp.path().join("run"),
        max_tokens_coverage: 0.85,
    };
    println!(
        "monitoring starts at epoch {} of {} (first epoch past 30% of the budget)",
        monitor_start_epoch(config.epochs),
        config.epochs
    );

    let run_dir = run_experiment(&config, 2).unwrap();
    let rows = analyze_influence(&run_dir, false).unwrap();

    for (pruner, threshold, fractions) in &rows {
        println!("\n{pruner} @ {threshold}: PIE fraction per influence bin (train split)");
        for (i, frac) in fractions.iter().enumerate() {
            let bar = "#".repeat((frac * 40.0).round() as usize);
            println!("  bin {:2} |{bar:<40}| {frac:.3}", i + 1);
        }
    }
    println!("\nhigh-influence bins (right side) should hold most of the PIEs");
}
