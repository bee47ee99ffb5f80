//! Run a small multi-initialization experiment and detect the examples on
//! which pruned and unpruned majority predictions disagree.
//!
//! Run with: cargo run --example detect_pies

use pielab::cli::analyze_pies;
use pielab::corpus::{LabelKind, SyntheticSpec};
use pielab::harness::Split;
use pielab::harness::{run_experiment, CorpusSource, ExperimentConfig, ModelConfig, PrunerChoice};
use pielab::nn::ModelFamily;

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        corpus: CorpusSource {
            path: None,
            synthetic: Some(SyntheticSpec {
                classes: 3,
                train: 1200,
                validation: 150,
                test: 200,
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
            PrunerChoice::Id("IMP-FT".into()),
        ],
        thresholds: vec![0.2, 0.9],
        n_initializations: 5,
        epochs: 5,
        batch_size: 32,
        learning_rate: 0.1,
        momentum: 0.9,
        base_seed: 0,
        output_dir: tmp.path().join("run"),
        max_tokens_coverage: 0.85,
    };

    println!("training 5 unpruned + 4 x 5 pruned initializations ...");
    let run_dir = run_experiment(&config, 2).unwrap();
    let analysis = analyze_pies(&run_dir, Split::Test).unwrap();

    for cond in &analysis.conditions {
        let report = &cond.report;
        println!(
            "\n{} @ {}: {} of {} test examples are PIEs ({:.2}%)",
            cond.pruner_id,
            cond.threshold,
            report.verdicts.iter().filter(|v| v.is_pie).count(),
            report.verdicts.len(),
            100.0 * report.pie_fraction
        );
        if let (Some(pruned_pies), Some(pruned_all)) = (
            report.subset_accuracy.pruned_on_pies,
            report.subset_accuracy.pruned_on_all,
        ) {
            println!(
                "  pruned accuracy on PIEs {:.4} vs on all {:.4}",
                pruned_pies.per_init_mean, pruned_all.per_init_mean
            );
        }
        for v in report.verdicts.iter().filter(|v| v.is_pie).take(3) {
            println!(
                "  example {}: pruned majority {} vs unpruned {}",
                v.example_id, v.pruned_majority, v.unpruned_majority
            );
        }
    }
}
