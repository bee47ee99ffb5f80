//! The whole pipeline in one go: experiment, PIE detection, influence and
//! readability analyses, and the CSV + SVG report bundle, written to
//! ./runs/full-study-example.
//!
//! Run with: cargo run --example full_study

use std::path::PathBuf;

use pielab::cli::run_full_pipeline;
use pielab::corpus::{LabelKind, SyntheticSpec};
use pielab::harness::{CorpusSource, ExperimentConfig, ModelConfig, PrunerChoice};
use pielab::nn::ModelFamily;

fn main() {
    let config = ExperimentConfig {
        corpus: CorpusSource {
            path: None,
            synthetic: Some(SyntheticSpec {
                classes: 3,
                train: 1000,
                validation: 200,
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
            PrunerChoice::Id("MP-AI".into()),
            PrunerChoice::Id("IMP-FT".into()),
        ],
        thresholds: vec![0.2, 0.9, 0.99],
        n_initializations: 5,
        epochs: 3,
        batch_size: 32,
        learning_rate: 0.1,
        momentum: 0.9,
        base_seed: 0,
        output_dir: PathBuf::from("runs/full-study-example"),
        max_tokens_coverage: 0.85,
    };

    println!(
        "running {} unpruned + {} pruned model trainings ...",
        config.n_initializations,
        config.pruners.len() * config.thresholds.len() * config.n_initializations
    );
    let run_dir = run_full_pipeline(&config, 4).expect("pipeline");
    println!("run directory: {}", run_dir.display());
    println!("summary:       {}", run_dir.join("summary.csv").display());
    println!("report bundle: {}", run_dir.join("report").display());
    println!("\nreport contents:");
    let mut names: Vec<String> = std::fs::read_dir(run_dir.join("report"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        println!("  {name}");
    }
}
