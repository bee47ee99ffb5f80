//! Run single pruning schedules end to end and inspect the masks they leave
//! behind: per-layer active counts, nominal vs effective pruned fractions,
//! and the fixed per-iteration fraction of iterative schedules.
//!
//! Run with: cargo run --example prune_model

use pielab::corpus::{generate_synthetic_corpus, LabelKind, SyntheticSpec, Vocabulary};
use pielab::nn::{Hyper, ModelFamily, ModelSpec};
use pielab::prune::{mask_stats, per_iteration_fraction, run_pruner, PrunerSpec, RunContext};

fn main() {
    let corpus = generate_synthetic_corpus(&SyntheticSpec {
        classes: 2,
        train: 300,
        validation: 50,
        test: 50,
        seed: 11,
        hard_fraction: 0.2,
        kind: LabelKind::Single,
    })
    .unwrap();
    let vocab = Vocabulary::build(&corpus.train);
    let max_tokens = corpus.max_tokens(0.85).unwrap();
    let train = corpus.encode_split(&corpus.train, &vocab, max_tokens);

    let spec = ModelSpec {
        family: ModelFamily::Bilstm,
        vocab_size: vocab.size(),
        embedding_dim: 8,
        hidden_dim: 6,
        num_classes: 2,
        kind: LabelKind::Single,
    };
    let hyper = Hyper {
        learning_rate: 0.1,
        momentum: 0.9,
    };

    let target = 0.7;
    let r = per_iteration_fraction(target, 3).unwrap();
    println!(
        "target {target}: iterative schedules remove {:.3} of the remaining weights at each of 3 steps",
        r
    );

    for id in ["MP-AI", "IMP-FT", "IMP-WR"] {
        let pruner = PrunerSpec::from_canonical(id, target).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ctx = RunContext {
            model_spec: &spec,
            train: &train,
            hyper: &hyper,
            batch_size: 32,
            epochs_per_phase: 2,
            out_dir: dir.path(),
        };
        let result = run_pruner(&pruner, 0, &ctx).unwrap();
        let stats = mask_stats(&result.final_mask, &result.final_params);
        println!(
            "\n{id}: {} epochs, prune events after epochs {:?}",
            result.total_epochs,
            result
                .prune_events
                .iter()
                .map(|e| e.after_epoch)
                .collect::<Vec<_>>()
        );
        println!(
            "  nominal pruned {:.4} (of prunable), effective {:.4} (of all parameters)",
            stats.nominal_pruned_fraction, stats.effective_pruned_fraction
        );
        for layer in &stats.per_layer {
            println!(
                "  {:18} {:4} / {:4} active ({:.1}% pruned)",
                layer.name,
                layer.active,
                layer.total,
                100.0 * layer.pruned_fraction
            );
        }
    }
}
