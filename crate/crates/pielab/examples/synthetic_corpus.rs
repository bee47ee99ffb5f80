//! Generate a deterministic synthetic corpus and inspect it: class skew,
//! hard/easy length mix, vocabulary, and the fixed-length encoding.
//!
//! Run with: cargo run --example synthetic_corpus

use pielab::corpus::{
    self, decode, encode, generate_synthetic_corpus, LabelKind, SyntheticSpec, Vocabulary,
};

fn main() {
    let spec = SyntheticSpec {
        classes: 3,
        train: 600,
        validation: 100,
        test: 100,
        seed: 42,
        hard_fraction: 0.25,
        kind: LabelKind::Single,
    };
    let splits = generate_synthetic_corpus(&spec).expect("valid spec");

    println!(
        "generated {} train / {} validation / {} test examples, {} classes",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len(),
        splits.label_space.num_classes()
    );

    let mut counts = vec![0usize; spec.classes];
    for ex in &splits.train {
        counts[ex.labels[0]] += 1;
    }
    println!("\ntrain class counts (skewed by construction):");
    for (c, count) in counts.iter().enumerate() {
        println!(
            "  {}: {count} ({:.1}%)",
            splits.label_space.class_names[c],
            100.0 * *count as f64 / splits.train.len() as f64
        );
    }

    let lengths: Vec<usize> = splits
        .train
        .iter()
        .map(|e| corpus::tokenize(&e.text).len())
        .collect();
    println!(
        "\ntoken lengths: min {}, max {} (hard examples are the long tail)",
        lengths.iter().min().unwrap(),
        lengths.iter().max().unwrap()
    );

    let vocab = Vocabulary::build(&splits.train);
    let max_tokens = splits.max_tokens(0.85).unwrap();
    println!(
        "vocabulary: {} ids (2 reserved); max_tokens = {max_tokens} (smallest power of two covering 85%)",
        vocab.size()
    );

    let sample = &splits.test[0];
    let encoded = encode(sample, &vocab, max_tokens, &splits.label_space);
    println!("\nsample test example {}:", sample.id);
    println!("  text: {}", sample.text);
    println!(
        "  encoded: true_length {}, first ids {:?}",
        encoded.true_length,
        &encoded.token_ids[..8.min(encoded.token_ids.len())]
    );
    println!("  decoded prefix: {}", decode(&encoded, &vocab).join(" "));
}
