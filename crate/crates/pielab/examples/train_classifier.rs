//! Train a mean-embedding MLP from the raw building blocks: init, shuffle,
//! backward, masked SGD step, predict. The experiment harness wraps exactly
//! this loop; here it is spelled out.
//!
//! Run with: cargo run --example train_classifier

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pielab::corpus::{
    generate_synthetic_corpus, EncodedExample, LabelKind, SyntheticSpec, Vocabulary,
};
use pielab::harness::accuracy;
use pielab::nn::{self, Hyper, ModelFamily, ModelSpec, OptState};

fn hard_predictions(params: &nn::ParamSet, split: &[EncodedExample]) -> Vec<usize> {
    let probs = nn::predict(params, split).unwrap();
    (0..split.len())
        .map(|e| {
            let row = probs.row(e);
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn main() {
    let corpus = generate_synthetic_corpus(&SyntheticSpec {
        classes: 3,
        train: 1000,
        validation: 200,
        test: 200,
        seed: 7,
        hard_fraction: 0.25,
        kind: LabelKind::Single,
    })
    .unwrap();
    let vocab = Vocabulary::build(&corpus.train);
    let max_tokens = corpus.max_tokens(0.85).unwrap();
    let train = corpus.encode_split(&corpus.train, &vocab, max_tokens);
    let test = corpus.encode_split(&corpus.test, &vocab, max_tokens);
    let test_gold: Vec<usize> = corpus.test.iter().map(|e| e.labels[0]).collect();

    let spec = ModelSpec {
        family: ModelFamily::MeanEmbeddingMlp,
        vocab_size: vocab.size(),
        embedding_dim: 16,
        hidden_dim: 16,
        num_classes: 3,
        kind: LabelKind::Single,
    };
    let mut params = nn::init_params(&spec, 0);
    let mut opt = OptState::new(&params);
    let hyper = Hyper {
        learning_rate: 0.1,
        momentum: 0.9,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let batch_size = 32;

    println!(
        "training {} parameters ({} prunable) for 5 epochs",
        params.total_params(),
        params.prunable_params()
    );
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=5 {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let batch: Vec<EncodedExample> = chunk.iter().map(|&i| train[i].clone()).collect();
            let grads = nn::backward(&params, &batch).unwrap();
            nn::opt_step(&mut params, &grads, None, &mut opt, &hyper);
        }
        let loss = nn::training_loss(&params, &train[..200.min(train.len())]).unwrap();
        let acc = accuracy(&hard_predictions(&params, &test), &test_gold).unwrap();
        println!("epoch {epoch}: train loss {loss:.4}, test accuracy {acc:.4}");
    }
}
