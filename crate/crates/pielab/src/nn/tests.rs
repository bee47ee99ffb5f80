use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{EncodedExample, LabelKind};
use crate::nn::{self, Hyper, ModelFamily, ModelSpec, OptState, RngState, Tensor};
use crate::prune::PruneMask;

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

use crate::nn::oracle::{gradient_check, random_batch as oracle_batch};

fn random_batch(
    spec: &ModelSpec,
    seed: u64,
    batch: usize,
    max_tokens: usize,
) -> Vec<EncodedExample> {
    oracle_batch(spec, seed, batch, max_tokens, true)
}

#[test]
fn init_is_deterministic_and_seed_sensitive() {
    let spec = mlp_spec(LabelKind::Single);
    let a = nn::init_params(&spec, 9);
    let b = nn::init_params(&spec, 9);
    assert_eq!(a, b);
    let c = nn::init_params(&spec, 10);
    assert_ne!(a, c);
}

#[test]
fn oov_row_is_mean_of_real_rows() {
    let spec = mlp_spec(LabelKind::Single);
    let params = nn::init_params(&spec, 3);
    let emb = &params.layer("embedding").unwrap().tensor;
    let e = spec.embedding_dim;
    for col in 0..e {
        let mut sum = 0.0f64;
        for row in 2..spec.vocab_size {
            sum += f64::from(emb.at2(row, col));
        }
        let mean = sum / (spec.vocab_size - 2) as f64;
        assert!(
            (f64::from(emb.at2(1, col)) - mean).abs() < 1e-6,
            "OOV col {col}"
        );
    }
}

#[test]
fn prunability_flags_follow_roles() {
    for spec in [bilstm_spec(LabelKind::Single), mlp_spec(LabelKind::Multi)] {
        let params = nn::init_params(&spec, 0);
        let mut classifier_layers = 0;
        for layer in &params.layers {
            match layer.role {
                nn::Role::Embedding | nn::Role::Bias => assert!(!layer.prunable),
                nn::Role::Classifier => {
                    assert!(!layer.prunable);
                    classifier_layers += 1;
                }
                nn::Role::Dense | nn::Role::Recurrent => assert!(layer.prunable),
            }
        }
        assert_eq!(classifier_layers, 1);
    }
}

#[test]
fn forward_handles_all_pad_rows() {
    for spec in [mlp_spec(LabelKind::Single), bilstm_spec(LabelKind::Single)] {
        let params = nn::init_params(&spec, 1);
        let batch = vec![EncodedExample {
            id: 0,
            token_ids: vec![0; 5],
            true_length: 0,
            label_vector: vec![1.0, 0.0, 0.0],
        }];
        let logits = nn::forward(&params, &batch).unwrap();
        assert!(logits.data().iter().all(|x| x.is_finite()));
    }
}

#[test]
fn forward_is_per_example_independent() {
    for spec in [mlp_spec(LabelKind::Single), bilstm_spec(LabelKind::Single)] {
        let params = nn::init_params(&spec, 5);
        let batch = random_batch(&spec, 77, 6, 6);
        let full = nn::forward(&params, &batch).unwrap();
        // Batch of one matches its row in the larger batch.
        for (i, ex) in batch.iter().enumerate() {
            let solo = nn::forward(&params, std::slice::from_ref(ex)).unwrap();
            assert_eq!(solo.row(0), full.row(i), "row {i}");
        }
        // Permuting the batch permutes rows identically.
        let mut rev = batch.clone();
        rev.reverse();
        let rev_logits = nn::forward(&params, &rev).unwrap();
        for i in 0..batch.len() {
            assert_eq!(rev_logits.row(batch.len() - 1 - i), full.row(i));
        }
    }
}

#[test]
fn forward_rejects_out_of_range_ids() {
    let spec = mlp_spec(LabelKind::Single);
    let params = nn::init_params(&spec, 0);
    let batch = vec![EncodedExample {
        id: 0,
        token_ids: vec![spec.vocab_size as u32, 0, 0],
        true_length: 1,
        label_vector: vec![1.0, 0.0, 0.0],
    }];
    assert!(matches!(
        nn::forward(&params, &batch),
        Err(nn::NnError::TokenOutOfRange { .. })
    ));
}

#[test]
fn loss_analytic_values() {
    // Uniform logits, C classes, single-label -> ln C.
    let logits = Tensor::from_vec(vec![1, 3], vec![0.7, 0.7, 0.7]);
    let labels: Vec<&[f32]> = vec![&[1.0, 0.0, 0.0]];
    let l = nn::loss(&logits, &labels, LabelKind::Single).unwrap();
    assert!((l - 3.0f64.ln()).abs() < 1e-6, "{l}");

    // Multi-label probabilities (0.5, 0.5) against (1, 0) -> mean BCE ln 2.
    let logits = Tensor::from_vec(vec![1, 2], vec![0.0, 0.0]);
    let labels: Vec<&[f32]> = vec![&[1.0, 0.0]];
    let l = nn::loss(&logits, &labels, LabelKind::Multi).unwrap();
    assert!((l - 2.0f64.ln()).abs() < 1e-9, "{l}");

    // Huge correct margin -> loss approaches 0.
    let logits = Tensor::from_vec(vec![1, 3], vec![30.0, -30.0, -30.0]);
    let labels: Vec<&[f32]> = vec![&[1.0, 0.0, 0.0]];
    let l = nn::loss(&logits, &labels, LabelKind::Single).unwrap();
    assert!(l < 1e-8, "{l}");
}

#[test]
fn gradient_zero_at_symmetric_minimum() {
    let spec = ModelSpec {
        num_classes: 2,
        ..mlp_spec(LabelKind::Single)
    };
    let mut params = nn::init_params(&spec, 4);
    for name in ["classifier.weight", "classifier.bias"] {
        let idx = params.layer_index(name).unwrap();
        params.layers[idx].tensor.data_mut().fill(0.0);
    }
    let ex = |label: usize| EncodedExample {
        id: label as u64,
        token_ids: vec![2, 3, 4, 0],
        true_length: 3,
        label_vector: {
            let mut v = vec![0.0, 0.0];
            v[label] = 1.0;
            v
        },
    };
    let grads = nn::backward(&params, &[ex(0), ex(1)]).unwrap();
    let max_g = grads
        .layers
        .iter()
        .flatten()
        .fold(0.0f64, |m, &g| m.max(g.abs()));
    assert!(max_g < 1e-5, "max |g| = {max_g}");
}

#[test]
fn duplicated_batch_keeps_mean_gradients() {
    let spec = bilstm_spec(LabelKind::Multi);
    let params = nn::init_params(&spec, 11);
    let batch = random_batch(&spec, 13, 3, 5);
    let mut doubled = batch.clone();
    doubled.extend(batch.iter().cloned());
    let g1 = nn::backward(&params, &batch).unwrap();
    let g2 = nn::backward(&params, &doubled).unwrap();
    for (a, b) in g1.layers.iter().zip(&g2.layers) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    for kind in [LabelKind::Single, LabelKind::Multi] {
        for seed in 0..3u64 {
            let err = gradient_check(&mlp_spec(kind), seed, 1e-3);
            assert!(err <= 1e-4, "mlp {kind} seed {seed}: rel err {err}");
            let err = gradient_check(&bilstm_spec(kind), seed, 1e-3);
            assert!(err <= 1e-4, "bilstm {kind} seed {seed}: rel err {err}");
        }
    }
}

#[test]
fn opt_step_masked_positions_stay_zero() {
    let spec = mlp_spec(LabelKind::Single);
    let mut params = nn::init_params(&spec, 2);
    let mut state = OptState::new(&params);
    let hyper = Hyper {
        learning_rate: 0.1,
        momentum: 0.9,
    };

    // Mask out the whole hidden layer.
    let hidden_len = params.layer("hidden.weight").unwrap().tensor.len();
    let mut layers = BTreeMap::new();
    layers.insert("hidden.weight".to_string(), vec![false; hidden_len]);
    let mask = PruneMask::from_parts(0.5, layers);

    let batch = random_batch(&spec, 3, 4, 6);
    let grads = nn::backward(&params, &batch).unwrap();
    nn::opt_step(&mut params, &grads, Some(&mask), &mut state, &hyper);
    nn::opt_step(&mut params, &grads, Some(&mask), &mut state, &hyper);
    let hidden = params.layer("hidden.weight").unwrap();
    assert!(hidden.tensor.data().iter().all(|&x| x == 0.0));
}

#[test]
fn opt_step_all_active_mask_equals_plain_sgd() {
    let spec = mlp_spec(LabelKind::Single);
    let params0 = nn::init_params(&spec, 6);
    let hyper = Hyper {
        learning_rate: 0.05,
        momentum: 0.9,
    };
    let batch = random_batch(&spec, 8, 4, 6);
    let grads = nn::backward(&params0, &batch).unwrap();

    let mut a = params0.clone();
    let mut sa = OptState::new(&a);
    nn::opt_step(&mut a, &grads, None, &mut sa, &hyper);

    let mut b = params0.clone();
    let mut sb = OptState::new(&b);
    let mask = PruneMask::all_active(&b, 0.2);
    nn::opt_step(&mut b, &grads, Some(&mask), &mut sb, &hyper);

    assert_eq!(a, b);
}

#[test]
fn opt_step_zero_learning_rate_is_identity() {
    let spec = mlp_spec(LabelKind::Single);
    let mut params = nn::init_params(&spec, 7);
    let snapshot = params.clone();
    let mut state = OptState::new(&params);
    let batch = random_batch(&spec, 9, 4, 6);
    let grads = nn::backward(&params, &batch).unwrap();
    nn::opt_step(
        &mut params,
        &grads,
        None,
        &mut state,
        &Hyper {
            learning_rate: 0.0,
            momentum: 0.9,
        },
    );
    assert_eq!(params, snapshot);
}

#[test]
fn predict_probability_contracts() {
    let spec = mlp_spec(LabelKind::Single);
    let params = nn::init_params(&spec, 5);
    let split = random_batch(&spec, 21, 9, 6);
    let probs = nn::predict(&params, &split).unwrap();
    for row in 0..split.len() {
        let sum: f32 = probs.row(row).iter().sum();
        assert!((sum - 1.0).abs() < 1e-5, "row {row} sums to {sum}");
    }
    // Identical calls give identical matrices.
    let again = nn::predict(&params, &split).unwrap();
    assert_eq!(probs, again);

    let multi = ModelSpec {
        kind: LabelKind::Multi,
        ..spec
    };
    let params = nn::init_params(&multi, 5);
    let probs = nn::predict(&params, &split).unwrap();
    assert!(probs.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
}

#[test]
fn sigmoid_saturates_toward_one() {
    let spec = ModelSpec {
        kind: LabelKind::Multi,
        ..mlp_spec(LabelKind::Multi)
    };
    let mut params = nn::init_params(&spec, 0);
    let idx = params.layer_index("classifier.bias").unwrap();
    params.layers[idx].tensor.data_mut()[0] = 30.0;
    let batch = vec![EncodedExample {
        id: 0,
        token_ids: vec![0; 4],
        true_length: 0,
        label_vector: vec![0.0; 3],
    }];
    let probs = nn::predict(&params, &batch).unwrap();
    assert!(probs.at2(0, 0) > 0.999_999);
}

fn sample_checkpoint(seed: u64) -> nn::Checkpoint {
    let spec = mlp_spec(LabelKind::Single);
    let params = nn::init_params(&spec, seed);
    let opt_state = OptState::new(&params);
    let rng = ChaCha8Rng::seed_from_u64(seed);
    nn::Checkpoint {
        format_version: 1,
        spec,
        epoch: 3,
        params,
        opt_state,
        mask: None,
        rng: RngState::capture(&rng),
    }
}

#[test]
fn checkpoint_roundtrip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path_a = dir.path().join("a.bin");
    let path_b = dir.path().join("b.bin");
    let mut ckpt = sample_checkpoint(14);

    // Include a mask so bit-packed arrays round-trip too.
    let mut mask_layers = BTreeMap::new();
    let hidden_len = ckpt.params.layer("hidden.weight").unwrap().tensor.len();
    let bits: Vec<bool> = (0..hidden_len).map(|i| i % 3 != 0).collect();
    mask_layers.insert("hidden.weight".to_string(), bits);
    ckpt.mask = Some(PruneMask::from_parts(0.7, mask_layers));

    nn::save_checkpoint(&path_a, &ckpt).unwrap();
    let loaded = nn::load_checkpoint(&path_a).unwrap();
    assert_eq!(loaded, ckpt);
    nn::save_checkpoint(&path_b, &loaded).unwrap();
    assert_eq!(
        std::fs::read(&path_a).unwrap(),
        std::fs::read(&path_b).unwrap()
    );
}

#[test]
fn checkpoint_rejects_bad_magic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bin");
    nn::save_checkpoint(&path, &sample_checkpoint(1)).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(
        nn::load_checkpoint(&path),
        Err(nn::NnError::BadMagic)
    ));
}

#[test]
fn checkpoint_rejects_corrupted_payload() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bin");
    nn::save_checkpoint(&path, &sample_checkpoint(2)).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n - 20] ^= 0xff;
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(
        nn::load_checkpoint(&path),
        Err(nn::NnError::ChecksumMismatch)
    ));
}

#[test]
fn checkpoint_rejects_truncation_and_future_versions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bin");
    nn::save_checkpoint(&path, &sample_checkpoint(3)).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    let cut = dir.path().join("cut.bin");
    std::fs::write(&cut, &bytes[..bytes.len() - 9]).unwrap();
    assert!(matches!(
        nn::load_checkpoint(&cut),
        Err(nn::NnError::Truncated)
    ));

    // Meta is not covered by the payload CRC, so a version patch loads far
    // enough to hit the version gate.
    let patched_path = dir.path().join("v2.bin");
    let needle = b"\"format_version\":1";
    let pos = bytes
        .windows(needle.len())
        .position(|w| w == needle)
        .expect("meta contains version field");
    let mut patched = bytes.clone();
    patched[pos + needle.len() - 1] = b'2';
    std::fs::write(&patched_path, &patched).unwrap();
    assert!(matches!(
        nn::load_checkpoint(&patched_path),
        Err(nn::NnError::UnsupportedVersion(2))
    ));
}

#[test]
fn checkpoint_floats_are_little_endian_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("le.bin");
    let mut ckpt = sample_checkpoint(4);
    let idx = ckpt.params.layer_index("embedding").unwrap();
    ckpt.params.layers[idx].tensor.data_mut()[0] = 1.0;
    nn::save_checkpoint(&path, &ckpt).unwrap();

    let bytes = std::fs::read(&path).unwrap();
    let meta_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let meta: serde_json::Value = serde_json::from_slice(&bytes[12..12 + meta_len]).unwrap();
    let arrays = meta["arrays"].as_array().unwrap();
    let emb = arrays.iter().find(|a| a["name"] == "embedding").unwrap();
    let offset = emb["offset"].as_u64().unwrap() as usize;
    let payload_start = 12 + meta_len;
    assert_eq!(
        &bytes[payload_start + offset..payload_start + offset + 4],
        &[0x00, 0x00, 0x80, 0x3f],
        "1.0f32 must serialize little-endian"
    );
}

#[test]
fn rng_state_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let _: u64 = rng.gen();
    let _: u64 = rng.gen();
    let state = RngState::capture(&rng);
    let mut restored = state.restore().unwrap();
    let mut rng2 = rng.clone();
    for _ in 0..10 {
        assert_eq!(rng2.gen::<u64>(), restored.gen::<u64>());
    }
}

#[test]
fn embedding_overlay_applies_vectors_and_recomputes_reserved_rows() {
    use crate::corpus::{RawExample, Vocabulary};
    let train = vec![RawExample {
        id: 0,
        text: "alpha beta gamma delta".into(),
        labels: vec![0],
    }];
    let vocab = Vocabulary::build(&train);
    let spec = ModelSpec {
        vocab_size: vocab.size(),
        embedding_dim: 3,
        ..mlp_spec(LabelKind::Single)
    };
    let mut params = nn::init_params(&spec, 0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.txt");
    std::fs::write(&path, "alpha 1.0 2.0 3.0\nmissing 9 9 9\nbeta -1 0 1\n").unwrap();
    let loaded = nn::overlay_text_embeddings(&mut params, &vocab, &path, 0).unwrap();
    assert_eq!(loaded, 2);

    let emb = &params.layer("embedding").unwrap().tensor;
    let alpha_row = vocab.id_of("alpha").unwrap() as usize;
    assert_eq!(emb.row(alpha_row), &[1.0, 2.0, 3.0]);
    // OOV row reflects the overlaid table mean.
    let e = spec.embedding_dim;
    for col in 0..e {
        let mut sum = 0.0;
        for row in 2..spec.vocab_size {
            sum += f64::from(emb.at2(row, col));
        }
        let mean = sum / (spec.vocab_size - 2) as f64;
        assert!((f64::from(emb.at2(1, col)) - mean).abs() < 1e-6);
    }
}
