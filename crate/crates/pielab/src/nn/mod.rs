//! Minimal deterministic neural core.
//!
//! Two classifier families over token-id sequences: a mean-embedding MLP and
//! a single-layer bidirectional LSTM. Parameters are stored as 32-bit floats;
//! all forward/backward arithmetic runs in 64-bit so that analytic gradients
//! survive a central-finite-difference oracle at tight tolerance. Training is
//! plain SGD with momentum; positions removed by a prune mask receive no
//! update and stay exactly 0.0. Checkpoints round-trip byte-identically.

mod checkpoint;
mod model;
#[doc(hidden)]
pub mod oracle;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, RngState};

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EncodedExample, LabelKind};
use crate::prune::PruneMask;

/// Errors from the neural core and checkpoint I/O.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("token id {id} out of range for vocab size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated checkpoint file")]
    Truncated,
    #[error("checkpoint payload checksum mismatch")]
    ChecksumMismatch,
    #[error("malformed checkpoint metadata: {0}")]
    BadMetadata(String),
    #[error("checkpoint missing array {0}")]
    MissingArray(String),
}

/// Dense row-major tensor of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: Vec<usize>, data: Vec<f32>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "data length must equal product of shape"
        );
        Tensor { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Element of a rank-2 tensor.
    pub fn at2(&self, row: usize, col: usize) -> f32 {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[row * self.shape[1] + col]
    }

    /// Row slice of a rank-2 tensor.
    pub fn row(&self, row: usize) -> &[f32] {
        debug_assert_eq!(self.shape.len(), 2);
        let cols = self.shape[1];
        &self.data[row * cols..(row + 1) * cols]
    }
}

/// Classifier family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelFamily {
    #[serde(rename = "mean-embedding-mlp")]
    MeanEmbeddingMlp,
    #[serde(rename = "bilstm")]
    Bilstm,
}

/// Architecture description; fully determines the parameter layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub kind: LabelKind,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), NnError> {
        for (name, v) in [
            ("vocab_size", self.vocab_size),
            ("embedding_dim", self.embedding_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_classes", self.num_classes),
        ] {
            if v < 1 {
                return Err(NnError::ShapeMismatch(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Functional role of a parameter array. Embedding, bias, and classifier
/// arrays are never prunable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Embedding,
    Recurrent,
    Dense,
    Classifier,
    Bias,
}

impl Role {
    pub fn prunable(self) -> bool {
        matches!(self, Role::Recurrent | Role::Dense)
    }
}

/// One named parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub role: Role,
    pub prunable: bool,
    pub tensor: Tensor,
}

/// Ordered named parameter arrays for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub spec: ModelSpec,
    pub layers: Vec<Layer>,
}

/// Shape and role of every layer for a given spec, in storage order.
pub(crate) fn layer_defs(spec: &ModelSpec) -> Vec<(String, Role, Vec<usize>)> {
    let v = spec.vocab_size;
    let e = spec.embedding_dim;
    let h = spec.hidden_dim;
    let c = spec.num_classes;
    match spec.family {
        ModelFamily::MeanEmbeddingMlp => vec![
            ("embedding".into(), Role::Embedding, vec![v, e]),
            ("hidden.weight".into(), Role::Dense, vec![e, h]),
            ("hidden.bias".into(), Role::Bias, vec![h]),
            ("classifier.weight".into(), Role::Classifier, vec![h, c]),
            ("classifier.bias".into(), Role::Bias, vec![c]),
        ],
        ModelFamily::Bilstm => vec![
            ("embedding".into(), Role::Embedding, vec![v, e]),
            ("lstm_fwd.w_input".into(), Role::Recurrent, vec![e, 4 * h]),
            ("lstm_fwd.w_hidden".into(), Role::Recurrent, vec![h, 4 * h]),
            ("lstm_fwd.bias".into(), Role::Bias, vec![4 * h]),
            ("lstm_bwd.w_input".into(), Role::Recurrent, vec![e, 4 * h]),
            ("lstm_bwd.w_hidden".into(), Role::Recurrent, vec![h, 4 * h]),
            ("lstm_bwd.bias".into(), Role::Bias, vec![4 * h]),
            ("classifier.weight".into(), Role::Classifier, vec![2 * h, c]),
            ("classifier.bias".into(), Role::Bias, vec![c]),
        ],
    }
}

impl ParamSet {
    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn total_params(&self) -> usize {
        self.layers.iter().map(|l| l.tensor.len()).sum()
    }

    pub fn prunable_params(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.prunable)
            .map(|l| l.tensor.len())
            .sum()
    }
}

/// Box-Muller standard normal. Hand-rolled so that sampled parameter bytes
/// stay stable across dependency upgrades.
fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Initialize all parameter arrays for a spec, fully determined by `seed`.
///
/// Embedding rows for real tokens are N(0, 0.1); the OOV row is then set to
/// the arithmetic mean of those rows, and the PAD row is sampled from a
/// normal with the table's empirical mean and standard deviation. Dense,
/// recurrent, and classifier weights are Glorot-uniform; biases start at 0.
pub fn init_params(spec: &ModelSpec, seed: u64) -> ParamSet {
    spec.validate().expect("valid model spec");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    for (name, role, shape) in layer_defs(spec) {
        let len: usize = shape.iter().product();
        let mut data = vec![0.0f32; len];
        match role {
            Role::Embedding => {
                let e = spec.embedding_dim;
                let v = spec.vocab_size;
                for row in 2..v {
                    for col in 0..e {
                        data[row * e + col] = (sample_normal(&mut rng) * 0.1) as f32;
                    }
                }
                // OOV row: mean of all real-token rows, per dimension.
                if v > 2 {
                    for col in 0..e {
                        let mut sum = 0.0f64;
                        for row in 2..v {
                            sum += f64::from(data[row * e + col]);
                        }
                        data[e + col] = (sum / (v - 2) as f64) as f32;
                    }
                }
                // PAD row: normal with the table's empirical mean and std.
                let entries = &data[2 * e..];
                let n = entries.len().max(1) as f64;
                let mean = entries.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
                let var = entries
                    .iter()
                    .map(|&x| (f64::from(x) - mean).powi(2))
                    .sum::<f64>()
                    / n;
                let std = var.sqrt();
                for slot in data.iter_mut().take(e) {
                    *slot = (mean + std * sample_normal(&mut rng)) as f32;
                }
            }
            Role::Dense | Role::Recurrent | Role::Classifier => {
                let (fan_in, fan_out) = (shape[0], shape[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for x in data.iter_mut() {
                    *x = (rng.gen_range(-bound..bound)) as f32;
                }
            }
            Role::Bias => {}
        }
        layers.push(Layer {
            name,
            prunable: role.prunable(),
            role,
            tensor: Tensor::from_vec(shape, data),
        });
    }
    ParamSet {
        spec: spec.clone(),
        layers,
    }
}

/// Per-layer gradient arrays, aligned with `ParamSet::layers`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Gradients {
            layers: params
                .layers
                .iter()
                .map(|l| vec![0.0; l.tensor.len()])
                .collect(),
        }
    }
}

/// Logits for a batch, shape `[batch, num_classes]`.
pub fn forward(params: &ParamSet, batch: &[EncodedExample]) -> Result<Tensor, NnError> {
    model::forward_logits(params, batch)
}

/// Mean loss over a batch given logits: softmax cross-entropy for
/// single-label, mean per-class sigmoid binary cross-entropy for multi-label.
pub fn loss(logits: &Tensor, labels: &[&[f32]], kind: LabelKind) -> Result<f64, NnError> {
    let c = *logits.shape().last().unwrap_or(&0);
    let b = logits.shape()[0];
    if labels.len() != b {
        return Err(NnError::ShapeMismatch(format!(
            "{b} logit rows vs {} label rows",
            labels.len()
        )));
    }
    let mut total = 0.0f64;
    for (row, label) in labels.iter().enumerate() {
        if label.len() != c {
            return Err(NnError::ShapeMismatch(format!(
                "label width {} vs {c} classes",
                label.len()
            )));
        }
        let z: Vec<f64> = logits.row(row).iter().map(|&x| f64::from(x)).collect();
        let y: Vec<f64> = label.iter().map(|&x| f64::from(x)).collect();
        total += model::example_loss(&z, &y, kind);
    }
    Ok(total / b.max(1) as f64)
}

/// Mean training loss of a batch, computed in 64-bit end to end. This is the
/// exact objective that [`backward`] differentiates.
pub fn training_loss(params: &ParamSet, batch: &[EncodedExample]) -> Result<f64, NnError> {
    model::training_loss(params, batch)
}

/// Analytic gradients of the mean batch loss for every parameter array.
///
/// Gradients of masked (pruned) positions may be nonzero here; zeroing them
/// is the optimizer's job.
pub fn backward(params: &ParamSet, batch: &[EncodedExample]) -> Result<Gradients, NnError> {
    model::backward(params, batch)
}

/// SGD-with-momentum hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            learning_rate: 0.05,
            momentum: 0.9,
        }
    }
}

/// Momentum buffers, aligned with `ParamSet::layers`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub velocity: Vec<Vec<f32>>,
}

impl OptState {
    pub fn new(params: &ParamSet) -> Self {
        OptState {
            velocity: params
                .layers
                .iter()
                .map(|l| vec![0.0; l.tensor.len()])
                .collect(),
        }
    }

    /// Fresh optimizer state (used at weight-rewind events).
    pub fn reset(&mut self) {
        for v in &mut self.velocity {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// One SGD step: `v <- momentum*v + g; w <- w - lr*v`.
///
/// Positions masked out in `mask` receive no update; their weight and
/// velocity are forced to exactly 0.0.
pub fn opt_step(
    params: &mut ParamSet,
    grads: &Gradients,
    mask: Option<&PruneMask>,
    state: &mut OptState,
    hyper: &Hyper,
) {
    assert_eq!(params.layers.len(), grads.layers.len(), "gradient layout");
    for (li, layer) in params.layers.iter_mut().enumerate() {
        let g = &grads.layers[li];
        let v = &mut state.velocity[li];
        let data = layer.tensor.data_mut();
        assert_eq!(data.len(), g.len(), "gradient shape for {}", layer.name);
        let bits = mask.and_then(|m| m.layer_bits(&layer.name));
        for i in 0..data.len() {
            if let Some(bits) = bits {
                if !bits[i] {
                    data[i] = 0.0;
                    v[i] = 0.0;
                    continue;
                }
            }
            let new_v = hyper.momentum * f64::from(v[i]) + g[i];
            v[i] = new_v as f32;
            data[i] = (f64::from(data[i]) - hyper.learning_rate * new_v) as f32;
        }
    }
}

/// Class probabilities for a split, shape `[examples, num_classes]`.
///
/// Single-label rows are softmax (sum to 1); multi-label entries are
/// independent sigmoids in [0, 1].
pub fn predict(params: &ParamSet, split: &[EncodedExample]) -> Result<Tensor, NnError> {
    let c = params.spec.num_classes;
    let mut out = Vec::with_capacity(split.len() * c);
    for chunk in split.chunks(128) {
        let logits = model::forward_logits(params, chunk)?;
        for row in 0..chunk.len() {
            let z: Vec<f64> = logits.row(row).iter().map(|&x| f64::from(x)).collect();
            let probs = match params.spec.kind {
                LabelKind::Single => model::softmax(&z),
                LabelKind::Multi => z.iter().map(|&x| model::sigmoid(x)).collect(),
            };
            out.extend(probs.into_iter().map(|p| p as f32));
        }
    }
    Ok(Tensor::from_vec(vec![split.len(), c], out))
}

/// Load a plain-text embedding matrix ("token v1 v2 ... vE" per line) over an
/// initialized parameter set. Tokens present in the file replace their random
/// rows; the OOV and PAD rows are then recomputed from the loaded table per
/// the usual rules (OOV = mean of present vectors, PAD ~ N(table mean, std)).
pub fn overlay_text_embeddings(
    params: &mut ParamSet,
    vocab: &crate::corpus::Vocabulary,
    path: &std::path::Path,
    seed: u64,
) -> Result<usize, NnError> {
    let e = params.spec.embedding_dim;
    let raw = std::fs::read_to_string(path).map_err(|err| NnError::Io {
        path: path.to_path_buf(),
        source: err,
    })?;
    let idx = params
        .layer_index("embedding")
        .ok_or_else(|| NnError::MissingArray("embedding".into()))?;
    let data = params.layers[idx].tensor.data_mut();
    let mut loaded = 0usize;
    for line in raw.lines() {
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values: Vec<f32> = parts.filter_map(|p| p.parse::<f32>().ok()).collect();
        if values.len() != e {
            return Err(NnError::ShapeMismatch(format!(
                "embedding row for '{token}' has {} values, expected {e}",
                values.len()
            )));
        }
        if let Some(id) = vocab.id_of(token) {
            let row = id as usize * e;
            data[row..row + e].copy_from_slice(&values);
            loaded += 1;
        }
    }
    // Recompute OOV and PAD rows against the overlaid table.
    let v = params.spec.vocab_size;
    if v > 2 {
        for col in 0..e {
            let mut sum = 0.0f64;
            for row in 2..v {
                sum += f64::from(data[row * e + col]);
            }
            data[e + col] = (sum / (v - 2) as f64) as f32;
        }
    }
    let entries = &data[2 * e..];
    let n = entries.len().max(1) as f64;
    let mean = entries.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
    let var = entries
        .iter()
        .map(|&x| (f64::from(x) - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for slot in data.iter_mut().take(e) {
        *slot = (mean + std * sample_normal(&mut rng)) as f32;
    }
    Ok(loaded)
}

#[cfg(test)]
mod tests;
