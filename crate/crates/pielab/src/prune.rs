//! Pruning methods: scoring functions, schedules, masks, and weight rewinding.
//!
//! Eight methods arise from crossing scoring (magnitude, impact, random) with
//! scheduling (at initialization, iterative) and, for iterative schedules, a
//! tuning strategy (fine-tune or weight rewinding). Pruning is local and
//! unstructured: the same fraction is removed from every prunable layer, and
//! embeddings, biases, and the final classifier are never touched.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::EncodedExample;
use crate::nn::{self, Hyper, ModelSpec, NnError, OptState, ParamSet};
use crate::rngutil::derive_seed;
use crate::train;

/// Errors from pruning configuration and pruned training runs.
#[derive(Debug, Error)]
pub enum PruneError {
    #[error("random scoring cannot be combined with weight rewinding")]
    ForbiddenCombo,
    #[error("pruning target must lie strictly in (0, 1), got {0}")]
    InvalidTarget(f64),
    #[error("per-step fraction must lie in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("iterations must be >= 1")]
    InvalidIterations,
    #[error("unknown pruner id {0}")]
    UnknownPruner(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("training diverged (non-finite values) at epoch {epoch}")]
    Diverged { epoch: u32 },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Per-weight saliency used to rank weights for removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scoring {
    Magnitude,
    Impact,
    Random,
}

/// When pruning happens: once before training, or in three iterations during
/// training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    AtInit,
    Iterative,
}

/// What happens after an iterative prune step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tuning {
    Finetune,
    Rewind,
    /// At-init schedules have no tuning phase.
    None,
}

/// A validated pruning method plus its target fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrunerSpec {
    pub scoring: Scoring,
    pub schedule: Schedule,
    pub tuning: Tuning,
    /// Fraction of prunable parameters to remove, strictly in (0, 1).
    pub target: f64,
}

impl PrunerSpec {
    pub fn new(
        scoring: Scoring,
        schedule: Schedule,
        tuning: Tuning,
        target: f64,
    ) -> Result<Self, PruneError> {
        if !(target > 0.0 && target < 1.0) {
            return Err(PruneError::InvalidTarget(target));
        }
        if scoring == Scoring::Random && tuning == Tuning::Rewind {
            return Err(PruneError::ForbiddenCombo);
        }
        match schedule {
            Schedule::AtInit => {
                if tuning != Tuning::None {
                    return Err(PruneError::UnknownPruner(format!(
                        "at-init schedules take no tuning strategy, got {tuning:?}"
                    )));
                }
            }
            Schedule::Iterative => {
                if tuning == Tuning::None {
                    return Err(PruneError::UnknownPruner(
                        "iterative schedules need a tuning strategy (finetune or rewind)".into(),
                    ));
                }
            }
        }
        Ok(PrunerSpec {
            scoring,
            schedule,
            tuning,
            target,
        })
    }

    /// The method's canonical identifier, used verbatim in all reports.
    pub fn canonical_id(&self) -> &'static str {
        match (self.scoring, self.schedule, self.tuning) {
            (Scoring::Impact, Schedule::Iterative, Tuning::Rewind) => "IIBP-WR",
            (Scoring::Impact, Schedule::Iterative, Tuning::Finetune) => "IIBP-FT",
            (Scoring::Impact, Schedule::AtInit, Tuning::None) => "IBP-AI",
            (Scoring::Magnitude, Schedule::Iterative, Tuning::Rewind) => "IMP-WR",
            (Scoring::Magnitude, Schedule::Iterative, Tuning::Finetune) => "IMP-FT",
            (Scoring::Magnitude, Schedule::AtInit, Tuning::None) => "MP-AI",
            (Scoring::Random, Schedule::Iterative, Tuning::Finetune) => "IRP-FT",
            (Scoring::Random, Schedule::AtInit, Tuning::None) => "RP-AI",
            _ => unreachable!("constructor rejects invalid combinations"),
        }
    }

    /// Build from a canonical identifier such as `IMP-FT` or `RP-AI`.
    pub fn from_canonical(id: &str, target: f64) -> Result<Self, PruneError> {
        let (scoring, schedule, tuning) = match id {
            "IIBP-WR" => (Scoring::Impact, Schedule::Iterative, Tuning::Rewind),
            "IIBP-FT" => (Scoring::Impact, Schedule::Iterative, Tuning::Finetune),
            "IBP-AI" => (Scoring::Impact, Schedule::AtInit, Tuning::None),
            "IMP-WR" => (Scoring::Magnitude, Schedule::Iterative, Tuning::Rewind),
            "IMP-FT" => (Scoring::Magnitude, Schedule::Iterative, Tuning::Finetune),
            "MP-AI" => (Scoring::Magnitude, Schedule::AtInit, Tuning::None),
            "IRP-FT" => (Scoring::Random, Schedule::Iterative, Tuning::Finetune),
            "RP-AI" => (Scoring::Random, Schedule::AtInit, Tuning::None),
            other => return Err(PruneError::UnknownPruner(other.to_string())),
        };
        PrunerSpec::new(scoring, schedule, tuning, target)
    }
}

/// Per-layer bit arrays over the prunable layers: 1 = active, 0 = pruned.
///
/// Bits only ever flip from active to pruned over a schedule. Non-prunable
/// layers have no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneMask {
    target: f64,
    layers: BTreeMap<String, Vec<bool>>,
}

impl PruneMask {
    /// All-active mask over the prunable layers of `params`.
    pub fn all_active(params: &ParamSet, target: f64) -> Self {
        let layers = params
            .layers
            .iter()
            .filter(|l| l.prunable)
            .map(|l| (l.name.clone(), vec![true; l.tensor.len()]))
            .collect();
        PruneMask { target, layers }
    }

    pub fn from_parts(target: f64, layers: BTreeMap<String, Vec<bool>>) -> Self {
        PruneMask { target, layers }
    }

    /// Recorded target fraction for the schedule that maintains this mask.
    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn layer_bits(&self, name: &str) -> Option<&[bool]> {
        self.layers.get(name).map(|v| v.as_slice())
    }

    pub fn layers(&self) -> &BTreeMap<String, Vec<bool>> {
        &self.layers
    }

    pub fn active_count(&self, name: &str) -> Option<usize> {
        self.layers
            .get(name)
            .map(|bits| bits.iter().filter(|&&b| b).count())
    }

    pub fn pruned_total(&self) -> usize {
        self.layers
            .values()
            .map(|bits| bits.iter().filter(|&&b| !b).count())
            .sum()
    }

    /// Force pruned positions of `params` to exactly 0.0.
    pub fn apply(&self, params: &mut ParamSet) {
        for layer in &mut params.layers {
            if let Some(bits) = self.layers.get(&layer.name) {
                let data = layer.tensor.data_mut();
                for (x, &keep) in data.iter_mut().zip(bits) {
                    if !keep {
                        *x = 0.0;
                    }
                }
            }
        }
    }
}

/// Non-negative saliency per weight of every prunable layer.
#[derive(Debug, Clone)]
pub struct ScoreMap {
    layers: BTreeMap<String, Vec<f64>>,
}

impl ScoreMap {
    pub fn layer(&self, name: &str) -> Option<&[f64]> {
        self.layers.get(name).map(|v| v.as_slice())
    }
}

/// Draw `count` distinct training examples (without replacement) for impact
/// scoring. Falls back to the whole split with a warning when it is smaller
/// than `count`.
pub fn sample_training_examples(
    train: &[EncodedExample],
    count: usize,
    seed: u64,
) -> Vec<EncodedExample> {
    if train.len() <= count {
        if train.len() < count {
            log::warn!(
                "train split has {} examples, fewer than the {count} requested for impact scoring; using the full split",
                train.len()
            );
        }
        return train.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..train.len()).collect();
    indices.shuffle(&mut rng);
    let mut picked: Vec<usize> = indices.into_iter().take(count).collect();
    picked.sort_unstable();
    picked.into_iter().map(|i| train[i].clone()).collect()
}

/// Score every weight of every prunable layer.
///
/// Magnitude: `|w|`. Impact: `|w * G|` where `G` is the gradient of the loss
/// summed over the provided training sample, evaluated at the current
/// weights. Random: `Uniform[0, 1)` from `seed`, drawn over prunable layers
/// in parameter-set order.
pub fn score(
    params: &ParamSet,
    scoring: Scoring,
    train_sample: &[EncodedExample],
    seed: u64,
) -> Result<ScoreMap, PruneError> {
    let mut layers = BTreeMap::new();
    match scoring {
        Scoring::Magnitude => {
            for layer in params.layers.iter().filter(|l| l.prunable) {
                let scores = layer
                    .tensor
                    .data()
                    .iter()
                    .map(|&w| f64::from(w).abs())
                    .collect();
                layers.insert(layer.name.clone(), scores);
            }
        }
        Scoring::Impact => {
            // Mean gradients times the sample size give the summed gradient.
            let grads = nn::backward(params, train_sample)?;
            let n = train_sample.len() as f64;
            for (li, layer) in params.layers.iter().enumerate() {
                if !layer.prunable {
                    continue;
                }
                let scores = layer
                    .tensor
                    .data()
                    .iter()
                    .zip(&grads.layers[li])
                    .map(|(&w, &g)| (f64::from(w) * g * n).abs())
                    .collect();
                layers.insert(layer.name.clone(), scores);
            }
        }
        Scoring::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for layer in params.layers.iter().filter(|l| l.prunable) {
                let scores = (0..layer.tensor.len()).map(|_| rng.gen::<f64>()).collect();
                layers.insert(layer.name.clone(), scores);
            }
        }
    }
    Ok(ScoreMap { layers })
}

/// Fixed per-iteration fraction `r` of the remaining weights such that
/// `(1 - r)^iterations = 1 - target`.
pub fn per_iteration_fraction(target: f64, iterations: u32) -> Result<f64, PruneError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(PruneError::InvalidTarget(target));
    }
    if iterations < 1 {
        return Err(PruneError::InvalidIterations);
    }
    Ok(1.0 - (1.0 - target).powf(1.0 / f64::from(iterations)))
}

/// Deactivate the lowest-scoring fraction `r` of the currently active
/// positions, independently per prunable layer.
///
/// Exactly `floor(r * active_count)` positions are removed per layer; ties
/// break by ascending flat index. Returns a new mask.
pub fn prune_step(mask: &PruneMask, scores: &ScoreMap, r: f64) -> Result<PruneMask, PruneError> {
    if !(0.0..=1.0).contains(&r) {
        return Err(PruneError::InvalidFraction(r));
    }
    let mut layers = BTreeMap::new();
    for (name, bits) in &mask.layers {
        let layer_scores = scores
            .layer(name)
            .ok_or_else(|| PruneError::ShapeMismatch(format!("score map missing layer {name}")))?;
        if layer_scores.len() != bits.len() {
            return Err(PruneError::ShapeMismatch(format!(
                "layer {name}: {} scores vs {} mask bits",
                layer_scores.len(),
                bits.len()
            )));
        }
        let mut active: Vec<usize> = (0..bits.len()).filter(|&i| bits[i]).collect();
        let remove = (r * active.len() as f64).floor() as usize;
        // Ascending score, ties by ascending flat index.
        active.sort_by(|&a, &b| {
            layer_scores[a]
                .total_cmp(&layer_scores[b])
                .then_with(|| a.cmp(&b))
        });
        let mut new_bits = bits.clone();
        for &idx in active.iter().take(remove) {
            new_bits[idx] = false;
        }
        layers.insert(name.clone(), new_bits);
    }
    Ok(PruneMask {
        target: mask.target,
        layers,
    })
}

/// Reset every active position to its recorded initial value, force pruned
/// positions to exactly 0.0, and reset the optimizer state.
pub fn rewind_weights(
    params: &mut ParamSet,
    initial: &ParamSet,
    mask: &PruneMask,
    opt_state: &mut OptState,
) -> Result<(), PruneError> {
    if params.layers.len() != initial.layers.len() {
        return Err(PruneError::ShapeMismatch(format!(
            "{} layers vs {} in initial",
            params.layers.len(),
            initial.layers.len()
        )));
    }
    for (layer, init_layer) in params.layers.iter_mut().zip(&initial.layers) {
        if layer.name != init_layer.name || layer.tensor.len() != init_layer.tensor.len() {
            return Err(PruneError::ShapeMismatch(format!(
                "layer {} does not match initial layer {}",
                layer.name, init_layer.name
            )));
        }
        let data = layer.tensor.data_mut();
        data.copy_from_slice(init_layer.tensor.data());
        if let Some(bits) = mask.layer_bits(&layer.name) {
            for (x, &keep) in data.iter_mut().zip(bits) {
                if !keep {
                    *x = 0.0;
                }
            }
        }
    }
    opt_state.reset();
    Ok(())
}

/// Nominal (over prunable parameters) and effective (over all parameters)
/// pruned fractions, plus a per-layer table.
#[derive(Debug, Clone, Serialize)]
pub struct MaskStats {
    pub nominal_pruned_fraction: f64,
    pub effective_pruned_fraction: f64,
    pub per_layer: Vec<LayerMaskStats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerMaskStats {
    pub name: String,
    pub total: usize,
    pub active: usize,
    pub pruned: usize,
    pub pruned_fraction: f64,
}

pub fn mask_stats(mask: &PruneMask, params: &ParamSet) -> MaskStats {
    let mut per_layer = Vec::new();
    let mut pruned_total = 0usize;
    for layer in params.layers.iter().filter(|l| l.prunable) {
        let total = layer.tensor.len();
        let (active, pruned) = match mask.layer_bits(&layer.name) {
            Some(bits) => {
                let active = bits.iter().filter(|&&b| b).count();
                (active, total - active)
            }
            None => (total, 0),
        };
        pruned_total += pruned;
        per_layer.push(LayerMaskStats {
            name: layer.name.clone(),
            total,
            active,
            pruned,
            pruned_fraction: if total > 0 {
                pruned as f64 / total as f64
            } else {
                0.0
            },
        });
    }
    let prunable = params.prunable_params();
    let all = params.total_params();
    MaskStats {
        nominal_pruned_fraction: if prunable > 0 {
            pruned_total as f64 / prunable as f64
        } else {
            0.0
        },
        effective_pruned_fraction: if all > 0 {
            pruned_total as f64 / all as f64
        } else {
            0.0
        },
        per_layer,
    }
}

/// A mask transition during a pruned training run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneEvent {
    /// The prune step ran after this many completed epochs.
    pub after_epoch: u32,
    /// Total pruned positions across layers once the step applied.
    pub pruned_total: usize,
}

/// Everything a pruned training run leaves behind.
#[derive(Debug)]
pub struct PrunerRunResult {
    pub final_params: ParamSet,
    pub final_mask: PruneMask,
    pub total_epochs: u32,
    pub prune_events: Vec<PruneEvent>,
    pub checkpoint_paths: Vec<PathBuf>,
}

/// Data and hyperparameters shared by one training run.
pub struct RunContext<'a> {
    pub model_spec: &'a ModelSpec,
    pub train: &'a [EncodedExample],
    pub hyper: &'a Hyper,
    pub batch_size: usize,
    /// Epochs per training phase (N). At-init runs train N epochs; iterative
    /// runs train 4N.
    pub epochs_per_phase: u32,
    /// Directory receiving `checkpoint_epoch_<e>.bin` files.
    pub out_dir: &'a Path,
}

/// Execute one pruned training run.
///
/// At-init: checkpoint the shared initialization, score, prune to the full
/// target in one step, then train N epochs. Iterative: train N epochs, then
/// three times (score at current weights, remove the fixed fraction of the
/// remaining weights, fine-tune or rewind, train N more epochs) for 4N epochs
/// total, with prune events after epochs N, 2N, and 3N. Checkpoints are
/// written at every epoch end.
pub fn run_pruner(
    pruner: &PrunerSpec,
    seed: u64,
    ctx: &RunContext,
) -> Result<PrunerRunResult, PruneError> {
    // Revalidate: specs built by hand must obey the same rules.
    PrunerSpec::new(
        pruner.scoring,
        pruner.schedule,
        pruner.tuning,
        pruner.target,
    )?;

    let mut params = nn::init_params(ctx.model_spec, seed);
    let initial = params.clone();
    let mut opt = OptState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "shuffle"));
    let mut mask = PruneMask::all_active(&params, pruner.target);
    let mut events = Vec::new();
    let mut checkpoints = Vec::new();

    // Epoch 0: the untouched initialization, byte-shared with the unpruned run.
    checkpoints.push(train::write_epoch_checkpoint(
        ctx.out_dir,
        0,
        &params,
        &opt,
        None,
        &rng,
    )?);

    let mut scoring_round = 0u32;
    let mut do_prune = |params: &mut ParamSet,
                        mask: &PruneMask,
                        r: f64,
                        events: &mut Vec<PruneEvent>,
                        after_epoch: u32|
     -> Result<PruneMask, PruneError> {
        let sample = sample_training_examples(
            ctx.train,
            100,
            derive_seed(seed, &format!("impact-sample-{scoring_round}")),
        );
        let scores = score(
            params,
            pruner.scoring,
            &sample,
            derive_seed(seed, &format!("score-{scoring_round}")),
        )?;
        scoring_round += 1;
        let next = prune_step(mask, &scores, r)?;
        next.apply(params);
        events.push(PruneEvent {
            after_epoch,
            pruned_total: next.pruned_total(),
        });
        Ok(next)
    };

    let n = ctx.epochs_per_phase;
    let total_epochs = match pruner.schedule {
        Schedule::AtInit => {
            mask = do_prune(&mut params, &mask, pruner.target, &mut events, 0)?;
            train::train_epochs(
                &mut params,
                &mut opt,
                &mut rng,
                ctx.train,
                ctx.hyper,
                ctx.batch_size,
                Some(&mask),
                1..=n,
                |epoch, p, o, r| {
                    checkpoints.push(train::write_epoch_checkpoint(
                        ctx.out_dir,
                        epoch,
                        p,
                        o,
                        Some(&mask),
                        r,
                    )?);
                    Ok(())
                },
            )?;
            n
        }
        Schedule::Iterative => {
            let r = per_iteration_fraction(pruner.target, 3)?;
            for phase in 0..4u32 {
                if phase > 0 {
                    mask = do_prune(&mut params, &mask, r, &mut events, phase * n)?;
                    if pruner.tuning == Tuning::Rewind {
                        rewind_weights(&mut params, &initial, &mask, &mut opt)?;
                    }
                }
                let phase_mask = mask.clone();
                train::train_epochs(
                    &mut params,
                    &mut opt,
                    &mut rng,
                    ctx.train,
                    ctx.hyper,
                    ctx.batch_size,
                    Some(&phase_mask),
                    (phase * n + 1)..=((phase + 1) * n),
                    |epoch, p, o, rg| {
                        checkpoints.push(train::write_epoch_checkpoint(
                            ctx.out_dir,
                            epoch,
                            p,
                            o,
                            Some(&phase_mask),
                            rg,
                        )?);
                        Ok(())
                    },
                )?;
            }
            4 * n
        }
    };

    Ok(PrunerRunResult {
        final_params: params,
        final_mask: mask,
        total_epochs,
        prune_events: events,
        checkpoint_paths: checkpoints,
    })
}
