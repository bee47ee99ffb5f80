//! Per-example influence scores computed from training-time checkpoints.
//!
//! The score of an example is the L2 distance between the model's predicted
//! class probabilities and the one-hot (or multi-hot) target, averaged over
//! the monitored end-of-epoch checkpoints of one initialization and then over
//! initializations. Monitoring starts at the first epoch past 30% of the
//! training budget (never before epoch 1). Examples are grouped into 20
//! percentile bins to relate influence to PIE occurrence.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::EncodedExample;
use crate::harness::{Condition, HarnessError};
use crate::nn::{self, NnError};
use crate::pie::PIEVerdict;
use crate::train;

#[derive(Debug, Error)]
pub enum InfluenceError {
    #[error("shape mismatch: probability vector has {p} entries, target has {y}")]
    ShapeMismatch { p: usize, y: usize },
    #[error("{n} examples cannot fill {bins} bins")]
    TooFewExamples { n: usize, bins: usize },
    #[error("missing checkpoint {0}")]
    MissingCheckpoint(PathBuf),
    #[error("verdicts do not cover the binned examples: {0}")]
    SplitMismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Harness(#[from] Box<HarnessError>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Euclidean distance between a probability vector and its target vector.
pub fn el2n(p: &[f64], y: &[f64]) -> Result<f64, InfluenceError> {
    if p.len() != y.len() {
        return Err(InfluenceError::ShapeMismatch {
            p: p.len(),
            y: y.len(),
        });
    }
    let sq: f64 = p
        .iter()
        .zip(y)
        .map(|(&pi, &yi)| {
            let d = pi - yi;
            d * d
        })
        .sum();
    Ok(sq.sqrt())
}

/// First monitored epoch (1-based): the smallest epoch strictly past 30% of
/// the total budget, never below 1. Computed in integer arithmetic.
pub fn monitor_start_epoch(total_epochs: u32) -> u32 {
    ((3 * total_epochs) / 10 + 1).max(1)
}

/// Per-example influence scores for one condition of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EL2NProfile {
    /// Train-split order.
    pub example_ids: Vec<u64>,
    pub scores: Vec<f64>,
    /// Inclusive monitored epoch range.
    pub monitored_epochs: (u32, u32),
    pub n_initializations: usize,
}

/// Compute the influence profile of `condition` from its persisted epoch
/// checkpoints, scoring the encoded train split.
///
/// Every checkpoint from the monitoring start through `epochs_total` must be
/// present for every initialization; a missing file is reported by name.
pub fn profile(
    run_dir: &Path,
    condition: &Condition,
    epochs_total: u32,
    n_inits: usize,
    train: &[EncodedExample],
) -> Result<EL2NProfile, InfluenceError> {
    let start = monitor_start_epoch(epochs_total);
    let epochs: Vec<u32> = (start..=epochs_total).collect();
    let mut totals = vec![0.0f64; train.len()];
    for k in 0..n_inits {
        let init_dir = run_dir.join(condition.dir_name()).join(format!("init_{k}"));
        let mut init_totals = vec![0.0f64; train.len()];
        for &epoch in &epochs {
            let path = train::checkpoint_path(&init_dir, epoch);
            if !path.is_file() {
                return Err(InfluenceError::MissingCheckpoint(path));
            }
            let ckpt = nn::load_checkpoint(&path)?;
            let probs = nn::predict(&ckpt.params, train)?;
            for (e, ex) in train.iter().enumerate() {
                let p: Vec<f64> = probs.row(e).iter().map(|&x| f64::from(x)).collect();
                let y: Vec<f64> = ex.label_vector.iter().map(|&x| f64::from(x)).collect();
                init_totals[e] += el2n(&p, &y)?;
            }
        }
        // Mean over monitored epochs within this initialization.
        for (t, v) in totals.iter_mut().zip(&init_totals) {
            *t += v / epochs.len() as f64;
        }
    }
    let scores: Vec<f64> = totals.into_iter().map(|t| t / n_inits as f64).collect();
    Ok(EL2NProfile {
        example_ids: train.iter().map(|e| e.id).collect(),
        scores,
        monitored_epochs: (start, epochs_total),
        n_initializations: n_inits,
    })
}

/// Percentile bins over a profile, ascending by score.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceBins {
    /// Example ids per bin, lowest-score bin first.
    pub bins: Vec<Vec<u64>>,
}

impl InfluenceBins {
    /// Bin index of every example id.
    pub fn bin_of(&self) -> BTreeMap<u64, usize> {
        let mut map = BTreeMap::new();
        for (i, bin) in self.bins.iter().enumerate() {
            for &id in bin {
                map.insert(id, i);
            }
        }
        map
    }
}

/// Sort ascending by score (ties by example id) and split into `k` contiguous
/// bins; the first `n mod k` bins hold one extra example.
pub fn bins(profile: &EL2NProfile, k: usize) -> Result<InfluenceBins, InfluenceError> {
    let n = profile.scores.len();
    if n < k || k == 0 {
        return Err(InfluenceError::TooFewExamples { n, bins: k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        profile.scores[a]
            .total_cmp(&profile.scores[b])
            .then_with(|| profile.example_ids[a].cmp(&profile.example_ids[b]))
    });
    let base = n / k;
    let extra = n % k;
    let mut bins = Vec::with_capacity(k);
    let mut cursor = 0usize;
    for b in 0..k {
        let size = base + usize::from(b < extra);
        let ids = order[cursor..cursor + size]
            .iter()
            .map(|&i| profile.example_ids[i])
            .collect();
        bins.push(ids);
        cursor += size;
    }
    Ok(InfluenceBins { bins })
}

/// Fraction of each bin's examples that are PIEs. The verdicts must cover
/// every binned example (i.e., they were computed on the same train split).
pub fn pie_fraction_per_bin(
    bins: &InfluenceBins,
    verdicts: &[PIEVerdict],
) -> Result<Vec<f64>, InfluenceError> {
    let is_pie: BTreeMap<u64, bool> = verdicts.iter().map(|v| (v.example_id, v.is_pie)).collect();
    bins.bins
        .iter()
        .map(|bin| {
            let mut pies = 0usize;
            for id in bin {
                match is_pie.get(id) {
                    Some(true) => pies += 1,
                    Some(false) => {}
                    None => {
                        return Err(InfluenceError::SplitMismatch(format!(
                            "no verdict for example {id}"
                        )))
                    }
                }
            }
            Ok(pies as f64 / bin.len().max(1) as f64)
        })
        .collect()
}

/// Write `influence.csv`: example_id, el2n, bin_index (train-split order).
pub fn write_influence_csv(
    path: &Path,
    profile: &EL2NProfile,
    bins: &InfluenceBins,
) -> Result<(), InfluenceError> {
    let bin_of = bins.bin_of();
    let mut out = Vec::new();
    writeln!(out, "example_id,el2n,bin_index")?;
    for (id, score) in profile.example_ids.iter().zip(&profile.scores) {
        writeln!(out, "{},{},{}", id, score, bin_of[id])?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write `influence_bins.csv`: bin_index, size, pie_fraction.
pub fn write_influence_bins_csv(
    path: &Path,
    bins: &InfluenceBins,
    fractions: &[f64],
) -> Result<(), InfluenceError> {
    let mut out = Vec::new();
    writeln!(out, "bin_index,size,pie_fraction")?;
    for (i, (bin, frac)) in bins.bins.iter().zip(fractions).enumerate() {
        writeln!(out, "{},{},{}", i, bin.len(), frac)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}
