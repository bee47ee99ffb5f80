//! Pruning Identified Exemplars: examples on which the majority prediction
//! of N pruned-model initializations differs from that of N unpruned-model
//! initializations.
//!
//! Single-label majorities are the mode of the N predicted classes, ties
//! resolved toward the smallest class index. Multi-label majorities are the
//! set of classes predicted positive by strictly more than N/2
//! initializations; any set difference, even on a single class, makes the
//! example a PIE.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{LabelKind, RawExample};
use crate::harness::{self, PredictionMatrix, POSITIVE_THRESHOLD};

#[derive(Debug, Error)]
pub enum PieError {
    #[error("majority vote over empty ballot")]
    EmptyVotes,
    #[error("vote count {count} exceeds the number of initializations {n}")]
    CountExceedsN { count: usize, n: usize },
    #[error("prediction matrices are not comparable: {0}")]
    Mismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The majority outcome for one example under one condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Majority {
    Class(usize),
    /// Ascending class indices; may be empty.
    Set(Vec<usize>),
}

impl fmt::Display for Majority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Majority::Class(c) => write!(f, "{c}"),
            Majority::Set(s) => {
                let joined: Vec<String> = s.iter().map(|c| c.to_string()).collect();
                write!(f, "{}", joined.join(";"))
            }
        }
    }
}

/// Per-example PIE decision with both majorities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PIEVerdict {
    pub example_id: u64,
    pub is_pie: bool,
    pub pruned_majority: Majority,
    pub unpruned_majority: Majority,
}

/// Most frequent class among the votes; ties go to the smallest class index.
pub fn majority_class(votes: &[usize]) -> Result<usize, PieError> {
    if votes.is_empty() {
        return Err(PieError::EmptyVotes);
    }
    let max_class = *votes.iter().max().unwrap();
    let mut counts = vec![0usize; max_class + 1];
    for &v in votes {
        counts[v] += 1;
    }
    let mut best = 0usize;
    for (c, &count) in counts.iter().enumerate() {
        // Strictly greater keeps the smallest index on ties.
        if count > counts[best] {
            best = c;
        }
    }
    Ok(best)
}

/// Classes predicted positive by strictly more than N/2 initializations.
pub fn majority_set(per_class_vote_counts: &[usize], n: usize) -> Result<Vec<usize>, PieError> {
    for &count in per_class_vote_counts {
        if count > n {
            return Err(PieError::CountExceedsN { count, n });
        }
    }
    Ok(per_class_vote_counts
        .iter()
        .enumerate()
        .filter(|&(_, &count)| 2 * count > n)
        .map(|(c, _)| c)
        .collect())
}

fn check_comparable(
    pruned: &PredictionMatrix,
    unpruned: &PredictionMatrix,
) -> Result<(), PieError> {
    if pruned.split != unpruned.split {
        return Err(PieError::Mismatch(format!(
            "split {} vs {}",
            pruned.split, unpruned.split
        )));
    }
    if pruned.n_inits() != unpruned.n_inits() {
        return Err(PieError::Mismatch(format!(
            "{} vs {} initializations",
            pruned.n_inits(),
            unpruned.n_inits()
        )));
    }
    if pruned.classes != unpruned.classes {
        return Err(PieError::Mismatch(format!(
            "{} vs {} classes",
            pruned.classes, unpruned.classes
        )));
    }
    if pruned.example_ids != unpruned.example_ids {
        return Err(PieError::Mismatch("example id sets differ".into()));
    }
    Ok(())
}

fn example_majority(matrix: &PredictionMatrix, example: usize, kind: LabelKind) -> Majority {
    let n = matrix.n_inits();
    match kind {
        LabelKind::Single => {
            let votes: Vec<usize> = (0..n).map(|k| matrix.hard_class(k, example)).collect();
            Majority::Class(majority_class(&votes).expect("n_inits >= 1"))
        }
        LabelKind::Multi => {
            let counts: Vec<usize> = (0..matrix.classes)
                .map(|c| {
                    (0..n)
                        .filter(|&k| matrix.prob(k, example, c) >= POSITIVE_THRESHOLD)
                        .count()
                })
                .collect();
            Majority::Set(majority_set(&counts, n).expect("counts bounded by n"))
        }
    }
}

/// Compare paired pruned/unpruned prediction matrices and flag every example
/// whose majorities differ.
pub fn detect_pies(
    pruned: &PredictionMatrix,
    unpruned: &PredictionMatrix,
    kind: LabelKind,
) -> Result<Vec<PIEVerdict>, PieError> {
    check_comparable(pruned, unpruned)?;
    if pruned.n_inits() == 0 {
        return Err(PieError::EmptyVotes);
    }
    Ok((0..pruned.n_examples())
        .map(|e| {
            let pm = example_majority(pruned, e, kind);
            let um = example_majority(unpruned, e, kind);
            PIEVerdict {
                example_id: pruned.example_ids[e],
                is_pie: pm != um,
                pruned_majority: pm,
                unpruned_majority: um,
            }
        })
        .collect())
}

/// Fraction of examples flagged as PIEs.
pub fn pie_fraction(verdicts: &[PIEVerdict]) -> f64 {
    if verdicts.is_empty() {
        return 0.0;
    }
    verdicts.iter().filter(|v| v.is_pie).count() as f64 / verdicts.len() as f64
}

/// Aligned class histograms of all examples and of PIEs, classes sorted by
/// descending train-split frequency (ties toward smaller index).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    /// Class indices in plot order.
    pub class_order: Vec<usize>,
    /// Fraction of all gold-label mass per class, aligned with `class_order`.
    pub all_fraction: Vec<f64>,
    /// Fraction of PIE gold-label mass per class, aligned with `class_order`.
    pub pie_fraction: Vec<f64>,
}

/// Build the class-frequency view of PIE occurrence. A multi-label example
/// contributes to every class it belongs to. Histograms are normalized to
/// fractions.
pub fn class_distribution(
    verdicts: &[PIEVerdict],
    examples: &[RawExample],
    train_class_counts: &[usize],
) -> ClassDistribution {
    let classes = train_class_counts.len();
    let pie_ids: HashSet<u64> = verdicts
        .iter()
        .filter(|v| v.is_pie)
        .map(|v| v.example_id)
        .collect();

    let mut all_hist = vec![0usize; classes];
    let mut pie_hist = vec![0usize; classes];
    for ex in examples {
        for &label in &ex.labels {
            all_hist[label] += 1;
            if pie_ids.contains(&ex.id) {
                pie_hist[label] += 1;
            }
        }
    }

    let mut class_order: Vec<usize> = (0..classes).collect();
    class_order.sort_by(|&a, &b| {
        train_class_counts[b]
            .cmp(&train_class_counts[a])
            .then_with(|| a.cmp(&b))
    });

    let normalize = |hist: &[usize]| -> Vec<f64> {
        let total: usize = hist.iter().sum();
        class_order
            .iter()
            .map(|&c| {
                if total == 0 {
                    0.0
                } else {
                    hist[c] as f64 / total as f64
                }
            })
            .collect()
    };
    ClassDistribution {
        all_fraction: normalize(&all_hist),
        pie_fraction: normalize(&pie_hist),
        class_order,
    }
}

/// Accuracy-style statistics over a restricted example set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetMetrics {
    /// Mean over initializations of the per-initialization score.
    pub per_init_mean: f64,
    /// Score of the majority-vote prediction.
    pub majority_vote: f64,
}

/// Compute subset statistics for one condition's matrix. Single-label uses
/// accuracy; multi-label uses macro-F1 at the harness threshold. Returns
/// `None` for an empty subset (the "no PIEs" marker) rather than dividing by
/// zero.
pub fn subset_accuracy(
    matrix: &PredictionMatrix,
    gold_sets: &[Vec<usize>],
    subset: &[usize],
    kind: LabelKind,
) -> Option<SubsetMetrics> {
    if subset.is_empty() {
        return None;
    }
    let n = matrix.n_inits();
    match kind {
        LabelKind::Single => {
            let gold: Vec<usize> = subset.iter().map(|&e| gold_sets[e][0]).collect();
            let mut acc_sum = 0.0f64;
            for k in 0..n {
                let correct = subset
                    .iter()
                    .zip(&gold)
                    .filter(|(&e, &g)| matrix.hard_class(k, e) == g)
                    .count();
                acc_sum += correct as f64 / subset.len() as f64;
            }
            let majority_correct = subset
                .iter()
                .zip(&gold)
                .filter(|(&e, &g)| {
                    let votes: Vec<usize> = (0..n).map(|k| matrix.hard_class(k, e)).collect();
                    majority_class(&votes).expect("n >= 1") == g
                })
                .count();
            Some(SubsetMetrics {
                per_init_mean: acc_sum / n as f64,
                majority_vote: majority_correct as f64 / subset.len() as f64,
            })
        }
        LabelKind::Multi => {
            let gold: Vec<Vec<usize>> = subset.iter().map(|&e| gold_sets[e].clone()).collect();
            let mut f1_sum = 0.0f64;
            for k in 0..n {
                let preds: Vec<Vec<usize>> = subset
                    .iter()
                    .map(|&e| {
                        (0..matrix.classes)
                            .filter(|&c| matrix.prob(k, e, c) >= POSITIVE_THRESHOLD)
                            .collect()
                    })
                    .collect();
                f1_sum += harness::macro_f1_sets(&preds, &gold, matrix.classes);
            }
            let majority_preds: Vec<Vec<usize>> = subset
                .iter()
                .map(|&e| match example_majority(matrix, e, kind) {
                    Majority::Set(s) => s,
                    Majority::Class(c) => vec![c],
                })
                .collect();
            Some(SubsetMetrics {
                per_init_mean: f1_sum / n as f64,
                majority_vote: harness::macro_f1_sets(&majority_preds, &gold, matrix.classes),
            })
        }
    }
}

/// Subset statistics for PIEs and for all examples, under both conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetAccuracySummary {
    pub pruned_on_all: Option<SubsetMetrics>,
    pub unpruned_on_all: Option<SubsetMetrics>,
    pub pruned_on_pies: Option<SubsetMetrics>,
    pub unpruned_on_pies: Option<SubsetMetrics>,
}

/// Per-example verdicts plus the aggregate statistics of one pruned condition
/// against the shared unpruned baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PIEReport {
    pub verdicts: Vec<PIEVerdict>,
    pub pie_fraction: f64,
    pub class_distribution: ClassDistribution,
    pub subset_accuracy: SubsetAccuracySummary,
}

/// Detect PIEs and assemble occurrence, class-distribution, and
/// subset-accuracy statistics for one condition pair.
pub fn build_report(
    pruned: &PredictionMatrix,
    unpruned: &PredictionMatrix,
    examples: &[RawExample],
    train_class_counts: &[usize],
    kind: LabelKind,
) -> Result<PIEReport, PieError> {
    let verdicts = detect_pies(pruned, unpruned, kind)?;
    if examples.len() != verdicts.len() {
        return Err(PieError::Mismatch(format!(
            "{} examples vs {} verdicts",
            examples.len(),
            verdicts.len()
        )));
    }
    let by_id: BTreeMap<u64, &RawExample> = examples.iter().map(|e| (e.id, e)).collect();
    for v in &verdicts {
        if !by_id.contains_key(&v.example_id) {
            return Err(PieError::Mismatch(format!(
                "verdict for unknown example id {}",
                v.example_id
            )));
        }
    }
    let gold_sets: Vec<Vec<usize>> = verdicts
        .iter()
        .map(|v| by_id[&v.example_id].labels.clone())
        .collect();

    let all: Vec<usize> = (0..verdicts.len()).collect();
    let pies: Vec<usize> = verdicts
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_pie)
        .map(|(i, _)| i)
        .collect();

    let subset_summary = SubsetAccuracySummary {
        pruned_on_all: subset_accuracy(pruned, &gold_sets, &all, kind),
        unpruned_on_all: subset_accuracy(unpruned, &gold_sets, &all, kind),
        pruned_on_pies: subset_accuracy(pruned, &gold_sets, &pies, kind),
        unpruned_on_pies: subset_accuracy(unpruned, &gold_sets, &pies, kind),
    };
    Ok(PIEReport {
        pie_fraction: pie_fraction(&verdicts),
        class_distribution: class_distribution(&verdicts, examples, train_class_counts),
        subset_accuracy: subset_summary,
        verdicts,
    })
}

/// Write `pies.csv`: example_id, is_pie, pruned_majority, unpruned_majority.
/// Multi-label majorities serialize as sorted semicolon-joined class indices.
pub fn write_pies_csv(path: &Path, verdicts: &[PIEVerdict]) -> Result<(), PieError> {
    let mut out = Vec::new();
    writeln!(out, "example_id,is_pie,pruned_majority,unpruned_majority")?;
    for v in verdicts {
        writeln!(
            out,
            "{},{},{},{}",
            v.example_id, v.is_pie, v.pruned_majority, v.unpruned_majority
        )?;
    }
    std::fs::write(path, out)?;
    Ok(())
}
