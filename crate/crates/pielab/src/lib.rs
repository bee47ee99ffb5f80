//! Desk-scale laboratory for studying how pruning changes the per-example
//! behavior of text classifiers.
//!
//! The pipeline trains several initializations of a small classifier, prunes
//! them with composable scoring x scheduling methods, detects the examples on
//! which pruned and unpruned majorities disagree (Pruning Identified
//! Exemplars, PIEs), and characterizes those examples through influence
//! scores and a text-readability battery.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`corpus`] — loading, tokenization, fixed-length encoding, synthetic data
//! - [`nn`] — deterministic tensors, two classifier families, gradients,
//!   masked SGD, bit-exact checkpoints
//! - [`prune`] — scoring functions, schedules, masks, weight rewinding
//! - [`harness`] — multi-initialization experiment runner and metrics
//! - [`pie`] — majority-vote disagreement detection and reports
//! - [`influence`] — per-example influence scores over training checkpoints
//! - [`readability`] — grade-level formulas, difficult words, length ratios
//! - [`cli`] — config parsing, subcommands, CSV/SVG report bundles
//!
//! The `examples/` directory contains one runnable program per capability;
//! the `pielab` binary exposes the same functionality as subcommands.

pub mod cli;
pub mod corpus;
pub mod harness;
pub mod influence;
pub mod nn;
pub mod pie;
pub mod plot;
pub mod prune;
pub mod readability;
mod rngutil;
mod train;
