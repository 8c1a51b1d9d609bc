//! Estimation and statistical comparison of predictive workflows.
//!
//! The crate provides the building blocks for resampling-based performance
//! estimation experiments on classification, regression and time-series
//! tasks:
//!
//! * [`frame`] — columnar data sets, CSV ingestion and predictive-task
//!   definitions;
//! * [`resampling`] — seeded train/test split plans (cross validation,
//!   holdout, bootstrap, leave-one-out, Monte Carlo windows);
//! * [`workflow`] — the learn-then-predict contract, the generic standard
//!   and time-series workflows, built-in learners and cartesian variant
//!   expansion;
//! * [`prepost`] — data pre-processing and prediction post-processing steps;
//! * [`metrics`] — performance metrics and the user-defined evaluator
//!   contract;
//! * [`engine`] — experiment orchestration with failure capture and
//!   deterministic parallelism;
//! * [`analysis`] — summaries, rankings, subsetting and merging of results;
//! * [`stats`] — rank-based significance tests (Friedman, Nemenyi,
//!   Bonferroni-Dunn, Wilcoxon signed rank, paired t) and critical-difference
//!   diagrams;
//! * [`config`] — the declarative JSON experiment configuration used by the
//!   `perfest` command-line tool.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod frame;
pub mod metrics;
pub mod plot;
pub mod prepost;
pub mod resampling;
pub mod rng;
pub mod stats;
pub mod workflow;

/// Version string recorded in result-file provenance.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Schema version of the results file format.
pub const RESULTS_FORMAT_VERSION: u32 = 1;
