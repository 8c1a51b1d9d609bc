//! Seeded train/test split plans.
//!
//! Each estimation methodology turns a row count (plus optional
//! stratification labels) into a [`SplitPlan`]: an ordered list of
//! (train indices, test indices) pairs. Plans are produced from a seed
//! through the portable streams in [`crate::rng`], so two calls with the
//! same inputs yield bit-identical plans on any platform. User-supplied
//! plans bypass generation and are validated against the same invariants.

use rand::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Column;
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("{0}")]
    InvalidSetting(String),
    #[error("need at least {need} rows, have {have}")]
    TooFewRows { need: usize, have: usize },
    #[error("stratified classification splits require labels")]
    MissingLabels,
    #[error("only {available} admissible Monte Carlo anchors for {requested} repetitions")]
    TooFewAnchors { available: usize, requested: usize },
    #[error("bootstrap resampling produced an empty out-of-bag set {0} times in a row")]
    EmptyOutOfBag(usize),
    #[error("invalid split plan: {0}")]
    InvalidPlan(String),
}

/// One train/test pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIteration {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// An ordered list of split iterations plus the seed and a descriptor of
/// the method that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub iterations: Vec<SplitIteration>,
    pub seed: u64,
    pub method_descriptor: String,
}

impl SplitPlan {
    /// Validates indices against the row count and the per-method
    /// structural invariants (disjointness, out-of-bag test sets,
    /// time ordering). `bootstrap` relaxes the no-duplicate rule for
    /// train indices and instead demands test = complement of train.
    pub fn validate(&self, n: usize, bootstrap: bool) -> Result<(), SplitError> {
        for (i, it) in self.iterations.iter().enumerate() {
            for &idx in it.train.iter().chain(it.test.iter()) {
                if idx >= n {
                    return Err(SplitError::InvalidPlan(format!(
                        "iteration {}: index {idx} out of range for {n} rows",
                        i + 1
                    )));
                }
            }
            let mut in_train = vec![false; n];
            let mut dup = false;
            for &t in &it.train {
                if in_train[t] {
                    dup = true;
                }
                in_train[t] = true;
            }
            if bootstrap {
                let oob: Vec<usize> = (0..n).filter(|&r| !in_train[r]).collect();
                if it.test != oob {
                    return Err(SplitError::InvalidPlan(format!(
                        "iteration {}: test set is not the out-of-bag complement",
                        i + 1
                    )));
                }
            } else {
                if dup {
                    return Err(SplitError::InvalidPlan(format!(
                        "iteration {}: duplicate train index",
                        i + 1
                    )));
                }
                if it.test.iter().any(|&t| in_train[t]) {
                    return Err(SplitError::InvalidPlan(format!(
                        "iteration {}: train and test overlap",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SplitError> {
        serde_json::from_str(text).map_err(|e| SplitError::InvalidPlan(e.to_string()))
    }

    /// Stable fingerprint over the index lists, used to compare plans
    /// across result files without shipping the full plan.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |x: u64| {
            h ^= x;
            h = h.wrapping_mul(0x100_0000_01b3);
        };
        mix(self.seed);
        for it in &self.iterations {
            mix(0xdead_beef);
            for &i in &it.train {
                mix(i as u64);
            }
            mix(0xfeed_face);
            for &i in &it.test {
                mix(i as u64);
            }
        }
        h
    }
}

fn default_one() -> usize {
    1
}
fn default_ten() -> usize {
    10
}
fn default_seed() -> u64 {
    1234
}
fn default_hld_sz() -> f64 {
    0.3
}
fn default_bootstrap_kind() -> BootstrapKind {
    BootstrapKind::E0
}
fn default_bootstrap_reps() -> usize {
    200
}
fn default_quarter() -> WindowSize {
    WindowSize::Fraction(0.25)
}

/// Cross-validation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvSettings {
    #[serde(rename = "nReps", default = "default_one")]
    pub n_reps: usize,
    #[serde(rename = "nFolds", default = "default_ten")]
    pub n_folds: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub strat: bool,
    #[serde(
        rename = "dataSplits",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub data_splits: Option<SplitPlan>,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            n_reps: 1,
            n_folds: 10,
            seed: 1234,
            strat: false,
            data_splits: None,
        }
    }
}

/// Holdout / random sub-sampling settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoldoutSettings {
    #[serde(rename = "nReps", default = "default_one")]
    pub n_reps: usize,
    /// Fraction of rows to leave out as the test set.
    #[serde(rename = "hldSz", default = "default_hld_sz")]
    pub hld_sz: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub strat: bool,
    #[serde(
        rename = "dataSplits",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub data_splits: Option<SplitPlan>,
}

impl Default for HoldoutSettings {
    fn default() -> Self {
        HoldoutSettings {
            n_reps: 1,
            hld_sz: 0.3,
            seed: 1234,
            strat: false,
            data_splits: None,
        }
    }
}

/// Bootstrap flavour: score on out-of-bag rows only, or blend with the
/// resubstitution score using the .632 weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootstrapKind {
    #[serde(rename = "e0")]
    E0,
    #[serde(rename = ".632")]
    Dot632,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSettings {
    #[serde(rename = "type", default = "default_bootstrap_kind")]
    pub kind: BootstrapKind,
    #[serde(rename = "nReps", default = "default_bootstrap_reps")]
    pub n_reps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(
        rename = "dataSplits",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub data_splits: Option<SplitPlan>,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        BootstrapSettings {
            kind: BootstrapKind::E0,
            n_reps: 200,
            seed: 1234,
            data_splits: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoocvSettings {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(
        rename = "dataSplits",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub data_splits: Option<SplitPlan>,
}

impl Default for LoocvSettings {
    fn default() -> Self {
        LoocvSettings {
            seed: 1234,
            data_splits: None,
        }
    }
}

/// A window size given either as a fraction of the data or as a row count.
/// In JSON, integer literals are counts and decimals in (0,1) fractions,
/// so `Count` must be tried first by the untagged deserializer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindowSize {
    Count(usize),
    Fraction(f64),
}

impl WindowSize {
    /// Fractions resolve as `floor(frac * n)`.
    pub fn resolve(&self, n: usize) -> Result<usize, SplitError> {
        match *self {
            WindowSize::Fraction(f) => {
                if !(0.0 < f && f < 1.0) {
                    return Err(SplitError::InvalidSetting(format!(
                        "window fraction {f} outside (0,1)"
                    )));
                }
                Ok((f * n as f64).floor() as usize)
            }
            WindowSize::Count(c) => Ok(c),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloSettings {
    #[serde(rename = "nReps", default = "default_ten")]
    pub n_reps: usize,
    #[serde(rename = "szTrain", default = "default_quarter")]
    pub sz_train: WindowSize,
    #[serde(rename = "szTest", default = "default_quarter")]
    pub sz_test: WindowSize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(
        rename = "dataSplits",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub data_splits: Option<SplitPlan>,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        MonteCarloSettings {
            n_reps: 10,
            sz_train: WindowSize::Fraction(0.25),
            sz_test: WindowSize::Fraction(0.25),
            seed: 1234,
            data_splits: None,
        }
    }
}

/// Per-row stratification labels (class codes or target bins).
pub type StratLabels = Vec<u32>;

/// Derives stratification labels from a target column. Categorical targets
/// stratify on class; numeric targets are binned into `min(n_folds, 10)`
/// equal-frequency bins.
pub fn strat_labels_for_target(target: &Column, n_folds: usize) -> Option<StratLabels> {
    match &target.data {
        crate::frame::ColumnData::Categorical { codes, .. } => {
            Some(codes.iter().map(|c| c.unwrap_or(0)).collect())
        }
        crate::frame::ColumnData::Numeric(values) => {
            let n = values.len();
            if n == 0 {
                return None;
            }
            let n_bins = n_folds.clamp(1, 10);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                values[a]
                    .unwrap_or(f64::NEG_INFINITY)
                    .partial_cmp(&values[b].unwrap_or(f64::NEG_INFINITY))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut labels = vec![0u32; n];
            for (rank, &row) in order.iter().enumerate() {
                labels[row] = ((rank * n_bins) / n) as u32;
            }
            Some(labels)
        }
    }
}

fn validated_user_plan(
    plan: &SplitPlan,
    n: usize,
    bootstrap: bool,
) -> Result<SplitPlan, SplitError> {
    plan.validate(n, bootstrap)?;
    Ok(plan.clone())
}

/// Deals `indices` (already shuffled) round-robin across `n_folds` folds,
/// starting at `cursor`. Returns the updated cursor.
fn deal_round_robin(
    indices: &[usize],
    folds: &mut [Vec<usize>],
    mut cursor: usize,
) -> usize {
    for &idx in indices {
        folds[cursor % folds.len()].push(idx);
        cursor += 1;
    }
    cursor
}

/// k-fold cross-validation splits.
///
/// Within one repetition the test folds partition `0..n` and fold sizes
/// differ by at most one. Stratification shuffles each label group with the
/// repetition's stream and deals the groups round-robin across folds,
/// carrying the fold cursor across groups so global fold sizes stay
/// balanced too.
pub fn cv_splits(
    n: usize,
    labels: Option<&StratLabels>,
    cfg: &CvSettings,
) -> Result<SplitPlan, SplitError> {
    if cfg.n_folds < 2 || cfg.n_reps < 1 {
        return Err(SplitError::InvalidSetting(format!(
            "need nFolds >= 2 and nReps >= 1, got {} and {}",
            cfg.n_folds, cfg.n_reps
        )));
    }
    let descriptor = format!("{} x {} - Fold Cross Validation", cfg.n_reps, cfg.n_folds);
    if let Some(plan) = &cfg.data_splits {
        return validated_user_plan(plan, n, false);
    }
    if n < cfg.n_folds {
        return Err(SplitError::TooFewRows {
            need: cfg.n_folds,
            have: n,
        });
    }
    if cfg.strat && labels.is_none() {
        return Err(SplitError::MissingLabels);
    }
    let mut iterations = Vec::with_capacity(cfg.n_reps * cfg.n_folds);
    for rep in 0..cfg.n_reps {
        let mut rng = stream_rng(cfg.seed, &[rep as u64]);
        let mut folds: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_folds];
        if cfg.strat {
            let labels = labels.unwrap();
            let mut groups: Vec<u32> = labels.to_vec();
            groups.sort_unstable();
            groups.dedup();
            let mut cursor = 0usize;
            for g in groups {
                let mut members: Vec<usize> =
                    (0..n).filter(|&i| labels[i] == g).collect();
                members.shuffle(&mut rng);
                cursor = deal_round_robin(&members, &mut folds, cursor);
            }
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            deal_round_robin(&order, &mut folds, 0);
        }
        for fold in &mut folds {
            fold.sort_unstable();
        }
        for f in 0..cfg.n_folds {
            let test = folds[f].clone();
            let mut train: Vec<usize> = Vec::with_capacity(n - test.len());
            for (g, fold) in folds.iter().enumerate() {
                if g != f {
                    train.extend_from_slice(fold);
                }
            }
            train.sort_unstable();
            iterations.push(SplitIteration { train, test });
        }
    }
    Ok(SplitPlan {
        iterations,
        seed: cfg.seed,
        method_descriptor: descriptor,
    })
}

/// Allocates a test-set size of `round(n * frac)` across label groups by
/// largest remainder, preserving class proportions within rounding.
fn proportional_allocation(counts: &[usize], total_test: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let mut alloc: Vec<usize> = Vec::with_capacity(counts.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(counts.len());
    let mut assigned = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        let exact = c as f64 * total_test as f64 / n as f64;
        let base = exact.floor() as usize;
        alloc.push(base.min(c));
        assigned += alloc[i];
        remainders.push((i, exact - base as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut k = 0;
    while assigned < total_test && k < remainders.len() {
        let i = remainders[k].0;
        if alloc[i] < counts[i] {
            alloc[i] += 1;
            assigned += 1;
        }
        k += 1;
        if k == remainders.len() && assigned < total_test {
            k = 0; // keep topping up groups with spare capacity
            if remainders.iter().all(|&(i, _)| alloc[i] == counts[i]) {
                break;
            }
        }
    }
    alloc
}

/// Holdout / random sub-sampling splits.
pub fn holdout_splits(
    n: usize,
    labels: Option<&StratLabels>,
    cfg: &HoldoutSettings,
) -> Result<SplitPlan, SplitError> {
    if !(0.0 < cfg.hld_sz && cfg.hld_sz < 1.0) {
        return Err(SplitError::InvalidSetting(format!(
            "hldSz {} outside (0,1)",
            cfg.hld_sz
        )));
    }
    if cfg.n_reps < 1 {
        return Err(SplitError::InvalidSetting("nReps must be >= 1".into()));
    }
    let descriptor = format!("{} x Holdout ({:.0}%)", cfg.n_reps, cfg.hld_sz * 100.0);
    if let Some(plan) = &cfg.data_splits {
        return validated_user_plan(plan, n, false);
    }
    if n < 2 || (n as f64 * cfg.hld_sz).floor() < 1.0 {
        return Err(SplitError::TooFewRows { need: 2, have: n });
    }
    if cfg.strat && labels.is_none() {
        return Err(SplitError::MissingLabels);
    }
    let test_size = (n as f64 * cfg.hld_sz).round() as usize;
    let mut iterations = Vec::with_capacity(cfg.n_reps);
    for rep in 0..cfg.n_reps {
        let mut rng = stream_rng(cfg.seed, &[rep as u64]);
        let mut test: Vec<usize> = Vec::with_capacity(test_size);
        if cfg.strat {
            let labels = labels.unwrap();
            let mut groups: Vec<u32> = labels.to_vec();
            groups.sort_unstable();
            groups.dedup();
            let counts: Vec<usize> = groups
                .iter()
                .map(|&g| labels.iter().filter(|&&l| l == g).count())
                .collect();
            let alloc = proportional_allocation(&counts, test_size);
            for (gi, &g) in groups.iter().enumerate() {
                let mut members: Vec<usize> =
                    (0..n).filter(|&i| labels[i] == g).collect();
                members.shuffle(&mut rng);
                test.extend_from_slice(&members[..alloc[gi]]);
            }
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            test.extend_from_slice(&order[..test_size]);
        }
        test.sort_unstable();
        let mut in_test = vec![false; n];
        for &t in &test {
            in_test[t] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        iterations.push(SplitIteration { train, test });
    }
    Ok(SplitPlan {
        iterations,
        seed: cfg.seed,
        method_descriptor: descriptor,
    })
}

/// Bootstrap splits: each repetition draws `n` rows with replacement as the
/// training multiset; the test set is the out-of-bag rows in ascending
/// order. Repetitions with an empty out-of-bag set are redrawn (bounded).
pub fn bootstrap_splits(n: usize, cfg: &BootstrapSettings) -> Result<SplitPlan, SplitError> {
    const MAX_REDRAWS: usize = 100;
    if cfg.n_reps < 1 {
        return Err(SplitError::InvalidSetting("nReps must be >= 1".into()));
    }
    let kind = match cfg.kind {
        BootstrapKind::E0 => "e0",
        BootstrapKind::Dot632 => ".632",
    };
    let descriptor = format!("{} x {} Bootstrap", cfg.n_reps, kind);
    if let Some(plan) = &cfg.data_splits {
        return validated_user_plan(plan, n, true);
    }
    if n < 2 {
        return Err(SplitError::TooFewRows { need: 2, have: n });
    }
    let mut iterations = Vec::with_capacity(cfg.n_reps);
    for rep in 0..cfg.n_reps {
        let mut rng = stream_rng(cfg.seed, &[rep as u64]);
        let mut attempt = 0;
        loop {
            let train: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut in_train = vec![false; n];
            for &t in &train {
                in_train[t] = true;
            }
            let test: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
            if !test.is_empty() {
                iterations.push(SplitIteration { train, test });
                break;
            }
            attempt += 1;
            if attempt >= MAX_REDRAWS {
                return Err(SplitError::EmptyOutOfBag(MAX_REDRAWS));
            }
        }
    }
    Ok(SplitPlan {
        iterations,
        seed: cfg.seed,
        method_descriptor: descriptor,
    })
}

/// Leave-one-out splits: iteration `i` tests on row `i` alone.
pub fn loocv_splits(n: usize, cfg: &LoocvSettings) -> Result<SplitPlan, SplitError> {
    let descriptor = "Leave One Out Cross Validation".to_string();
    if let Some(plan) = &cfg.data_splits {
        return validated_user_plan(plan, n, false);
    }
    if n < 2 {
        return Err(SplitError::TooFewRows { need: 2, have: n });
    }
    let iterations = (0..n)
        .map(|i| SplitIteration {
            train: (0..n).filter(|&j| j != i).collect(),
            test: vec![i],
        })
        .collect();
    Ok(SplitPlan {
        iterations,
        seed: cfg.seed,
        method_descriptor: descriptor,
    })
}

/// Monte Carlo splits for time-ordered data.
///
/// Anchors are drawn without replacement from the admissible positions
/// `w_train ..= n - w_test` and sorted; each iteration trains on the
/// `w_train` rows immediately before its anchor and tests on the `w_test`
/// rows from the anchor on, so every train index precedes every test index.
pub fn monte_carlo_splits(n: usize, cfg: &MonteCarloSettings) -> Result<SplitPlan, SplitError> {
    if cfg.n_reps < 1 {
        return Err(SplitError::InvalidSetting("nReps must be >= 1".into()));
    }
    let w_train = cfg.sz_train.resolve(n)?;
    let w_test = cfg.sz_test.resolve(n)?;
    let descriptor = format!(
        "{} x Monte Carlo (train={}, test={})",
        cfg.n_reps, w_train, w_test
    );
    if let Some(plan) = &cfg.data_splits {
        let plan = validated_user_plan(plan, n, false)?;
        for (i, it) in plan.iterations.iter().enumerate() {
            let max_train = it.train.iter().max().copied();
            let min_test = it.test.iter().min().copied();
            if let (Some(a), Some(b)) = (max_train, min_test) {
                if a >= b {
                    return Err(SplitError::InvalidPlan(format!(
                        "iteration {}: train indices must precede test indices",
                        i + 1
                    )));
                }
            }
        }
        return Ok(plan);
    }
    if w_train == 0 || w_test == 0 {
        return Err(SplitError::InvalidSetting(
            "train and test windows must be nonempty".into(),
        ));
    }
    if w_train + w_test >= n {
        return Err(SplitError::InvalidSetting(format!(
            "train window {w_train} + test window {w_test} must be < {n} rows"
        )));
    }
    // Admissible anchors: full train window before, full test window after.
    let anchors_lo = w_train;
    let anchors_hi = n - w_test; // inclusive
    let available = anchors_hi - anchors_lo + 1;
    if available < cfg.n_reps {
        return Err(SplitError::TooFewAnchors {
            available,
            requested: cfg.n_reps,
        });
    }
    let mut rng = stream_rng(cfg.seed, &[0]);
    let mut candidates: Vec<usize> = (anchors_lo..=anchors_hi).collect();
    candidates.shuffle(&mut rng);
    let mut anchors: Vec<usize> = candidates[..cfg.n_reps].to_vec();
    anchors.sort_unstable();
    let iterations = anchors
        .into_iter()
        .map(|r| SplitIteration {
            train: (r - w_train..r).collect(),
            test: (r..r + w_test).collect(),
        })
        .collect();
    Ok(SplitPlan {
        iterations,
        seed: cfg.seed,
        method_descriptor: descriptor,
    })
}
