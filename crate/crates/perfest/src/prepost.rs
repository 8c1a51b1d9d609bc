//! Data pre-processing and prediction post-processing steps.
//!
//! Pre steps transform a (train, test) pair before the learner sees it;
//! every statistic they need (means, medians, modes) is computed from the
//! training rows only and applied to both frames. Post steps transform the
//! prediction vector after the learner produced it. Both kinds compose
//! into ordered chains inside the generic workflows.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Column, ColumnData, DataFrame, FrameError, TaskKind};
use crate::workflow::Predictions;

#[derive(Debug, Error)]
pub enum PrepostError {
    #[error("step `{step}` is only valid for classification tasks")]
    ClassificationOnly { step: &'static str },
    #[error("predictor `{0}` has no present values in the training set")]
    AllMissing(String),
    #[error("na.omit removed every training row")]
    EmptyTrain,
    #[error("smote: minority class `{0}` has no neighbours (size 1)")]
    NoNeighbours(String),
    #[error("smote requires at least two classes")]
    SingleClass,
    #[error("smote: predictor `{0}` has missing values; impute first")]
    SmoteMissing(String),
    #[error("step `{step}` expects {expected} predictions")]
    WrongShape {
        step: &'static str,
        expected: &'static str,
    },
    #[error("cast2int requires infLim <= supLim, got {0} > {1}")]
    BadInterval(f64, f64),
    #[error("cost-benefit matrix: {0}")]
    BadCostBenefit(String),
    #[error("unknown pre-processing step `{0}`")]
    UnknownPre(String),
    #[error("unknown post-processing step `{0}`")]
    UnknownPost(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// A pre-processing step with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PreStep {
    Scale,
    CentralImp,
    NaOmit,
    /// Downsamples non-minority classes to `perc_under` times the minority
    /// count (ratio scale, 1 = balanced).
    Undersample { perc_under: f64 },
    /// SMOTE oversampling; `perc_over`/`perc_under` are percent scaled
    /// (200 means two synthetic cases per original minority case).
    Smote {
        perc_over: f64,
        perc_under: f64,
        k: usize,
    },
}

/// A post-processing step with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PostStep {
    Na2Central,
    OnlyPos,
    Cast2Int { inf_lim: f64, sup_lim: f64 },
    MaxUtil { cb_matrix: CostBenefitMatrix },
}

/// Square utility matrix: `entries[i][j]` is the utility of predicting
/// class `j` when the truth is class `i`. Diagonal entries are benefits
/// (non-negative), off-diagonal entries costs (non-positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBenefitMatrix {
    pub class_order: Vec<String>,
    pub entries: Vec<Vec<f64>>,
}

impl CostBenefitMatrix {
    pub fn new(class_order: Vec<String>, entries: Vec<Vec<f64>>) -> Result<Self, PrepostError> {
        let k = class_order.len();
        if entries.len() != k || entries.iter().any(|r| r.len() != k) {
            return Err(PrepostError::BadCostBenefit(format!(
                "expected a {k}x{k} matrix"
            )));
        }
        for (i, row) in entries.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i == j && v < 0.0 {
                    return Err(PrepostError::BadCostBenefit(format!(
                        "diagonal entry [{i}][{j}] must be >= 0"
                    )));
                }
                if i != j && v > 0.0 {
                    return Err(PrepostError::BadCostBenefit(format!(
                        "off-diagonal entry [{i}][{j}] must be <= 0"
                    )));
                }
            }
        }
        Ok(CostBenefitMatrix {
            class_order,
            entries,
        })
    }
}

fn numeric_values(col: &Column) -> Vec<f64> {
    match &col.data {
        ColumnData::Numeric(v) => v.iter().flatten().copied().collect(),
        _ => Vec::new(),
    }
}

/// Median with linear interpolation between the middle order statistics.
pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Mode of the present labels; ties resolve to the lexicographically
/// smallest label.
pub(crate) fn mode_label(col: &Column) -> Option<String> {
    let categories = col.categories();
    if categories.is_empty() {
        return None;
    }
    let mut counts = vec![0usize; categories.len()];
    if let ColumnData::Categorical { codes, .. } = &col.data {
        for c in codes.iter().flatten() {
            counts[*c as usize] += 1;
        }
    }
    // Categories are sorted, so the first maximum is the smallest label.
    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    if counts[best] == 0 {
        return None;
    }
    Some(categories[best].clone())
}

/// Scales every numeric predictor to zero train-mean and unit train
/// standard deviation (sample convention); constant columns are centered
/// only. The target column is untouched.
pub fn pre_scale(
    train: &DataFrame,
    test: &DataFrame,
    target: &str,
) -> Result<(DataFrame, DataFrame), PrepostError> {
    let mut train_repl = Vec::new();
    let mut test_repl = Vec::new();
    for col in train.columns() {
        if col.name == target || !col.is_numeric() {
            continue;
        }
        let values = numeric_values(col);
        if values.is_empty() {
            continue;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let transform =
            |v: Option<f64>| v.map(|x| if sd > 0.0 { (x - mean) / sd } else { x - mean });
        if let ColumnData::Numeric(v) = &col.data {
            train_repl.push(Column {
                name: col.name.clone(),
                data: ColumnData::Numeric(v.iter().map(|&x| transform(x)).collect()),
            });
        }
        if let ColumnData::Numeric(v) = &test.column(&col.name)?.data {
            test_repl.push(Column {
                name: col.name.clone(),
                data: ColumnData::Numeric(v.iter().map(|&x| transform(x)).collect()),
            });
        }
    }
    Ok((
        train.with_columns_replaced(train_repl)?,
        test.with_columns_replaced(test_repl)?,
    ))
}

/// Fills missing predictor cells with the train median (numeric) or train
/// mode (categorical). Errors when a predictor is entirely missing in the
/// training rows.
pub fn pre_central_imp(
    train: &DataFrame,
    test: &DataFrame,
    target: &str,
) -> Result<(DataFrame, DataFrame), PrepostError> {
    let mut train_repl = Vec::new();
    let mut test_repl = Vec::new();
    for col in train.columns() {
        if col.name == target {
            continue;
        }
        let test_col = test.column(&col.name)?;
        if col.missing_count() == 0 && test_col.missing_count() == 0 {
            continue;
        }
        match &col.data {
            ColumnData::Numeric(train_vals) => {
                let med = median(&numeric_values(col))
                    .ok_or_else(|| PrepostError::AllMissing(col.name.clone()))?;
                let fill = |v: &Vec<Option<f64>>| {
                    ColumnData::Numeric(v.iter().map(|x| Some(x.unwrap_or(med))).collect())
                };
                train_repl.push(Column {
                    name: col.name.clone(),
                    data: fill(train_vals),
                });
                if let ColumnData::Numeric(test_vals) = &test_col.data {
                    test_repl.push(Column {
                        name: col.name.clone(),
                        data: fill(test_vals),
                    });
                }
            }
            ColumnData::Categorical { .. } => {
                let mode =
                    mode_label(col).ok_or_else(|| PrepostError::AllMissing(col.name.clone()))?;
                let fill = |c: &Column| {
                    let labels: Vec<Option<&str>> = (0..c.len())
                        .map(|i| Some(c.label_at(i).unwrap_or(mode.as_str())))
                        .collect();
                    Column::categorical(c.name.clone(), labels)
                };
                train_repl.push(fill(col));
                test_repl.push(fill(test_col));
            }
        }
    }
    Ok((
        train.with_columns_replaced(train_repl)?,
        test.with_columns_replaced(test_repl)?,
    ))
}

fn rows_without_missing(frame: &DataFrame) -> Vec<usize> {
    (0..frame.n_rows())
        .filter(|&r| frame.columns().iter().all(|c| !c.is_missing(r)))
        .collect()
}

/// Removes rows containing any missing cell from both frames. Returns the
/// transformed frames plus the surviving test-row positions so trues and
/// predictions stay aligned.
pub fn pre_na_omit(
    train: &DataFrame,
    test: &DataFrame,
) -> Result<(DataFrame, DataFrame, Vec<usize>), PrepostError> {
    let train_keep = rows_without_missing(train);
    if train_keep.is_empty() {
        return Err(PrepostError::EmptyTrain);
    }
    let test_keep = rows_without_missing(test);
    Ok((
        train.select_rows(&train_keep)?,
        test.select_rows(&test_keep)?,
        test_keep,
    ))
}

fn class_partition(target: &Column) -> Vec<(String, Vec<usize>)> {
    let categories = target.categories();
    let mut groups: Vec<(String, Vec<usize>)> =
        categories.iter().map(|c| (c.clone(), Vec::new())).collect();
    if let ColumnData::Categorical { codes, .. } = &target.data {
        for (row, code) in codes.iter().enumerate() {
            if let Some(c) = code {
                groups[*c as usize].1.push(row);
            }
        }
    }
    groups.retain(|(_, rows)| !rows.is_empty());
    groups
}

/// Least frequent class; ties resolve to the lexicographically smallest
/// label (the partition is already in category order).
fn minority_class(groups: &[(String, Vec<usize>)]) -> usize {
    let mut best = 0;
    for (i, g) in groups.iter().enumerate() {
        if g.1.len() < groups[best].1.len() {
            best = i;
        }
    }
    best
}

/// Undersamples every non-minority class to `round(perc_under * minority
/// count)` rows, keeping the minority class whole. Classification only.
pub fn pre_undersample(
    train: &DataFrame,
    target: &str,
    perc_under: f64,
    task_kind: TaskKind,
    rng: &mut ChaCha8Rng,
) -> Result<DataFrame, PrepostError> {
    if task_kind != TaskKind::Classification {
        return Err(PrepostError::ClassificationOnly { step: "undersampl" });
    }
    let target_col = train.column(target)?;
    let groups = class_partition(target_col);
    if groups.len() < 2 {
        return Ok(train.clone());
    }
    let minority = minority_class(&groups);
    let quota = (perc_under * groups[minority].1.len() as f64).round() as usize;
    let mut keep: Vec<usize> = Vec::new();
    for (i, (_, rows)) in groups.iter().enumerate() {
        if i == minority || rows.len() <= quota {
            keep.extend_from_slice(rows);
        } else {
            let mut rows = rows.clone();
            rows.shuffle(rng);
            keep.extend_from_slice(&rows[..quota]);
        }
    }
    keep.sort_unstable();
    Ok(train.select_rows(&keep)?)
}

/// SMOTE parameters on the percent scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmotePars {
    /// Synthetic cases per minority case, as a percentage (200 = two each).
    pub perc_over: f64,
    /// Majority sample size as a percentage of the synthetic count.
    pub perc_under: f64,
    /// Neighbourhood size for the interpolation.
    pub k: usize,
}

impl Default for SmotePars {
    fn default() -> Self {
        SmotePars {
            perc_over: 200.0,
            perc_under: 200.0,
            k: 5,
        }
    }
}

enum SynthCell {
    Number(f64),
    MissingNumber,
    Label(String),
}

/// SMOTE resampling: synthesises minority cases by interpolating towards
/// random members of each case's k-nearest minority neighbourhood, then
/// downsamples the remaining classes to `perc_under`% of the synthetic
/// count. Every original minority row is preserved.
///
/// Neighbour distances are Euclidean over the numeric predictors; the
/// numeric coordinates of a synthetic case interpolate uniformly (one draw
/// per predictor) between the case and its neighbour, categorical
/// predictors copy from one of the pair at random.
pub fn pre_smote(
    train: &DataFrame,
    target: &str,
    pars: &SmotePars,
    task_kind: TaskKind,
    rng: &mut ChaCha8Rng,
) -> Result<DataFrame, PrepostError> {
    if task_kind != TaskKind::Classification {
        return Err(PrepostError::ClassificationOnly { step: "smote" });
    }
    let target_col = train.column(target)?;
    let groups = class_partition(target_col);
    if groups.len() < 2 {
        return Err(PrepostError::SingleClass);
    }
    let minority = minority_class(&groups);
    let (minority_label, minority_rows) = &groups[minority];
    if minority_rows.len() < 2 {
        return Err(PrepostError::NoNeighbours(minority_label.clone()));
    }

    let numeric_cols: Vec<&Column> = train
        .columns()
        .iter()
        .filter(|c| c.name != target && c.is_numeric())
        .collect();
    for c in &numeric_cols {
        if minority_rows.iter().any(|&r| c.is_missing(r)) {
            return Err(PrepostError::SmoteMissing(c.name.clone()));
        }
    }

    // k nearest minority neighbours per minority case (excluding itself),
    // by Euclidean distance over the numeric predictors, ties by row order.
    let k = pars.k.min(minority_rows.len() - 1).max(1);
    let coords: Vec<Vec<f64>> = minority_rows
        .iter()
        .map(|&r| {
            numeric_cols
                .iter()
                .map(|c| c.numeric_at(r).unwrap())
                .collect()
        })
        .collect();
    let neighbours: Vec<Vec<usize>> = (0..minority_rows.len())
        .map(|i| {
            let mut by_dist: Vec<(f64, usize)> = (0..minority_rows.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let d: f64 = coords[i]
                        .iter()
                        .zip(&coords[j])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum();
                    (d, j)
                })
                .collect();
            by_dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            by_dist.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let per_case = (pars.perc_over / 100.0).floor() as usize;
    let mut synthetic_rows: Vec<Vec<SynthCell>> = Vec::new();
    for (i, &case_row) in minority_rows.iter().enumerate() {
        for _ in 0..per_case {
            let neighbour_row = minority_rows[neighbours[i][rng.random_range(0..k)]];
            let mut cells = Vec::with_capacity(train.n_cols());
            for col in train.columns() {
                let cell = if col.name == target {
                    SynthCell::Label(minority_label.clone())
                } else {
                    match &col.data {
                        ColumnData::Numeric(_) => {
                            let a = col.numeric_at(case_row);
                            let b = col.numeric_at(neighbour_row);
                            match (a, b) {
                                (Some(a), Some(b)) => {
                                    let u: f64 = rng.random();
                                    SynthCell::Number(a + u * (b - a))
                                }
                                _ => SynthCell::MissingNumber,
                            }
                        }
                        ColumnData::Categorical { .. } => {
                            let from = if rng.random::<bool>() {
                                case_row
                            } else {
                                neighbour_row
                            };
                            match col.label_at(from) {
                                Some(l) => SynthCell::Label(l.to_string()),
                                None => SynthCell::MissingNumber,
                            }
                        }
                    }
                };
                cells.push(cell);
            }
            synthetic_rows.push(cells);
        }
    }
    let n_synthetic = synthetic_rows.len();

    // Downsample the other classes to perc_under% of the synthetic count.
    let majority_quota = (pars.perc_under / 100.0 * n_synthetic as f64).floor() as usize;
    let mut majority_pool: Vec<usize> = Vec::new();
    for (i, (_, rows)) in groups.iter().enumerate() {
        if i != minority {
            majority_pool.extend_from_slice(rows);
        }
    }
    majority_pool.sort_unstable();
    let majority_keep: Vec<usize> = if majority_pool.len() <= majority_quota {
        majority_pool
    } else {
        majority_pool.shuffle(rng);
        let mut keep = majority_pool[..majority_quota].to_vec();
        keep.sort_unstable();
        keep
    };

    let mut keep = minority_rows.clone();
    keep.extend_from_slice(&majority_keep);
    keep.sort_unstable();
    let base = train.select_rows(&keep)?;
    let synth = frame_from_synth(train, &synthetic_rows)?;
    Ok(base.concat_rows(&synth)?)
}

fn frame_from_synth(
    template: &DataFrame,
    rows: &[Vec<SynthCell>],
) -> Result<DataFrame, PrepostError> {
    let mut columns = Vec::with_capacity(template.n_cols());
    for (ci, col) in template.columns().iter().enumerate() {
        match &col.data {
            ColumnData::Numeric(_) => {
                let values = rows
                    .iter()
                    .map(|r| match &r[ci] {
                        SynthCell::Number(x) => Some(*x),
                        _ => None,
                    })
                    .collect();
                columns.push(Column::numeric(col.name.clone(), values)?);
            }
            ColumnData::Categorical { .. } => {
                let labels: Vec<Option<&str>> = rows
                    .iter()
                    .map(|r| match &r[ci] {
                        SynthCell::Label(l) => Some(l.as_str()),
                        _ => None,
                    })
                    .collect();
                columns.push(Column::categorical(col.name.clone(), labels));
            }
        }
    }
    Ok(DataFrame::new(columns)?)
}

/// Fills missing predictions with the training target's median (numeric)
/// or mode (labels). Probability matrices are rejected.
pub fn post_na2central(
    preds: &Predictions,
    train_target: &Column,
) -> Result<Predictions, PrepostError> {
    match preds {
        Predictions::Numeric(v) => {
            let med = median(&numeric_values(train_target))
                .ok_or_else(|| PrepostError::AllMissing(train_target.name.clone()))?;
            Ok(Predictions::Numeric(
                v.iter().map(|x| Some(x.unwrap_or(med))).collect(),
            ))
        }
        Predictions::Labels(v) => {
            let mode = mode_label(train_target)
                .ok_or_else(|| PrepostError::AllMissing(train_target.name.clone()))?;
            Ok(Predictions::Labels(
                v.iter()
                    .map(|l| Some(l.clone().unwrap_or_else(|| mode.clone())))
                    .collect(),
            ))
        }
        Predictions::Probabilities { .. } => Err(PrepostError::WrongShape {
            step: "na2central",
            expected: "label or numeric",
        }),
    }
}

/// Casts negative numeric predictions to zero.
pub fn post_only_pos(preds: &Predictions) -> Result<Predictions, PrepostError> {
    match preds {
        Predictions::Numeric(v) => Ok(Predictions::Numeric(
            v.iter().map(|x| x.map(|x| x.max(0.0))).collect(),
        )),
        _ => Err(PrepostError::WrongShape {
            step: "onlyPos",
            expected: "numeric",
        }),
    }
}

/// Clamps numeric predictions into `[inf_lim, sup_lim]`.
pub fn post_cast2int(
    preds: &Predictions,
    inf_lim: f64,
    sup_lim: f64,
) -> Result<Predictions, PrepostError> {
    if inf_lim > sup_lim {
        return Err(PrepostError::BadInterval(inf_lim, sup_lim));
    }
    match preds {
        Predictions::Numeric(v) => Ok(Predictions::Numeric(
            v.iter()
                .map(|x| x.map(|x| x.clamp(inf_lim, sup_lim)))
                .collect(),
        )),
        _ => Err(PrepostError::WrongShape {
            step: "cast2int",
            expected: "numeric",
        }),
    }
}

/// Converts class probabilities to the label with maximal expected
/// utility under a cost-benefit matrix; ties go to the lowest class index.
pub fn post_maxutil(
    preds: &Predictions,
    cb: &CostBenefitMatrix,
) -> Result<Predictions, PrepostError> {
    let (class_order, rows) = match preds {
        Predictions::Probabilities { class_order, rows } => (class_order, rows),
        _ => {
            return Err(PrepostError::WrongShape {
                step: "maxutil",
                expected: "probability matrix",
            })
        }
    };
    if *class_order != cb.class_order {
        return Err(PrepostError::BadCostBenefit(format!(
            "class order {:?} does not match predictions {:?}",
            cb.class_order, class_order
        )));
    }
    let k = class_order.len();
    let labels = rows
        .iter()
        .map(|p| {
            let mut best = 0usize;
            let mut best_utility = f64::NEG_INFINITY;
            for j in 0..k {
                let utility: f64 = (0..k).map(|i| p[i] * cb.entries[i][j]).sum();
                if utility > best_utility {
                    best_utility = utility;
                    best = j;
                }
            }
            Some(class_order[best].clone())
        })
        .collect();
    Ok(Predictions::Labels(labels))
}
