//! Performance metrics for classification, regression and time-series
//! predictions, plus the user-defined evaluator contract.
//!
//! Undefined values (precision with no predicted positives, normalized
//! errors against a constant training target) become explicit missing
//! scores, never silent zeros; summaries downstream count them as reduced
//! valid-iteration totals.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Column, ColumnData};
use crate::prepost::CostBenefitMatrix;
use crate::workflow::{ParamMap, Predictions};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("metric `{metric}` needs parameter `{parameter}`")]
    MissingParameter {
        metric: &'static str,
        parameter: &'static str,
    },
    #[error("positive class `{0}` does not appear in the class set")]
    UnknownPosClass(String),
    #[error("trues and predictions have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("metric `{metric}` expects {expected}")]
    WrongShape {
        metric: String,
        expected: &'static str,
    },
    #[error("evaluator `{0}` is not registered")]
    UnknownEvaluator(String),
    #[error("evaluator `{evaluator}` does not declare metric `{metric}`")]
    UndeclaredMetric { evaluator: String, metric: String },
    #[error("evaluator `{evaluator}` failed: {message}")]
    EvaluatorFailed { evaluator: String, message: String },
    #[error("evaluator `{evaluator}` returned no score for `{metric}`")]
    MissingScore { evaluator: String, metric: String },
    #[error("cost-benefit matrix does not cover class `{0}`")]
    CbMissingClass(String),
}

/// Built-in metric vocabulary, grouped by the task type that produces
/// scoreable predictions for them.
pub const CLASSIFICATION_METRICS: &[&str] = &[
    "acc", "err", "prec", "rec", "F", "macroF", "macroPrec", "macroRec", "totU",
];
pub const REGRESSION_METRICS: &[&str] =
    &["mae", "mse", "rmse", "mape", "nmse", "nmae", "theil"];
pub const TIME_METRICS: &[&str] = &["trTime", "tsTime", "totTime"];

/// True when the named metric needs the training target to be computed.
pub fn metric_needs_train_target(name: &str) -> bool {
    matches!(name, "nmse" | "nmae" | "theil")
}

/// A metric request: names plus shared parameters (positive class, F beta,
/// cost-benefit matrix).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricRequest {
    pub names: Vec<String>,
    #[serde(default)]
    pub pos_class: Option<String>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub cb_matrix: Option<CostBenefitMatrix>,
}

impl MetricRequest {
    pub fn new(names: &[&str]) -> Self {
        MetricRequest {
            names: names.iter().map(|s| s.to_string()).collect(),
            ..MetricRequest::default()
        }
    }
}

/// Named scores in request order; `None` marks an undefined value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub names: Vec<String>,
    pub values: Vec<Option<f64>>,
}

impl ScoreVector {
    pub fn new(names: Vec<String>, values: Vec<Option<f64>>) -> Self {
        debug_assert_eq!(names.len(), values.len());
        ScoreVector { names, values }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .and_then(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Option<f64>)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
    }
}

/// Confusion counts over a fixed class order: `counts[i][j]` is the number
/// of rows with truth `i` predicted as `j`. Rows with a missing truth or
/// prediction are not scored.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub class_order: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    /// Builds the matrix from label vectors. The class order is the trues
    /// column's category set extended by any unseen predicted labels.
    pub fn from_labels(
        trues: &Column,
        preds: &[Option<String>],
    ) -> Result<ConfusionMatrix, MetricsError> {
        if trues.len() != preds.len() {
            return Err(MetricsError::LengthMismatch(trues.len(), preds.len()));
        }
        let mut class_order: Vec<String> = trues.categories().to_vec();
        for p in preds.iter().flatten() {
            if !class_order.contains(p) {
                class_order.push(p.clone());
            }
        }
        let k = class_order.len();
        let mut counts = vec![vec![0usize; k]; k];
        for (row, pred) in preds.iter().enumerate() {
            let (Some(t), Some(p)) = (trues.label_at(row), pred.as_deref()) else {
                continue;
            };
            let ti = class_order.iter().position(|c| c == t).unwrap();
            let pi = class_order.iter().position(|c| c == p).unwrap();
            counts[ti][pi] += 1;
        }
        Ok(ConfusionMatrix {
            class_order,
            counts,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    fn row_sum(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }

    fn col_sum(&self, j: usize) -> usize {
        self.counts.iter().map(|r| r[j]).sum()
    }

    fn diagonal(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Precision for one class: TP / predicted-positive; undefined when
    /// nothing was predicted as the class.
    fn precision(&self, class: usize) -> Option<f64> {
        let predicted = self.col_sum(class);
        if predicted == 0 {
            None
        } else {
            Some(self.counts[class][class] as f64 / predicted as f64)
        }
    }

    /// Recall for one class: TP / actual-positive; undefined when the
    /// class never occurs in the trues.
    fn recall(&self, class: usize) -> Option<f64> {
        let actual = self.row_sum(class);
        if actual == 0 {
            None
        } else {
            Some(self.counts[class][class] as f64 / actual as f64)
        }
    }
}

fn f_measure(prec: Option<f64>, rec: Option<f64>, beta: f64) -> Option<f64> {
    let (p, r) = (prec?, rec?);
    let denominator = beta * beta * p + r;
    if denominator == 0.0 {
        None
    } else {
        Some((1.0 + beta * beta) * p * r / denominator)
    }
}

fn macro_average(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Computes classification metrics from label (or probability) predictions.
///
/// Probability matrices are converted to labels by argmax before scoring;
/// ties go to the lowest class index.
pub fn classification_metrics(
    trues: &Column,
    preds: &Predictions,
    req: &MetricRequest,
) -> Result<ScoreVector, MetricsError> {
    let labels = match preds.to_labels() {
        Predictions::Labels(l) => l,
        _ => {
            return Err(MetricsError::WrongShape {
                metric: req.names.join(","),
                expected: "label predictions",
            })
        }
    };
    let cm = ConfusionMatrix::from_labels(trues, &labels)?;
    let n = cm.total();
    let k = cm.class_order.len();
    let beta = req.beta.unwrap_or(1.0);

    let pos_index = |metric: &'static str| -> Result<usize, MetricsError> {
        let pos = req
            .pos_class
            .as_deref()
            .ok_or(MetricsError::MissingParameter {
                metric,
                parameter: "posClass",
            })?;
        cm.class_order
            .iter()
            .position(|c| c == pos)
            .ok_or_else(|| MetricsError::UnknownPosClass(pos.to_string()))
    };

    let mut values = Vec::with_capacity(req.names.len());
    for name in &req.names {
        let value = match name.as_str() {
            "acc" => (n > 0).then(|| cm.diagonal() as f64 / n as f64),
            "err" => (n > 0).then(|| 1.0 - cm.diagonal() as f64 / n as f64),
            "prec" => cm.precision(pos_index("prec")?),
            "rec" => cm.recall(pos_index("rec")?),
            "F" => {
                let i = pos_index("F")?;
                f_measure(cm.precision(i), cm.recall(i), beta)
            }
            "macroPrec" => macro_average((0..k).map(|i| cm.precision(i))),
            "macroRec" => macro_average((0..k).map(|i| cm.recall(i))),
            "macroF" => macro_average(
                (0..k).map(|i| f_measure(cm.precision(i), cm.recall(i), beta)),
            ),
            "totU" => {
                let cb = req.cb_matrix.as_ref().ok_or(MetricsError::MissingParameter {
                    metric: "totU",
                    parameter: "cb.matrix",
                })?;
                let mut total = 0.0;
                let mut scored = false;
                for (row, label) in labels.iter().enumerate() {
                    let (Some(t), Some(p)) = (trues.label_at(row), label.as_deref()) else {
                        continue;
                    };
                    let ti = cb
                        .class_order
                        .iter()
                        .position(|c| c == t)
                        .ok_or_else(|| MetricsError::CbMissingClass(t.to_string()))?;
                    let pi = cb
                        .class_order
                        .iter()
                        .position(|c| c == p)
                        .ok_or_else(|| MetricsError::CbMissingClass(p.to_string()))?;
                    total += cb.entries[ti][pi];
                    scored = true;
                }
                scored.then_some(total)
            }
            other => return Err(MetricsError::UnknownMetric(other.to_string())),
        };
        values.push(value);
    }
    Ok(ScoreVector::new(req.names.clone(), values))
}

/// Inputs for the train-dependent regression metrics.
#[derive(Debug, Clone, Default)]
pub struct TrainContext {
    /// Training-target values (for nmse/nmae).
    pub train_target: Option<Vec<f64>>,
    /// Target value of the last training row, in time order (for theil).
    pub last_train_value: Option<f64>,
}

/// Computes regression metrics from numeric predictions.
///
/// Rows with a missing truth or prediction are excluded from every sum;
/// when nothing remains all scores are undefined.
pub fn regression_metrics(
    trues: &Column,
    preds: &Predictions,
    req: &MetricRequest,
    ctx: &TrainContext,
) -> Result<ScoreVector, MetricsError> {
    let pred_values = match preds {
        Predictions::Numeric(v) => v,
        _ => {
            return Err(MetricsError::WrongShape {
                metric: req.names.join(","),
                expected: "numeric predictions",
            })
        }
    };
    let true_values = match &trues.data {
        ColumnData::Numeric(v) => v,
        _ => {
            return Err(MetricsError::WrongShape {
                metric: req.names.join(","),
                expected: "numeric trues",
            })
        }
    };
    if true_values.len() != pred_values.len() {
        return Err(MetricsError::LengthMismatch(
            true_values.len(),
            pred_values.len(),
        ));
    }
    let pairs: Vec<(f64, f64)> = true_values
        .iter()
        .zip(pred_values)
        .filter_map(|(t, p)| Some(((*t)?, (*p)?)))
        .collect();
    let n = pairs.len() as f64;

    let mae = || {
        (!pairs.is_empty())
            .then(|| pairs.iter().map(|(t, p)| (t - p).abs()).sum::<f64>() / n)
    };
    let mse = || {
        (!pairs.is_empty())
            .then(|| pairs.iter().map(|(t, p)| (t - p).powi(2)).sum::<f64>() / n)
    };

    let mut values = Vec::with_capacity(req.names.len());
    for name in &req.names {
        let value = match name.as_str() {
            "mae" => mae(),
            "mse" => mse(),
            "rmse" => mse().map(f64::sqrt),
            "mape" => {
                let nonzero: Vec<&(f64, f64)> =
                    pairs.iter().filter(|(t, _)| *t != 0.0).collect();
                (!nonzero.is_empty()).then(|| {
                    nonzero.iter().map(|(t, p)| ((t - p) / t).abs()).sum::<f64>()
                        / nonzero.len() as f64
                })
            }
            "nmse" | "nmae" => {
                let train = ctx
                    .train_target
                    .as_ref()
                    .ok_or(MetricsError::MissingParameter {
                        metric: "nmse/nmae",
                        parameter: "trainTarget",
                    })?;
                if train.is_empty() || pairs.is_empty() {
                    None
                } else {
                    let train_mean = train.iter().sum::<f64>() / train.len() as f64;
                    if name == "nmse" {
                        let denominator: f64 =
                            pairs.iter().map(|(t, _)| (t - train_mean).powi(2)).sum();
                        (denominator > 0.0).then(|| {
                            pairs.iter().map(|(t, p)| (t - p).powi(2)).sum::<f64>()
                                / denominator
                        })
                    } else {
                        let denominator: f64 =
                            pairs.iter().map(|(t, _)| (t - train_mean).abs()).sum();
                        (denominator > 0.0).then(|| {
                            pairs.iter().map(|(t, p)| (t - p).abs()).sum::<f64>()
                                / denominator
                        })
                    }
                }
            }
            "theil" => {
                // U2 against the naive no-change forecast, seeded with the
                // last training value; requires time-ordered rows.
                let last = ctx
                    .last_train_value
                    .ok_or(MetricsError::MissingParameter {
                        metric: "theil",
                        parameter: "lastTrainValue",
                    })?;
                if pairs.is_empty() {
                    None
                } else {
                    let mut numerator = 0.0;
                    let mut denominator = 0.0;
                    let mut previous = last;
                    for (t, p) in &pairs {
                        numerator += (t - p).powi(2);
                        denominator += (t - previous).powi(2);
                        previous = *t;
                    }
                    (denominator > 0.0).then(|| (numerator / denominator).sqrt())
                }
            }
            other => return Err(MetricsError::UnknownMetric(other.to_string())),
        };
        values.push(value);
    }
    Ok(ScoreVector::new(req.names.clone(), values))
}

/// Expands the timing metrics from measured train/test durations.
pub fn time_metrics(names: &[String], train_time: f64, test_time: f64) -> ScoreVector {
    let values = names
        .iter()
        .map(|n| match n.as_str() {
            "trTime" => Some(train_time),
            "tsTime" => Some(test_time),
            "totTime" => Some(train_time + test_time),
            _ => None,
        })
        .collect();
    ScoreVector::new(names.to_vec(), values)
}

/// A user-defined metric evaluator.
pub trait MetricEvaluator: Send + Sync {
    /// Metric names this evaluator can produce.
    fn declared(&self) -> Vec<String>;

    fn evaluate(
        &self,
        trues: &Column,
        preds: &Predictions,
        train_target: Option<&[f64]>,
        pars: &ParamMap,
    ) -> Result<ScoreVector, String>;
}

/// Registry of metric evaluators, keyed by id.
#[derive(Default, Clone)]
pub struct EvaluatorRegistry {
    evaluators: HashMap<String, Arc<dyn MetricEvaluator>>,
}

impl EvaluatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry preloaded with the example `powErr` evaluator.
    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry.register("powErr", Arc::new(PowErr));
        registry
    }

    pub fn register(&mut self, id: impl Into<String>, evaluator: Arc<dyn MetricEvaluator>) {
        self.evaluators.insert(id.into(), evaluator);
    }

    pub fn get(&self, id: &str) -> Option<&Arc<dyn MetricEvaluator>> {
        self.evaluators.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.evaluators.contains_key(id)
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.evaluators.keys().cloned().collect();
        ids.sort();
        ids
    }
}

/// Example evaluator: mean of (true - pred) raised to `pow` (default 3),
/// published as metric `pow.err`.
pub struct PowErr;

impl MetricEvaluator for PowErr {
    fn declared(&self) -> Vec<String> {
        vec!["pow.err".to_string()]
    }

    fn evaluate(
        &self,
        trues: &Column,
        preds: &Predictions,
        _train_target: Option<&[f64]>,
        pars: &ParamMap,
    ) -> Result<ScoreVector, String> {
        let pow = pars.get("pow").and_then(|v| v.as_f64()).unwrap_or(3.0);
        let pred_values = match preds {
            Predictions::Numeric(v) => v,
            _ => return Err("pow.err expects numeric predictions".to_string()),
        };
        let true_values = match &trues.data {
            ColumnData::Numeric(v) => v,
            _ => return Err("pow.err expects a numeric target".to_string()),
        };
        let pairs: Vec<(f64, f64)> = true_values
            .iter()
            .zip(pred_values)
            .filter_map(|(t, p)| Some(((*t)?, (*p)?)))
            .collect();
        let value = (!pairs.is_empty()).then(|| {
            pairs.iter().map(|(t, p)| (t - p).powf(pow)).sum::<f64>() / pairs.len() as f64
        });
        Ok(ScoreVector::new(vec!["pow.err".to_string()], vec![value]))
    }
}

/// Runs a registered evaluator for the requested metric names and checks
/// the declared-name contract both ways.
pub fn run_evaluator(
    registry: &EvaluatorRegistry,
    evaluator_id: &str,
    requested: &[String],
    trues: &Column,
    preds: &Predictions,
    train_target: Option<&[f64]>,
    pars: &ParamMap,
) -> Result<ScoreVector, MetricsError> {
    let evaluator = registry
        .get(evaluator_id)
        .ok_or_else(|| MetricsError::UnknownEvaluator(evaluator_id.to_string()))?;
    let declared = evaluator.declared();
    for name in requested {
        if !declared.contains(name) {
            return Err(MetricsError::UndeclaredMetric {
                evaluator: evaluator_id.to_string(),
                metric: name.clone(),
            });
        }
    }
    let raw = evaluator
        .evaluate(trues, preds, train_target, pars)
        .map_err(|message| MetricsError::EvaluatorFailed {
            evaluator: evaluator_id.to_string(),
            message,
        })?;
    let mut values = Vec::with_capacity(requested.len());
    for name in requested {
        if !raw.names.iter().any(|n| n == name) {
            return Err(MetricsError::MissingScore {
                evaluator: evaluator_id.to_string(),
                metric: name.clone(),
            });
        }
        values.push(raw.get(name));
    }
    Ok(ScoreVector::new(requested.to_vec(), values))
}
