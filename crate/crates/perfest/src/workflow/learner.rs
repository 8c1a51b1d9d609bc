//! Built-in learners and the learner plugin contract.
//!
//! The built-ins are deliberately small: a k-nearest-neighbour model, an
//! ordinary-least-squares linear model and two constant baselines. They
//! exist to exercise every estimation pathway, not to win benchmarks.
//! Custom learners register under `plugin:<id>` names and are resolved
//! the same way the generic workflows resolve built-in names.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::frame::{Column, ColumnData, DataFrame, Formula};
use crate::workflow::{ParamMap, Predictions, WorkflowError};

/// Requested prediction shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputShape {
    Labels,
    Numeric,
    Probabilities,
}

/// A learner choice with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerSpec {
    Knn {
        k: usize,
        /// Weight votes by inverse distance instead of uniformly.
        weighted: bool,
    },
    LinReg {
        /// Ridge jitter added to the normal equations when the design is
        /// singular; exact OLS is used whenever the system solves cleanly.
        ridge_lambda: f64,
    },
    MeanBaseline,
    ModeBaseline,
    Plugin {
        id: String,
        pars: ParamMap,
    },
}

impl LearnerSpec {
    /// Parses a learner name plus a `learner.pars` map.
    pub fn parse(name: &str, pars: &ParamMap) -> Result<LearnerSpec, WorkflowError> {
        let get_f64 = |key: &str| pars.get(key).and_then(|v| v.as_f64());
        match name {
            "knn" => {
                let k = get_f64("k").unwrap_or(3.0);
                if k < 1.0 || k.fract() != 0.0 {
                    return Err(WorkflowError::BadParam {
                        name: "k".into(),
                        message: format!("knn needs an integer k >= 1, got {k}"),
                    });
                }
                let weighted = pars
                    .get("weighted")
                    .and_then(|v| v.as_bool())
                    .unwrap_or(false);
                Ok(LearnerSpec::Knn {
                    k: k as usize,
                    weighted,
                })
            }
            "linreg" => Ok(LearnerSpec::LinReg {
                ridge_lambda: get_f64("lambda").unwrap_or(1e-8),
            }),
            "meanBaseline" => Ok(LearnerSpec::MeanBaseline),
            "modeBaseline" => Ok(LearnerSpec::ModeBaseline),
            other => {
                if let Some(id) = other.strip_prefix("plugin:") {
                    Ok(LearnerSpec::Plugin {
                        id: id.to_string(),
                        pars: pars.clone(),
                    })
                } else {
                    Err(WorkflowError::UnknownLearner(other.to_string()))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            LearnerSpec::Knn { .. } => "knn".into(),
            LearnerSpec::LinReg { .. } => "linreg".into(),
            LearnerSpec::MeanBaseline => "meanBaseline".into(),
            LearnerSpec::ModeBaseline => "modeBaseline".into(),
            LearnerSpec::Plugin { id, .. } => format!("plugin:{id}"),
        }
    }
}

/// A fitted model produced by a learner plugin.
pub trait UserModel: Send + Sync {
    fn predict(&self, test: &DataFrame, shape: OutputShape) -> Result<Predictions, String>;
}

/// A learner plugin: fits a model from a formula and training data.
pub trait UserLearner: Send + Sync {
    fn fit(
        &self,
        formula: &Formula,
        train: &DataFrame,
        pars: &ParamMap,
    ) -> Result<Box<dyn UserModel>, String>;
}

fn learner_registry() -> &'static RwLock<HashMap<String, Arc<dyn UserLearner>>> {
    static REGISTRY: std::sync::OnceLock<RwLock<HashMap<String, Arc<dyn UserLearner>>>> =
        std::sync::OnceLock::new();
    REGISTRY.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Registers a learner plugin under `plugin:<id>`.
pub fn register_learner(id: impl Into<String>, learner: Arc<dyn UserLearner>) {
    learner_registry()
        .write()
        .expect("learner registry poisoned")
        .insert(id.into(), learner);
}

/// One encoded predictor: numeric columns map to a single coordinate,
/// categorical columns to a one-hot block over their category set.
#[derive(Debug, Clone)]
pub(crate) enum EncodedCol {
    Numeric {
        name: String,
        mean: f64,
        sd: f64,
        standardize: bool,
    },
    OneHot {
        name: String,
        categories: Vec<String>,
    },
}

/// Maps predictor columns to a fixed-width numeric feature vector.
#[derive(Debug, Clone)]
pub(crate) struct Encoder {
    cols: Vec<EncodedCol>,
    width: usize,
}

impl Encoder {
    /// Builds an encoder from the training predictors. `standardize`
    /// centres and scales numeric columns by their train statistics.
    fn fit(
        train: &DataFrame,
        predictors: &[String],
        standardize: bool,
    ) -> Result<Encoder, WorkflowError> {
        let mut cols = Vec::new();
        let mut width = 0;
        for name in predictors {
            let col = train.column(name)?;
            match &col.data {
                ColumnData::Numeric(values) => {
                    let present: Vec<f64> = values.iter().flatten().copied().collect();
                    let n = present.len() as f64;
                    let mean = if present.is_empty() {
                        0.0
                    } else {
                        present.iter().sum::<f64>() / n
                    };
                    let sd = if present.len() > 1 {
                        (present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
                            .sqrt()
                    } else {
                        0.0
                    };
                    cols.push(EncodedCol::Numeric {
                        name: name.clone(),
                        mean,
                        sd,
                        standardize,
                    });
                    width += 1;
                }
                ColumnData::Categorical { categories, .. } => {
                    cols.push(EncodedCol::OneHot {
                        name: name.clone(),
                        categories: categories.clone(),
                    });
                    width += categories.len();
                }
            }
        }
        if width == 0 {
            return Err(WorkflowError::BadParam {
                name: "predictors".into(),
                message: "no usable predictors after encoding".into(),
            });
        }
        Ok(Encoder { cols, width })
    }

    /// Encodes one row of `frame`; missing cells are an error because the
    /// built-in learners have no native missing-value handling (use the
    /// centralImp or na.omit pre-steps first).
    fn encode_row(&self, frame: &DataFrame, row: usize) -> Result<Vec<f64>, WorkflowError> {
        let mut out = Vec::with_capacity(self.width);
        for spec in &self.cols {
            match spec {
                EncodedCol::Numeric {
                    name,
                    mean,
                    sd,
                    standardize,
                } => {
                    let col = frame.column(name)?;
                    let v = col.numeric_at(row).ok_or_else(|| WorkflowError::LearnerFailed {
                        learner: "encoder".into(),
                        message: format!("missing value in predictor `{name}` (impute first)"),
                    })?;
                    out.push(if *standardize {
                        if *sd > 0.0 {
                            (v - mean) / sd
                        } else {
                            v - mean
                        }
                    } else {
                        v
                    });
                }
                EncodedCol::OneHot { name, categories } => {
                    let col = frame.column(name)?;
                    let label =
                        col.label_at(row).ok_or_else(|| WorkflowError::LearnerFailed {
                            learner: "encoder".into(),
                            message: format!("missing value in predictor `{name}` (impute first)"),
                        })?;
                    for c in categories {
                        out.push(if c == label { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Classification target extracted for fitting.
#[derive(Debug, Clone)]
struct ClassTarget {
    codes: Vec<u32>,
    categories: Vec<String>,
}

fn class_target(col: &Column) -> Result<ClassTarget, WorkflowError> {
    match &col.data {
        ColumnData::Categorical { codes, categories } => {
            let codes = codes
                .iter()
                .map(|c| {
                    c.ok_or_else(|| WorkflowError::LearnerFailed {
                        learner: "target".into(),
                        message: "missing target value".into(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ClassTarget {
                codes,
                categories: categories.clone(),
            })
        }
        _ => Err(WorkflowError::LearnerFailed {
            learner: "target".into(),
            message: "expected a categorical target".into(),
        }),
    }
}

fn numeric_target(col: &Column) -> Result<Vec<f64>, WorkflowError> {
    match &col.data {
        ColumnData::Numeric(values) => values
            .iter()
            .map(|v| {
                v.ok_or_else(|| WorkflowError::LearnerFailed {
                    learner: "target".into(),
                    message: "missing target value".into(),
                })
            })
            .collect(),
        _ => Err(WorkflowError::LearnerFailed {
            learner: "target".into(),
            message: "expected a numeric target".into(),
        }),
    }
}

/// A fitted model ready to predict on a test frame. Opaque: obtain one
/// from [`fit_learner`] and use it through [`predict_model`].
pub struct Model(ModelInner);

pub(crate) enum ModelInner {
    KnnClass {
        encoder: Encoder,
        points: Vec<Vec<f64>>,
        codes: Vec<u32>,
        categories: Vec<String>,
        k: usize,
        weighted: bool,
    },
    KnnReg {
        encoder: Encoder,
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
        k: usize,
        weighted: bool,
    },
    LinReg {
        encoder: Encoder,
        /// Intercept followed by one coefficient per encoded dimension.
        coefficients: Vec<f64>,
    },
    Mean(f64),
    Mode {
        label: String,
        categories: Vec<String>,
        frequencies: Vec<f64>,
    },
    Plugin(Box<dyn UserModel>),
}

// Not derivable: Model owns a trait object.
impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match &self.0 {
            ModelInner::KnnClass { .. } => "KnnClass",
            ModelInner::KnnReg { .. } => "KnnReg",
            ModelInner::LinReg { .. } => "LinReg",
            ModelInner::Mean(_) => "Mean",
            ModelInner::Mode { .. } => "Mode",
            ModelInner::Plugin(_) => "Plugin",
        };
        write!(f, "Model::{name}")
    }
}

/// Solves `a * x = b` in place by Gaussian elimination with partial
/// pivoting; `None` when a pivot collapses (singular system).
#[allow(clippy::needless_range_loop)]
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale: f64 = a
        .iter()
        .flat_map(|r| r.iter().map(|v| v.abs()))
        .fold(0.0, f64::max)
        .max(1.0);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Fits a learner on the training frame.
pub fn fit_learner(
    spec: &LearnerSpec,
    formula: &Formula,
    train: &DataFrame,
) -> Result<Model, WorkflowError> {
    if train.n_rows() == 0 {
        return Err(WorkflowError::EmptyData("train"));
    }
    let target = train.column(&formula.target)?;
    let predictors = formula.predictor_names(train);
    match spec {
        LearnerSpec::Knn { k, weighted } => {
            let encoder = Encoder::fit(train, &predictors, true)?;
            let points = (0..train.n_rows())
                .map(|r| encoder.encode_row(train, r))
                .collect::<Result<Vec<_>, _>>()?;
            if target.is_categorical() {
                let t = class_target(target)?;
                Ok(Model(ModelInner::KnnClass {
                    encoder,
                    points,
                    codes: t.codes,
                    categories: t.categories,
                    k: *k,
                    weighted: *weighted,
                }))
            } else {
                Ok(Model(ModelInner::KnnReg {
                    encoder,
                    points,
                    values: numeric_target(target)?,
                    k: *k,
                    weighted: *weighted,
                }))
            }
        }
        LearnerSpec::LinReg { ridge_lambda } => {
            let y = numeric_target(target)?;
            let encoder = Encoder::fit(train, &predictors, false)?;
            let rows = (0..train.n_rows())
                .map(|r| {
                    encoder.encode_row(train, r).map(|mut v| {
                        let mut row = Vec::with_capacity(v.len() + 1);
                        row.push(1.0);
                        row.append(&mut v);
                        row
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let p = encoder.width + 1;
            let mut xtx = vec![vec![0.0; p]; p];
            let mut xty = vec![0.0; p];
            for (row, &yi) in rows.iter().zip(&y) {
                for i in 0..p {
                    xty[i] += row[i] * yi;
                    for j in 0..p {
                        xtx[i][j] += row[i] * row[j];
                    }
                }
            }
            let coefficients = match solve_linear(xtx.clone(), xty.clone()) {
                Some(c) => c,
                None => {
                    // Singular design: fall back to the jittered system.
                    let mut ridged = xtx;
                    for (i, row) in ridged.iter_mut().enumerate() {
                        row[i] += ridge_lambda;
                    }
                    solve_linear(ridged, xty).ok_or_else(|| WorkflowError::LearnerFailed {
                        learner: "linreg".into(),
                        message: "normal equations unsolvable even with ridge jitter".into(),
                    })?
                }
            };
            Ok(Model(ModelInner::LinReg {
                encoder,
                coefficients,
            }))
        }
        LearnerSpec::MeanBaseline => {
            let y = numeric_target(target)?;
            Ok(Model(ModelInner::Mean(y.iter().sum::<f64>() / y.len() as f64)))
        }
        LearnerSpec::ModeBaseline => {
            let t = class_target(target)?;
            let mut counts = vec![0usize; t.categories.len()];
            for &c in &t.codes {
                counts[c as usize] += 1;
            }
            let mut best = 0usize;
            for (i, &c) in counts.iter().enumerate() {
                if c > counts[best] {
                    best = i;
                }
            }
            let n = t.codes.len() as f64;
            Ok(Model(ModelInner::Mode {
                label: t.categories[best].clone(),
                frequencies: counts.iter().map(|&c| c as f64 / n).collect(),
                categories: t.categories,
            }))
        }
        LearnerSpec::Plugin { id, pars } => {
            let learner = learner_registry()
                .read()
                .expect("learner registry poisoned")
                .get(id)
                .cloned()
                .ok_or_else(|| WorkflowError::UnknownLearner(format!("plugin:{id}")))?;
            let model = learner
                .fit(formula, train, pars)
                .map_err(|message| WorkflowError::LearnerFailed {
                    learner: format!("plugin:{id}"),
                    message,
                })?;
            Ok(Model(ModelInner::Plugin(model)))
        }
    }
}

/// Indices and distances of the k nearest training points to `query`.
fn nearest(points: &[Vec<f64>], query: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut dist: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d: f64 = p.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum();
            (i, d.sqrt())
        })
        .collect();
    dist.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    dist.truncate(k.min(points.len()).max(1));
    dist
}

/// Obtains predictions for the test frame in the requested shape.
pub fn predict_model(
    model: &Model,
    test: &DataFrame,
    shape: OutputShape,
) -> Result<Predictions, WorkflowError> {
    let wrong_shape = |learner: &str| WorkflowError::BadParam {
        name: "predictor.pars".into(),
        message: format!("`{learner}` cannot produce that prediction shape"),
    };
    match &model.0 {
        ModelInner::KnnClass {
            encoder,
            points,
            codes,
            categories,
            k,
            weighted,
        } => {
            let mut prob_rows = Vec::with_capacity(test.n_rows());
            for r in 0..test.n_rows() {
                let q = encoder.encode_row(test, r)?;
                let mut votes = vec![0.0f64; categories.len()];
                for (idx, d) in nearest(points, &q, *k) {
                    let w = if *weighted { 1.0 / (d + 1e-12) } else { 1.0 };
                    votes[codes[idx] as usize] += w;
                }
                let total: f64 = votes.iter().sum();
                prob_rows.push(votes.iter().map(|v| v / total).collect::<Vec<f64>>());
            }
            let probs = Predictions::Probabilities {
                class_order: categories.clone(),
                rows: prob_rows,
            };
            match shape {
                OutputShape::Probabilities => Ok(probs),
                OutputShape::Labels => Ok(probs.to_labels()),
                OutputShape::Numeric => Err(wrong_shape("knn classifier")),
            }
        }
        ModelInner::KnnReg {
            encoder,
            points,
            values,
            k,
            weighted,
        } => {
            if shape != OutputShape::Numeric {
                return Err(wrong_shape("knn regressor"));
            }
            let mut out = Vec::with_capacity(test.n_rows());
            for r in 0..test.n_rows() {
                let q = encoder.encode_row(test, r)?;
                let hits = nearest(points, &q, *k);
                let (mut num, mut den) = (0.0, 0.0);
                for (idx, d) in hits {
                    let w = if *weighted { 1.0 / (d + 1e-12) } else { 1.0 };
                    num += w * values[idx];
                    den += w;
                }
                out.push(Some(num / den));
            }
            Ok(Predictions::Numeric(out))
        }
        ModelInner::LinReg {
            encoder,
            coefficients,
        } => {
            if shape != OutputShape::Numeric {
                return Err(wrong_shape("linreg"));
            }
            let mut out = Vec::with_capacity(test.n_rows());
            for r in 0..test.n_rows() {
                let x = encoder.encode_row(test, r)?;
                let mut y = coefficients[0];
                for (i, v) in x.iter().enumerate() {
                    y += coefficients[i + 1] * v;
                }
                out.push(Some(y));
            }
            Ok(Predictions::Numeric(out))
        }
        ModelInner::Mean(m) => {
            if shape != OutputShape::Numeric {
                return Err(wrong_shape("meanBaseline"));
            }
            Ok(Predictions::Numeric(vec![Some(*m); test.n_rows()]))
        }
        ModelInner::Mode {
            label,
            categories,
            frequencies,
        } => match shape {
            OutputShape::Labels => Ok(Predictions::Labels(vec![
                Some(label.clone());
                test.n_rows()
            ])),
            OutputShape::Probabilities => Ok(Predictions::Probabilities {
                class_order: categories.clone(),
                rows: vec![frequencies.clone(); test.n_rows()],
            }),
            OutputShape::Numeric => Err(wrong_shape("modeBaseline")),
        },
        ModelInner::Plugin(model) => model
            .predict(test, shape)
            .map_err(|message| WorkflowError::LearnerFailed {
                learner: "plugin".into(),
                message,
            }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::parse_formula;

    fn num_col(name: &str, v: &[f64]) -> Column {
        Column::numeric(name, v.iter().map(|&x| Some(x)).collect()).unwrap()
    }

    #[test]
    fn mean_baseline_predicts_train_mean() {
        let train =
            DataFrame::new(vec![num_col("x", &[0.0, 0.0, 0.0]), num_col("y", &[1.0, 2.0, 3.0])])
                .unwrap();
        let model = fit_learner(
            &LearnerSpec::MeanBaseline,
            &parse_formula("y ~ .").unwrap(),
            &train,
        )
        .unwrap();
        let preds = predict_model(&model, &train, OutputShape::Numeric).unwrap();
        assert_eq!(
            preds,
            Predictions::Numeric(vec![Some(2.0), Some(2.0), Some(2.0)])
        );
    }

    #[test]
    fn knn_majority_vote_with_probabilities() {
        // Brute-force neighbour oracle: query 0.05 against points
        // {0.0: A, 0.1: A, 5.0: B} at k=3 must see two A and one B.
        let train = DataFrame::new(vec![
            num_col("x", &[0.0, 0.1, 5.0]),
            Column::categorical("y", vec![Some("A"), Some("A"), Some("B")]),
        ])
        .unwrap();
        let test = DataFrame::new(vec![
            num_col("x", &[0.05]),
            Column::categorical("y", vec![Some("A")]),
        ])
        .unwrap();
        let spec = LearnerSpec::Knn {
            k: 3,
            weighted: false,
        };
        let model = fit_learner(&spec, &parse_formula("y ~ .").unwrap(), &train).unwrap();
        let labels = predict_model(&model, &test, OutputShape::Labels).unwrap();
        assert_eq!(labels, Predictions::Labels(vec![Some("A".into())]));
        let probs = predict_model(&model, &test, OutputShape::Probabilities).unwrap();
        match probs {
            Predictions::Probabilities { class_order, rows } => {
                assert_eq!(class_order, vec!["A".to_string(), "B".to_string()]);
                assert!((rows[0][0] - 2.0 / 3.0).abs() < 1e-12);
                assert!((rows[0][1] - 1.0 / 3.0).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn knn_k1_self_consistency() {
        let train = DataFrame::new(vec![
            num_col("x", &[1.0, 2.0, 3.0, 4.0]),
            Column::categorical("y", vec![Some("a"), Some("b"), Some("a"), Some("c")]),
        ])
        .unwrap();
        let spec = LearnerSpec::Knn {
            k: 1,
            weighted: false,
        };
        let model = fit_learner(&spec, &parse_formula("y ~ .").unwrap(), &train).unwrap();
        let preds = predict_model(&model, &train, OutputShape::Labels).unwrap();
        let expected: Vec<Option<String>> = ["a", "b", "a", "c"]
            .iter()
            .map(|s| Some(s.to_string()))
            .collect();
        assert_eq!(preds, Predictions::Labels(expected));
    }

    #[test]
    fn knn_regression_averages_neighbours() {
        let train =
            DataFrame::new(vec![num_col("x", &[0.0, 1.0, 10.0]), num_col("y", &[1.0, 3.0, 100.0])])
                .unwrap();
        let test = DataFrame::new(vec![num_col("x", &[0.4]), num_col("y", &[0.0])]).unwrap();
        let spec = LearnerSpec::Knn {
            k: 2,
            weighted: false,
        };
        let model = fit_learner(&spec, &parse_formula("y ~ .").unwrap(), &train).unwrap();
        let preds = predict_model(&model, &test, OutputShape::Numeric).unwrap();
        assert_eq!(preds, Predictions::Numeric(vec![Some(2.0)]));
    }

    #[test]
    fn knn_missing_predictor_is_an_error() {
        let train = DataFrame::new(vec![
            Column::numeric("x", vec![Some(1.0), None]).unwrap(),
            num_col("y", &[1.0, 2.0]),
        ])
        .unwrap();
        let spec = LearnerSpec::Knn {
            k: 1,
            weighted: false,
        };
        assert!(fit_learner(&spec, &parse_formula("y ~ .").unwrap(), &train).is_err());
    }

    #[test]
    fn linreg_exact_on_clean_data() {
        // y = 2x fitted without jitter must predict 6 at x=3 to
        // machine precision.
        let train =
            DataFrame::new(vec![num_col("x", &[1.0, 2.0, 4.0]), num_col("y", &[2.0, 4.0, 8.0])])
                .unwrap();
        let test = DataFrame::new(vec![num_col("x", &[3.0]), num_col("y", &[0.0])]).unwrap();
        let model = fit_learner(
            &LearnerSpec::LinReg { ridge_lambda: 1e-8 },
            &parse_formula("y ~ .").unwrap(),
            &train,
        )
        .unwrap();
        match predict_model(&model, &test, OutputShape::Numeric).unwrap() {
            Predictions::Numeric(v) => assert!((v[0].unwrap() - 6.0).abs() < 1e-9),
            _ => unreachable!(),
        }
    }

    #[test]
    fn linreg_intercept_only() {
        // y = 3 + 0x: the fitted intercept must be 3 exactly.
        let train =
            DataFrame::new(vec![num_col("x", &[1.0, 2.0, 5.0]), num_col("y", &[3.0, 3.0, 3.0])])
                .unwrap();
        let model = fit_learner(
            &LearnerSpec::LinReg { ridge_lambda: 1e-8 },
            &parse_formula("y ~ .").unwrap(),
            &train,
        )
        .unwrap();
        match predict_model(&model, &train, OutputShape::Numeric).unwrap() {
            Predictions::Numeric(v) => {
                for p in v {
                    assert!((p.unwrap() - 3.0).abs() < 1e-9);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn linreg_one_hot_collinear_design_survives() {
        // Full one-hot plus intercept is singular; the jitter path must
        // still produce sensible predictions.
        let train = DataFrame::new(vec![
            Column::categorical("g", vec![Some("a"), Some("a"), Some("b"), Some("b")]),
            num_col("y", &[1.0, 1.0, 5.0, 5.0]),
        ])
        .unwrap();
        let model = fit_learner(
            &LearnerSpec::LinReg { ridge_lambda: 1e-8 },
            &parse_formula("y ~ .").unwrap(),
            &train,
        )
        .unwrap();
        match predict_model(&model, &train, OutputShape::Numeric).unwrap() {
            Predictions::Numeric(v) => {
                assert!((v[0].unwrap() - 1.0).abs() < 1e-3);
                assert!((v[2].unwrap() - 5.0).abs() < 1e-3);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn mode_baseline_reports_frequencies() {
        let train = DataFrame::new(vec![
            num_col("x", &[0.0, 0.0, 0.0, 0.0]),
            Column::categorical("y", vec![Some("a"), Some("b"), Some("b"), Some("b")]),
        ])
        .unwrap();
        let model = fit_learner(
            &LearnerSpec::ModeBaseline,
            &parse_formula("y ~ .").unwrap(),
            &train,
        )
        .unwrap();
        match predict_model(&model, &train, OutputShape::Probabilities).unwrap() {
            Predictions::Probabilities { rows, .. } => {
                assert_eq!(rows[0], vec![0.25, 0.75]);
            }
            _ => unreachable!(),
        }
        match predict_model(&model, &train, OutputShape::Labels).unwrap() {
            Predictions::Labels(l) => assert_eq!(l[0].as_deref(), Some("b")),
            _ => unreachable!(),
        }
    }

    #[test]
    fn unknown_learner_name_rejected_at_parse() {
        let err = LearnerSpec::parse("svm", &ParamMap::new()).unwrap_err();
        assert!(matches!(err, WorkflowError::UnknownLearner(_)));
    }

    #[test]
    fn learner_plugin_round_trip() {
        struct Always7;
        struct Always7Model;
        impl UserModel for Always7Model {
            fn predict(&self, test: &DataFrame, _shape: OutputShape) -> Result<Predictions, String> {
                Ok(Predictions::Numeric(vec![Some(7.0); test.n_rows()]))
            }
        }
        impl UserLearner for Always7 {
            fn fit(
                &self,
                _formula: &Formula,
                _train: &DataFrame,
                _pars: &ParamMap,
            ) -> Result<Box<dyn UserModel>, String> {
                Ok(Box::new(Always7Model))
            }
        }
        register_learner("seven", Arc::new(Always7));
        let spec = LearnerSpec::parse("plugin:seven", &ParamMap::new()).unwrap();
        let train = DataFrame::new(vec![num_col("x", &[1.0]), num_col("y", &[2.0])]).unwrap();
        let model = fit_learner(&spec, &parse_formula("y ~ .").unwrap(), &train).unwrap();
        let preds = predict_model(&model, &train, OutputShape::Numeric).unwrap();
        assert_eq!(preds, Predictions::Numeric(vec![Some(7.0)]));
    }
}
