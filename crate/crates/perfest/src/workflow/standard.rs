//! The generic learn-then-predict workflow for classification and
//! regression tasks.

use std::collections::HashMap;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::frame::{Column, DataFrame, Formula, TaskKind};
use crate::prepost::{
    post_cast2int, post_maxutil, post_na2central, post_only_pos, pre_central_imp, pre_na_omit,
    pre_scale, pre_smote, pre_undersample, CostBenefitMatrix, PostStep, PreStep, PrepostError,
    SmotePars,
};
use crate::workflow::{
    fit_learner, predict_model, LearnerSpec, OutputShape, ParamMap, Predictions, WorkflowError,
    WorkflowResult, WorkflowTimes,
};

/// Parsed parameters of the standard workflow.
#[derive(Debug, Clone)]
pub struct StandardParams {
    pub learner: LearnerSpec,
    /// Requested prediction shape; `None` uses the task default
    /// (labels for classification, numeric for regression).
    pub out_shape: Option<OutputShape>,
    pub pre: Vec<PreStep>,
    pub post: Vec<PostStep>,
}

fn string_list(value: &serde_json::Value, name: &str) -> Result<Vec<String>, WorkflowError> {
    match value {
        serde_json::Value::String(s) => Ok(vec![s.clone()]),
        serde_json::Value::Array(items) => items
            .iter()
            .map(|v| {
                v.as_str().map(str::to_string).ok_or_else(|| WorkflowError::BadParam {
                    name: name.into(),
                    message: "expected a string or list of strings".into(),
                })
            })
            .collect(),
        _ => Err(WorkflowError::BadParam {
            name: name.into(),
            message: "expected a string or list of strings".into(),
        }),
    }
}

fn as_map(value: Option<&serde_json::Value>, name: &str) -> Result<ParamMap, WorkflowError> {
    match value {
        None => Ok(ParamMap::new()),
        Some(serde_json::Value::Object(m)) => Ok(m.clone()),
        Some(_) => Err(WorkflowError::BadParam {
            name: name.into(),
            message: "expected a parameter object".into(),
        }),
    }
}

fn parse_cb_matrix(value: &serde_json::Value) -> Result<CostBenefitMatrix, WorkflowError> {
    let obj = value.as_object().ok_or_else(|| WorkflowError::BadParam {
        name: "cb.matrix".into(),
        message: "expected {classes, matrix}".into(),
    })?;
    let classes: Vec<String> = obj
        .get("classes")
        .and_then(|v| v.as_array())
        .map(|a| {
            a.iter()
                .filter_map(|v| v.as_str().map(str::to_string))
                .collect()
        })
        .unwrap_or_default();
    let matrix: Vec<Vec<f64>> = obj
        .get("matrix")
        .and_then(|v| v.as_array())
        .map(|rows| {
            rows.iter()
                .map(|r| {
                    r.as_array()
                        .map(|cells| cells.iter().filter_map(|c| c.as_f64()).collect())
                        .unwrap_or_default()
                })
                .collect()
        })
        .unwrap_or_default();
    CostBenefitMatrix::new(classes, matrix).map_err(|e| WorkflowError::BadParam {
        name: "cb.matrix".into(),
        message: e.to_string(),
    })
}

impl StandardParams {
    /// Parses the generic-workflow parameter map: `learner`, `learner.pars`,
    /// `predictor.pars`, `pre`, `pre.pars`, `post`, `post.pars`.
    pub fn from_params(params: &ParamMap) -> Result<StandardParams, WorkflowError> {
        let learner_name = params
            .get("learner")
            .and_then(|v| v.as_str())
            .ok_or_else(|| WorkflowError::BadParam {
                name: "learner".into(),
                message: "workflow needs a `learner` name".into(),
            })?;
        let learner_pars = as_map(params.get("learner.pars"), "learner.pars")?;
        let learner = LearnerSpec::parse(learner_name, &learner_pars)?;

        let predictor_pars = as_map(params.get("predictor.pars"), "predictor.pars")?;
        let out_shape = match predictor_pars.get("type").and_then(|v| v.as_str()) {
            None => None,
            Some("class") => Some(OutputShape::Labels),
            Some("prob") => Some(OutputShape::Probabilities),
            Some("response") => Some(OutputShape::Numeric),
            Some(other) => {
                return Err(WorkflowError::BadParam {
                    name: "predictor.pars.type".into(),
                    message: format!("unknown prediction type `{other}`"),
                })
            }
        };

        let pre_pars = as_map(params.get("pre.pars"), "pre.pars")?;
        let pre_names = match params.get("pre") {
            None => Vec::new(),
            Some(v) => string_list(v, "pre")?,
        };
        let mut pre = Vec::with_capacity(pre_names.len());
        for name in &pre_names {
            let step = match name.as_str() {
                "scale" => PreStep::Scale,
                "centralImp" => PreStep::CentralImp,
                "na.omit" => PreStep::NaOmit,
                "undersampl" => PreStep::Undersample {
                    perc_under: pre_pars
                        .get("perc.under")
                        .and_then(|v| v.as_f64())
                        .unwrap_or(1.0),
                },
                "smote" => PreStep::Smote {
                    perc_over: pre_pars
                        .get("perc.over")
                        .and_then(|v| v.as_f64())
                        .unwrap_or(200.0),
                    perc_under: pre_pars
                        .get("perc.under")
                        .and_then(|v| v.as_f64())
                        .unwrap_or(200.0),
                    k: pre_pars.get("k").and_then(|v| v.as_u64()).unwrap_or(5) as usize,
                },
                other => return Err(PrepostError::UnknownPre(other.to_string()).into()),
            };
            pre.push(step);
        }

        let post_pars = as_map(params.get("post.pars"), "post.pars")?;
        let post_names = match params.get("post") {
            None => Vec::new(),
            Some(v) => string_list(v, "post")?,
        };
        let mut post = Vec::with_capacity(post_names.len());
        for name in &post_names {
            let step = match name.as_str() {
                "na2central" => PostStep::Na2Central,
                "onlyPos" => PostStep::OnlyPos,
                "cast2int" => {
                    let inf = post_pars.get("infLim").and_then(|v| v.as_f64());
                    let sup = post_pars.get("supLim").and_then(|v| v.as_f64());
                    match (inf, sup) {
                        (Some(inf_lim), Some(sup_lim)) => PostStep::Cast2Int { inf_lim, sup_lim },
                        _ => {
                            return Err(WorkflowError::BadParam {
                                name: "post.pars".into(),
                                message: "cast2int needs infLim and supLim".into(),
                            })
                        }
                    }
                }
                "maxutil" => {
                    let cb = post_pars.get("cb.matrix").ok_or_else(|| {
                        WorkflowError::BadParam {
                            name: "post.pars".into(),
                            message: "maxutil needs cb.matrix".into(),
                        }
                    })?;
                    PostStep::MaxUtil {
                        cb_matrix: parse_cb_matrix(cb)?,
                    }
                }
                other => return Err(PrepostError::UnknownPost(other.to_string()).into()),
            };
            post.push(step);
        }

        Ok(StandardParams {
            learner,
            out_shape,
            pre,
            post,
        })
    }

    fn default_shape(&self, task_kind: TaskKind) -> OutputShape {
        self.out_shape.unwrap_or(match task_kind {
            TaskKind::Classification => OutputShape::Labels,
            _ => OutputShape::Numeric,
        })
    }
}

/// Applies a pre-processing chain to a train/test pair. Returns the
/// transformed frames plus the original positions of surviving test rows.
pub(crate) fn apply_pre_chain(
    steps: &[PreStep],
    train: &DataFrame,
    test: &DataFrame,
    target: &str,
    task_kind: TaskKind,
    rng: &mut ChaCha8Rng,
) -> Result<(DataFrame, DataFrame, Vec<usize>), WorkflowError> {
    let mut train = train.clone();
    let mut test = test.clone();
    let mut survivors: Vec<usize> = (0..test.n_rows()).collect();
    for step in steps {
        match step {
            PreStep::Scale => {
                let (tr, te) = pre_scale(&train, &test, target)?;
                train = tr;
                test = te;
            }
            PreStep::CentralImp => {
                let (tr, te) = pre_central_imp(&train, &test, target)?;
                train = tr;
                test = te;
            }
            PreStep::NaOmit => {
                let (tr, te, kept) = pre_na_omit(&train, &test)?;
                train = tr;
                test = te;
                survivors = kept.into_iter().map(|i| survivors[i]).collect();
            }
            PreStep::Undersample { perc_under } => {
                train = pre_undersample(&train, target, *perc_under, task_kind, rng)?;
            }
            PreStep::Smote {
                perc_over,
                perc_under,
                k,
            } => {
                let pars = SmotePars {
                    perc_over: *perc_over,
                    perc_under: *perc_under,
                    k: *k,
                };
                train = pre_smote(&train, target, &pars, task_kind, rng)?;
            }
        }
    }
    Ok((train, test, survivors))
}

/// Applies a post-processing chain; `train_target` supplies the central
/// statistics for na2central.
pub(crate) fn apply_post_chain(
    steps: &[PostStep],
    mut preds: Predictions,
    train_target: &Column,
) -> Result<Predictions, WorkflowError> {
    for step in steps {
        preds = match step {
            PostStep::Na2Central => post_na2central(&preds, train_target)?,
            PostStep::OnlyPos => post_only_pos(&preds)?,
            PostStep::Cast2Int { inf_lim, sup_lim } => {
                post_cast2int(&preds, *inf_lim, *sup_lim)?
            }
            PostStep::MaxUtil { cb_matrix } => post_maxutil(&preds, cb_matrix)?,
        };
    }
    Ok(preds)
}

/// Runs the standard workflow on one train/test pair: pre-process, fit,
/// predict, post-process.
///
/// The returned trues come from the test target as handed in (row-removing
/// pre steps restrict them to the surviving rows); the learner-facing
/// prediction path sees the test frame with the target column removed, so
/// no workflow can read test targets while fitting or predicting.
pub fn standard_wf(
    formula: &Formula,
    train: &DataFrame,
    test: &DataFrame,
    params: &StandardParams,
    task_kind: TaskKind,
    rng: &mut ChaCha8Rng,
) -> Result<WorkflowResult, WorkflowError> {
    if train.n_rows() == 0 {
        return Err(WorkflowError::EmptyData("train"));
    }
    if test.n_rows() == 0 {
        return Err(WorkflowError::EmptyData("test"));
    }
    let original_trues = test.column(&formula.target)?.clone();
    let (train_t, test_t, survivors) =
        apply_pre_chain(&params.pre, train, test, &formula.target, task_kind, rng)?;
    let trues = original_trues.take(&survivors);

    let shape = params.default_shape(task_kind);
    let fit_started = Instant::now();
    let model = fit_learner(&params.learner, formula, &train_t)?;
    let train_time = fit_started.elapsed().as_secs_f64();

    let masked_test = test_t.drop_column(&formula.target)?;
    let predict_started = Instant::now();
    let raw_preds = predict_model(&model, &masked_test, shape)?;
    let test_time = predict_started.elapsed().as_secs_f64();

    let train_target = train_t.column(&formula.target)?;
    let preds = apply_post_chain(&params.post, raw_preds, train_target)?;

    let result = WorkflowResult {
        trues,
        preds,
        times: WorkflowTimes {
            train: train_time,
            test: test_time,
        },
        extras: HashMap::new(),
    };
    result.validate()?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::parse_formula;
    use crate::rng::stream_rng;

    fn num_col(name: &str, v: &[f64]) -> Column {
        Column::numeric(name, v.iter().map(|&x| Some(x)).collect()).unwrap()
    }

    fn params_json(text: &str) -> StandardParams {
        let map: ParamMap = serde_json::from_str(text).unwrap();
        StandardParams::from_params(&map).unwrap()
    }

    #[test]
    fn knn_k1_train_equals_test_is_perfect() {
        let frame = DataFrame::new(vec![
            num_col("x", &[1.0, 2.0, 3.0]),
            Column::categorical("y", vec![Some("a"), Some("b"), Some("a")]),
        ])
        .unwrap();
        let params = params_json(r#"{"learner":"knn","learner.pars":{"k":1}}"#);
        let mut rng = stream_rng(0, &[0]);
        let res = standard_wf(
            &parse_formula("y ~ .").unwrap(),
            &frame,
            &frame,
            &params,
            TaskKind::Classification,
            &mut rng,
        )
        .unwrap();
        let expected: Vec<Option<String>> = vec![Some("a".into()), Some("b".into()), Some("a".into())];
        assert_eq!(res.preds, Predictions::Labels(expected));
    }

    #[test]
    fn linreg_with_imputation_and_scaling() {
        let train = DataFrame::new(vec![
            Column::numeric(
                "x",
                vec![Some(1.0), None, Some(3.0), Some(4.0), Some(5.0)],
            )
            .unwrap(),
            num_col("y", &[2.0, 4.0, 6.0, 8.0, 10.0]),
        ])
        .unwrap();
        let test = DataFrame::new(vec![
            Column::numeric("x", vec![Some(2.0), None]).unwrap(),
            num_col("y", &[4.0, 6.0]),
        ])
        .unwrap();
        let params = params_json(r#"{"learner":"linreg","pre":["centralImp","scale"]}"#);
        let mut rng = stream_rng(0, &[0]);
        let res = standard_wf(
            &parse_formula("y ~ .").unwrap(),
            &train,
            &test,
            &params,
            TaskKind::Regression,
            &mut rng,
        )
        .unwrap();
        match res.preds {
            Predictions::Numeric(v) => {
                assert_eq!(v.len(), 2);
                assert!(v.iter().all(|p| p.is_some()));
            }
            other => panic!("expected numeric predictions, got {other:?}"),
        }
    }

    #[test]
    fn na_omit_aligns_trues_with_survivors() {
        let train = DataFrame::new(vec![
            num_col("x", &[1.0, 2.0, 3.0]),
            num_col("y", &[1.0, 2.0, 3.0]),
        ])
        .unwrap();
        let test = DataFrame::new(vec![
            Column::numeric("x", vec![Some(1.0), None, Some(3.0)]).unwrap(),
            num_col("y", &[10.0, 20.0, 30.0]),
        ])
        .unwrap();
        let params = params_json(r#"{"learner":"linreg","pre":["na.omit"]}"#);
        let mut rng = stream_rng(0, &[0]);
        let res = standard_wf(
            &parse_formula("y ~ .").unwrap(),
            &train,
            &test,
            &params,
            TaskKind::Regression,
            &mut rng,
        )
        .unwrap();
        assert_eq!(res.trues.len(), 2);
        assert_eq!(res.trues.numeric_at(0), Some(10.0));
        assert_eq!(res.trues.numeric_at(1), Some(30.0));
        assert_eq!(res.preds.len(), 2);
    }

    #[test]
    fn smote_on_regression_is_a_workflow_error() {
        let frame = DataFrame::new(vec![
            num_col("x", &[1.0, 2.0, 3.0]),
            num_col("y", &[1.0, 2.0, 3.0]),
        ])
        .unwrap();
        let params = params_json(r#"{"learner":"linreg","pre":["smote"]}"#);
        let mut rng = stream_rng(0, &[0]);
        let err = standard_wf(
            &parse_formula("y ~ .").unwrap(),
            &frame,
            &frame,
            &params,
            TaskKind::Regression,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, WorkflowError::Prepost(_)));
    }

    #[test]
    fn maxutil_post_requires_probability_shape() {
        let frame = DataFrame::new(vec![
            num_col("x", &[0.0, 1.0, 2.0, 3.0]),
            Column::categorical(
                "y",
                vec![Some("a"), Some("a"), Some("b"), Some("b")],
            ),
        ])
        .unwrap();
        let params = params_json(
            r#"{"learner":"knn","learner.pars":{"k":2},
                "predictor.pars":{"type":"prob"},
                "post":["maxutil"],
                "post.pars":{"cb.matrix":{"classes":["a","b"],
                                          "matrix":[[1,-1],[-1,1]]}}}"#,
        );
        let mut rng = stream_rng(0, &[0]);
        let res = standard_wf(
            &parse_formula("y ~ .").unwrap(),
            &frame,
            &frame,
            &params,
            TaskKind::Classification,
            &mut rng,
        )
        .unwrap();
        assert!(matches!(res.preds, Predictions::Labels(_)));
    }

    #[test]
    fn unknown_pre_step_rejected_at_parse() {
        let map: ParamMap =
            serde_json::from_str(r#"{"learner":"linreg","pre":["mystery"]}"#).unwrap();
        assert!(StandardParams::from_params(&map).is_err());
    }
}
