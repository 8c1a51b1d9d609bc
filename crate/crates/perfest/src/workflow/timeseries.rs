//! The generic time-series workflow: sliding and growing windows with a
//! configurable relearn step.
//!
//! The test rows are walked in time order. The model is refitted at test
//! offsets 0, s, 2s, ... (s = relearn step); between refits the current
//! model predicts the upcoming rows. A refit at offset j may use the true
//! target values of the j test rows already consumed: at that point in the
//! walk they are past observations.

use std::collections::HashMap;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frame::{DataFrame, Formula, TaskKind};
use crate::workflow::standard::{apply_post_chain, apply_pre_chain};
use crate::workflow::{
    fit_learner, predict_model, ParamMap, Predictions, StandardParams, WorkflowError,
    WorkflowResult, WorkflowTimes,
};

/// Refit window policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Every refit uses the last L observations, L = initial train length.
    Slide,
    /// Every refit uses all observations from the start of training on.
    Grow,
}

/// Parsed parameters of the time-series workflow.
#[derive(Debug, Clone)]
pub struct TimeseriesParams {
    pub window: WindowKind,
    pub relearn_step: usize,
    pub base: StandardParams,
}

impl TimeseriesParams {
    pub fn from_params(params: &ParamMap) -> Result<TimeseriesParams, WorkflowError> {
        let window = match params.get("type").and_then(|v| v.as_str()) {
            Some("slide") => WindowKind::Slide,
            Some("grow") => WindowKind::Grow,
            other => {
                return Err(WorkflowError::BadParam {
                    name: "type".into(),
                    message: format!("expected \"slide\" or \"grow\", got {other:?}"),
                })
            }
        };
        let relearn_step = params
            .get("relearn.step")
            .and_then(|v| v.as_u64())
            .unwrap_or(1) as usize;
        if relearn_step < 1 {
            return Err(WorkflowError::BadParam {
                name: "relearn.step".into(),
                message: "must be >= 1".into(),
            });
        }
        Ok(TimeseriesParams {
            window,
            relearn_step,
            base: StandardParams::from_params(params)?,
        })
    }
}

fn concat_preds(chunks: Vec<Predictions>) -> Result<Predictions, WorkflowError> {
    let mut out: Option<Predictions> = None;
    for chunk in chunks {
        out = Some(match (out, chunk) {
            (None, c) => c,
            (Some(Predictions::Numeric(mut a)), Predictions::Numeric(b)) => {
                a.extend(b);
                Predictions::Numeric(a)
            }
            (Some(Predictions::Labels(mut a)), Predictions::Labels(b)) => {
                a.extend(b);
                Predictions::Labels(a)
            }
            (
                Some(Predictions::Probabilities {
                    class_order,
                    mut rows,
                }),
                Predictions::Probabilities {
                    class_order: other_order,
                    rows: other_rows,
                },
            ) if class_order == other_order => {
                rows.extend(other_rows);
                Predictions::Probabilities { class_order, rows }
            }
            _ => {
                return Err(WorkflowError::ContractViolation {
                    plugin: "timeseriesWF".into(),
                    message: "refits produced incompatible prediction shapes".into(),
                })
            }
        });
    }
    Ok(out.unwrap_or(Predictions::Numeric(Vec::new())))
}

/// Runs the time-series workflow; `train` and `test` must be time ordered
/// with every test row after the last train row.
pub fn timeseries_wf(
    formula: &Formula,
    train: &DataFrame,
    test: &DataFrame,
    params: &TimeseriesParams,
    task_kind: TaskKind,
    rng: &mut ChaCha8Rng,
) -> Result<WorkflowResult, WorkflowError> {
    if train.n_rows() == 0 {
        return Err(WorkflowError::EmptyData("train"));
    }
    if test.n_rows() == 0 {
        return Err(WorkflowError::EmptyData("test"));
    }
    let window_len = train.n_rows();
    let n_test = test.n_rows();
    let step = params.relearn_step;
    let original_trues = test.column(&formula.target)?.clone();

    // Train followed by the test rows, so window slicing is index math.
    let combined = train.concat_rows(test)?;

    let mut times = WorkflowTimes::default();
    let mut chunk_preds = Vec::new();
    let mut surviving: Vec<usize> = Vec::new();
    let mut refit_offsets = Vec::new();
    let mut refit_window_rows = Vec::new();

    let mut offset = 0usize;
    while offset < n_test {
        let chunk_end = (offset + step).min(n_test);
        let window_rows: Vec<usize> = match params.window {
            WindowKind::Slide => (offset..window_len + offset).collect(),
            WindowKind::Grow => (0..window_len + offset).collect(),
        };
        refit_offsets.push(offset);
        refit_window_rows.push(window_rows.len());

        let fit_frame = combined.select_rows(&window_rows)?;
        let chunk_rows: Vec<usize> = (window_len + offset..window_len + chunk_end).collect();
        let chunk_frame = combined.select_rows(&chunk_rows)?;

        let (fit_t, chunk_t, kept) = apply_pre_chain(
            &params.base.pre,
            &fit_frame,
            &chunk_frame,
            &formula.target,
            task_kind,
            rng,
        )?;
        for &local in &kept {
            surviving.push(offset + local);
        }

        let shape = params.base.out_shape.unwrap_or(match task_kind {
            TaskKind::Classification => crate::workflow::OutputShape::Labels,
            _ => crate::workflow::OutputShape::Numeric,
        });
        let fit_started = Instant::now();
        let model = fit_learner(&params.base.learner, formula, &fit_t)?;
        times.train += fit_started.elapsed().as_secs_f64();

        let masked = chunk_t.drop_column(&formula.target)?;
        let predict_started = Instant::now();
        let raw = predict_model(&model, &masked, shape)?;
        times.test += predict_started.elapsed().as_secs_f64();

        let fit_target = fit_t.column(&formula.target)?;
        chunk_preds.push(apply_post_chain(&params.base.post, raw, fit_target)?);

        offset = chunk_end;
    }

    let preds = concat_preds(chunk_preds)?;
    let trues = original_trues.take(&surviving);
    let mut extras = HashMap::new();
    extras.insert(
        "refit_offsets".to_string(),
        serde_json::json!(refit_offsets),
    );
    extras.insert(
        "refit_window_rows".to_string(),
        serde_json::json!(refit_window_rows),
    );
    let result = WorkflowResult {
        trues,
        preds,
        times,
        extras,
    };
    result.validate()?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{parse_formula, Column};
    use crate::rng::stream_rng;
    use crate::workflow::standard::standard_wf;

    fn series(n: usize) -> DataFrame {
        // A noiseless trend so linreg extrapolates cleanly.
        let x: Vec<Option<f64>> = (0..n).map(|i| Some(i as f64)).collect();
        let y: Vec<Option<f64>> = (0..n).map(|i| Some(2.0 * i as f64 + 1.0)).collect();
        DataFrame::new(vec![
            Column::numeric("x", x).unwrap(),
            Column::numeric("y", y).unwrap(),
        ])
        .unwrap()
    }

    fn ts_params(kind: &str, step: usize) -> TimeseriesParams {
        let text = format!(
            r#"{{"type":"{kind}","relearn.step":{step},"learner":"linreg"}}"#
        );
        let map: ParamMap = serde_json::from_str(&text).unwrap();
        TimeseriesParams::from_params(&map).unwrap()
    }

    fn split(frame: &DataFrame, at: usize) -> (DataFrame, DataFrame) {
        let n = frame.n_rows();
        (
            frame.select_rows(&(0..at).collect::<Vec<_>>()).unwrap(),
            frame.select_rows(&(at..n).collect::<Vec<_>>()).unwrap(),
        )
    }

    fn extras_usize_list(res: &WorkflowResult, key: &str) -> Vec<usize> {
        res.extras[key]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap() as usize)
            .collect()
    }

    #[test]
    fn refit_counts_follow_ceil_rule() {
        // Oracle: number of refits = ceil(n_test / step).
        let data = series(75);
        let (train, test) = split(&data, 50); // 25 test rows
        let mut rng = stream_rng(0, &[0]);
        let res = timeseries_wf(
            &parse_formula("y ~ x").unwrap(),
            &train,
            &test,
            &ts_params("slide", 30),
            TaskKind::TimeseriesRegression,
            &mut rng,
        )
        .unwrap();
        assert_eq!(extras_usize_list(&res, "refit_offsets"), vec![0]);

        let mut rng = stream_rng(0, &[0]);
        let res = timeseries_wf(
            &parse_formula("y ~ x").unwrap(),
            &train,
            &test,
            &ts_params("slide", 10),
            TaskKind::TimeseriesRegression,
            &mut rng,
        )
        .unwrap();
        assert_eq!(extras_usize_list(&res, "refit_offsets"), vec![0, 10, 20]);
    }

    #[test]
    fn window_sizes_per_refit() {
        let data = series(40);
        let (train, test) = split(&data, 30); // L=30, F=10
        let formula = parse_formula("y ~ x").unwrap();

        let mut rng = stream_rng(0, &[0]);
        let slide = timeseries_wf(
            &formula,
            &train,
            &test,
            &ts_params("slide", 3),
            TaskKind::TimeseriesRegression,
            &mut rng,
        )
        .unwrap();
        // Slide: every fit window has exactly L rows.
        assert_eq!(
            extras_usize_list(&slide, "refit_window_rows"),
            vec![30, 30, 30, 30]
        );

        let mut rng = stream_rng(0, &[0]);
        let grow = timeseries_wf(
            &formula,
            &train,
            &test,
            &ts_params("grow", 3),
            TaskKind::TimeseriesRegression,
            &mut rng,
        )
        .unwrap();
        // Grow: fit at offset j uses L + j rows.
        assert_eq!(
            extras_usize_list(&grow, "refit_window_rows"),
            vec![30, 33, 36, 39]
        );
    }

    #[test]
    fn large_relearn_step_equals_standard_wf() {
        let data = series(60);
        let (train, test) = split(&data, 45);
        let formula = parse_formula("y ~ x").unwrap();
        let map: ParamMap = serde_json::from_str(r#"{"learner":"linreg"}"#).unwrap();
        let std_params = StandardParams::from_params(&map).unwrap();

        let mut rng = stream_rng(0, &[0]);
        let standard = standard_wf(
            &formula,
            &train,
            &test,
            &std_params,
            TaskKind::TimeseriesRegression,
            &mut rng,
        )
        .unwrap();
        for kind in ["slide", "grow"] {
            let mut rng = stream_rng(0, &[0]);
            let ts = timeseries_wf(
                &formula,
                &train,
                &test,
                &ts_params(kind, 100),
                TaskKind::TimeseriesRegression,
                &mut rng,
            )
            .unwrap();
            assert_eq!(ts.preds, standard.preds, "{kind}");
            assert_eq!(ts.trues, standard.trues, "{kind}");
        }
    }

    #[test]
    fn predictions_stay_in_test_order() {
        let data = series(30);
        let (train, test) = split(&data, 20);
        let mut rng = stream_rng(0, &[0]);
        let res = timeseries_wf(
            &parse_formula("y ~ x").unwrap(),
            &train,
            &test,
            &ts_params("grow", 4),
            TaskKind::TimeseriesRegression,
            &mut rng,
        )
        .unwrap();
        assert_eq!(res.preds.len(), 10);
        // Exact fit: predictions reproduce the trend in order.
        match &res.preds {
            Predictions::Numeric(v) => {
                for (i, p) in v.iter().enumerate() {
                    let want = 2.0 * (20 + i) as f64 + 1.0;
                    assert!((p.unwrap() - want).abs() < 1e-6, "row {i}");
                }
            }
            _ => unreachable!(),
        }
    }
}
