//! End-to-end engine runs exercising the pathways the unit tests reach
//! only in isolation: Monte Carlo windows with time-series workflows and
//! theil, holdout, user evaluators, user workflow plugins and trainReq.

use std::collections::HashMap;
use std::sync::Arc;

use perfest::engine::{
    performance_estimation, EstimationMethod, EstimationTask, ExperimentOptions, NoProgress,
};
use perfest::frame::{
    make_task, parse_formula, response_values, Column, ColumnData, DataFrame, PredTask,
    TaskOptions,
};
use perfest::metrics::{MetricEvaluator, ScoreVector};
use perfest::resampling::{
    BootstrapKind, BootstrapSettings, CvSettings, HoldoutSettings, MonteCarloSettings, WindowSize,
};
use perfest::workflow::{
    ParamMap, PluginContext, Predictions, UserWorkflow, Workflow, WorkflowKind, WorkflowResult,
    WorkflowTimes,
};

fn wf(id: &str, params: &str) -> Workflow {
    let params: ParamMap = serde_json::from_str(params).unwrap();
    let kind = Workflow::infer_kind(&params);
    Workflow::new(id, kind, params)
}

fn series_task(n: usize) -> PredTask {
    let x: Vec<Option<f64>> = (0..n).map(|i| Some(i as f64)).collect();
    let y: Vec<Option<f64>> = (0..n)
        .map(|i| Some(0.5 * i as f64 + (i as f64 * 0.7).sin() * 3.0))
        .collect();
    let frame = Arc::new(
        DataFrame::new(vec![
            Column::numeric("x", x).unwrap(),
            Column::numeric("y", y).unwrap(),
        ])
        .unwrap(),
    );
    make_task(
        parse_formula("y ~ .").unwrap(),
        &frame,
        TaskOptions {
            id: Some("series".to_string()),
            copy: false,
            time_ordered: true,
        },
    )
    .unwrap()
}

#[test]
fn monte_carlo_with_sliding_and_growing_windows() {
    let task = series_task(200);
    let workflows = vec![
        wf("standLM", r#"{"learner":"linreg"}"#),
        wf(
            "slideLM",
            r#"{"learner":"linreg","type":"slide","relearn.step":10}"#,
        ),
        wf(
            "growLM",
            r#"{"learner":"linreg","type":"grow","relearn.step":10}"#,
        ),
    ];
    let est = EstimationTask::new(
        &["mse", "theil"],
        EstimationMethod::MonteCarlo(MonteCarloSettings {
            n_reps: 5,
            sz_train: WindowSize::Fraction(0.5),
            sz_test: WindowSize::Fraction(0.25),
            ..MonteCarloSettings::default()
        }),
    );
    let res = performance_estimation(
        &[task],
        &workflows,
        &est,
        &ExperimentOptions::default(),
        &NoProgress,
    )
    .unwrap();
    for wi in 0..3 {
        assert_eq!(res.records[0][wi].len(), 5);
        assert_eq!(res.invalid_count(0, wi), 0);
        for record in &res.records[0][wi] {
            let scores = record.scores.as_ref().unwrap();
            assert!(scores.get("mse").is_some());
            let theil = scores.get("theil").unwrap();
            assert!(theil.is_finite() && theil >= 0.0);
        }
    }
}

#[test]
fn theil_outside_monte_carlo_is_rejected_upfront() {
    let task = series_task(50);
    let est = EstimationTask::new(
        &["theil"],
        EstimationMethod::Cv(CvSettings::default()),
    );
    let err = performance_estimation(
        &[task],
        &[wf("lm", r#"{"learner":"linreg"}"#)],
        &est,
        &ExperimentOptions::default(),
        &NoProgress,
    )
    .unwrap_err();
    assert!(err.to_string().contains("MonteCarlo"));
}

#[test]
fn holdout_and_e0_bootstrap_paths() {
    let task = series_task(80);
    let holdout_est = EstimationTask::new(
        &["mae", "totTime"],
        EstimationMethod::Holdout(HoldoutSettings {
            n_reps: 3,
            hld_sz: 0.3,
            ..HoldoutSettings::default()
        }),
    );
    let res = performance_estimation(
        std::slice::from_ref(&task),
        &[wf("lm", r#"{"learner":"linreg"}"#)],
        &holdout_est,
        &ExperimentOptions::default(),
        &NoProgress,
    )
    .unwrap();
    assert_eq!(res.records[0][0].len(), 3);
    for record in &res.records[0][0] {
        let scores = record.scores.as_ref().unwrap();
        assert!(scores.get("totTime").unwrap() >= 0.0);
    }

    let e0_est = EstimationTask::new(
        &["mae"],
        EstimationMethod::Bootstrap(BootstrapSettings {
            kind: BootstrapKind::E0,
            n_reps: 25,
            ..BootstrapSettings::default()
        }),
    );
    let res = performance_estimation(
        &[task],
        &[wf("mean", r#"{"learner":"meanBaseline"}"#)],
        &e0_est,
        &ExperimentOptions::default(),
        &NoProgress,
    )
    .unwrap();
    assert_eq!(res.records[0][0].len(), 25);
    assert_eq!(res.invalid_count(0, 0), 0);
}

#[test]
fn nmse_requires_and_receives_the_train_target() {
    let task = series_task(60);
    // nmse pulls the training target through the engine automatically.
    let est = EstimationTask::new(
        &["nmse", "mse"],
        EstimationMethod::Cv(CvSettings {
            n_folds: 5,
            ..CvSettings::default()
        }),
    );
    let res = performance_estimation(
        &[task],
        &[wf("mean", r#"{"learner":"meanBaseline"}"#)],
        &est,
        &ExperimentOptions::default(),
        &NoProgress,
    )
    .unwrap();
    for record in &res.records[0][0] {
        let nmse = record.scores.as_ref().unwrap().get("nmse").unwrap();
        // The train-mean predictor sits near 1 by construction; shuffled
        // folds move it around but it must be positive and finite.
        assert!(nmse.is_finite() && nmse > 0.0);
    }
}

struct SpreadEvaluator;

impl MetricEvaluator for SpreadEvaluator {
    fn declared(&self) -> Vec<String> {
        vec!["spread".to_string()]
    }

    fn evaluate(
        &self,
        trues: &Column,
        _preds: &Predictions,
        train_target: Option<&[f64]>,
        _pars: &ParamMap,
    ) -> Result<ScoreVector, String> {
        // Needs the training target: errors loudly when absent, which
        // proves the trainReq pathway delivered it.
        let train = train_target.ok_or("train target missing")?;
        let train_mean = train.iter().sum::<f64>() / train.len() as f64;
        let value = match &trues.data {
            ColumnData::Numeric(v) => {
                let vals: Vec<f64> = v.iter().flatten().copied().collect();
                vals.iter().map(|t| (t - train_mean).abs()).sum::<f64>() / vals.len() as f64
            }
            _ => return Err("numeric target expected".to_string()),
        };
        Ok(ScoreVector::new(
            vec!["spread".to_string()],
            vec![Some(value)],
        ))
    }
}

#[test]
fn user_evaluator_with_train_req() {
    let task = series_task(40);
    let mut opts = ExperimentOptions::default();
    opts.evaluator_registry
        .register("spread", Arc::new(SpreadEvaluator));
    let est = EstimationTask {
        metrics: vec!["spread".to_string()],
        method: EstimationMethod::Cv(CvSettings {
            n_folds: 4,
            ..CvSettings::default()
        }),
        evaluator: Some("spread".to_string()),
        evaluator_pars: ParamMap::new(),
        train_req: true,
    };
    let res = performance_estimation(
        &[task],
        &[wf("lm", r#"{"learner":"linreg"}"#)],
        &est,
        &opts,
        &NoProgress,
    )
    .unwrap();
    assert_eq!(res.invalid_count(0, 0), 0);
    for record in &res.records[0][0] {
        assert!(record.scores.as_ref().unwrap().get("spread").unwrap() > 0.0);
    }
}

#[test]
fn pow_err_evaluator_through_the_engine() {
    let task = series_task(40);
    let mut pars = ParamMap::new();
    pars.insert("pow".to_string(), serde_json::json!(4));
    let est = EstimationTask {
        metrics: vec!["pow.err".to_string()],
        method: EstimationMethod::Cv(CvSettings {
            n_folds: 4,
            ..CvSettings::default()
        }),
        evaluator: Some("powErr".to_string()),
        evaluator_pars: pars,
        train_req: false,
    };
    let res = performance_estimation(
        &[task],
        &[wf("lm", r#"{"learner":"linreg"}"#)],
        &est,
        &ExperimentOptions::default(),
        &NoProgress,
    )
    .unwrap();
    assert_eq!(res.invalid_count(0, 0), 0);
    // Even powers are non-negative.
    for record in &res.records[0][0] {
        assert!(record.scores.as_ref().unwrap().get("pow.err").unwrap() >= 0.0);
    }
}

/// A user workflow: predicts the training-target mean, like the built-in
/// baseline but arriving through the plugin interface.
struct MeanPlugin;

impl UserWorkflow for MeanPlugin {
    fn run(&self, ctx: &PluginContext<'_>) -> Result<WorkflowResult, String> {
        let train_target =
            response_values(ctx.formula, ctx.train).map_err(|e| e.to_string())?;
        let values: Vec<f64> = match &train_target.data {
            ColumnData::Numeric(v) => v.iter().flatten().copied().collect(),
            _ => return Err("numeric target expected".to_string()),
        };
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let trues = response_values(ctx.formula, ctx.test).map_err(|e| e.to_string())?;
        let preds = Predictions::Numeric(vec![Some(mean); trues.len()]);
        Ok(WorkflowResult {
            trues,
            preds,
            times: WorkflowTimes::default(),
            extras: HashMap::new(),
        })
    }
}

#[test]
fn user_workflow_plugin_matches_builtin_baseline() {
    let task = series_task(60);
    let mut opts = ExperimentOptions::default();
    opts.workflow_registry.register("meanPlugin", Arc::new(MeanPlugin));
    let workflows = vec![
        Workflow::new(
            "viaPlugin",
            WorkflowKind::Plugin("meanPlugin".to_string()),
            ParamMap::new(),
        ),
        wf("builtin", r#"{"learner":"meanBaseline"}"#),
    ];
    let est = EstimationTask::new(
        &["mae"],
        EstimationMethod::Cv(CvSettings {
            n_folds: 6,
            ..CvSettings::default()
        }),
    );
    let res =
        performance_estimation(&[task], &workflows, &est, &opts, &NoProgress).unwrap();
    for (a, b) in res.records[0][0].iter().zip(&res.records[0][1]) {
        assert_eq!(
            a.scores.as_ref().unwrap().get("mae"),
            b.scores.as_ref().unwrap().get("mae"),
            "plugin and builtin baseline disagree"
        );
    }
}

#[test]
fn unregistered_plugin_is_rejected_before_execution() {
    let task = series_task(30);
    let workflows = vec![Workflow::new(
        "ghost",
        WorkflowKind::Plugin("ghost".to_string()),
        ParamMap::new(),
    )];
    let est = EstimationTask::new(
        &["mae"],
        EstimationMethod::Cv(CvSettings::default()),
    );
    let err = performance_estimation(
        &[task],
        &workflows,
        &est,
        &ExperimentOptions::default(),
        &NoProgress,
    )
    .unwrap_err();
    assert!(err.to_string().contains("ghost"));
}

#[test]
fn dot632_bootstrap_runs_end_to_end() {
    let task = series_task(50);
    let est = EstimationTask::new(
        &["mae"],
        EstimationMethod::Bootstrap(BootstrapSettings {
            kind: BootstrapKind::Dot632,
            n_reps: 15,
            ..BootstrapSettings::default()
        }),
    );
    let res = performance_estimation(
        &[task],
        &[wf("lm", r#"{"learner":"linreg"}"#)],
        &est,
        &ExperimentOptions::default(),
        &NoProgress,
    )
    .unwrap();
    assert_eq!(res.records[0][0].len(), 15);
    assert_eq!(res.invalid_count(0, 0), 0);
}

/// A plugin that opts out of concurrent execution; its iterations must
/// run serially yet produce the same records as a safe twin.
struct SerialOnlyPlugin;

impl UserWorkflow for SerialOnlyPlugin {
    fn run(&self, ctx: &PluginContext<'_>) -> Result<WorkflowResult, String> {
        MeanPlugin.run(ctx)
    }

    fn concurrency_safe(&self) -> bool {
        false
    }
}

#[test]
fn concurrency_unsafe_plugin_runs_serially_with_identical_results() {
    let task = series_task(50);
    let mut opts = ExperimentOptions::default();
    opts.workflow_registry.register("serialOnly", Arc::new(SerialOnlyPlugin));
    opts.workflow_registry.register("meanPlugin", Arc::new(MeanPlugin));
    let workflows = vec![
        Workflow::new(
            "unsafeOne",
            WorkflowKind::Plugin("serialOnly".to_string()),
            ParamMap::new(),
        ),
        Workflow::new(
            "safeOne",
            WorkflowKind::Plugin("meanPlugin".to_string()),
            ParamMap::new(),
        ),
    ];
    let est = EstimationTask::new(
        &["mae"],
        EstimationMethod::Cv(CvSettings {
            n_folds: 5,
            ..CvSettings::default()
        }),
    );
    opts.cluster = perfest::engine::Cluster::Workers(4);
    let res = performance_estimation(&[task], &workflows, &est, &opts, &NoProgress).unwrap();
    for (a, b) in res.records[0][0].iter().zip(&res.records[0][1]) {
        assert_eq!(a.scores, b.scores, "identical plugins must score alike");
        assert!(!a.invalid);
    }
}
