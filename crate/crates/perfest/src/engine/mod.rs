//! Experiment orchestration.
//!
//! For every task a split plan is generated once from the estimation
//! method's seed and shared by all workflows, so paired comparisons use
//! identical folds. Workflow failures never abort an experiment: they
//! become invalid iteration records with the error message preserved.
//!
//! Determinism: splits are computed before any dispatch, and per-iteration
//! randomness draws from a stream keyed by (seed, task, iteration) — not
//! by workflow, and not by scheduling — so results are bit-identical with
//! one worker or many.

mod results;

pub use results::{
    load_results, results_from_json, results_to_json, save_results, ComparisonResults,
    IterationRecord, Provenance, ResultsError, SplitInfo, TaskDescriptor,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{ColumnData, PredTask, TaskKind};
use crate::metrics::{
    classification_metrics, metric_needs_train_target, regression_metrics, run_evaluator,
    time_metrics, EvaluatorRegistry, MetricRequest, ScoreVector, TrainContext,
    CLASSIFICATION_METRICS, REGRESSION_METRICS, TIME_METRICS,
};
use crate::prepost::CostBenefitMatrix;
use crate::resampling::{
    bootstrap_splits, cv_splits, holdout_splits, loocv_splits, monte_carlo_splits,
    strat_labels_for_target, BootstrapKind, BootstrapSettings, CvSettings, HoldoutSettings,
    LoocvSettings, MonteCarloSettings, SplitError, SplitIteration, SplitPlan,
};
use crate::rng::stream_rng;
use crate::workflow::{
    run_workflow, ParamMap, Workflow, WorkflowKind, WorkflowRegistry, WorkflowTimes,
};

/// Stream tag for the full-data resubstitution fit of the .632 bootstrap.
const RESUB_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no predictive tasks given")]
    NoTasks,
    #[error("no workflows given")]
    NoWorkflows,
    #[error("duplicate workflow id `{0}`")]
    DuplicateWorkflow(String),
    #[error("duplicate task id `{0}`")]
    DuplicateTask(String),
    #[error("metric `{metric}` is not applicable to task `{task}` ({kind})")]
    IncompatibleMetric {
        metric: String,
        task: String,
        kind: TaskKind,
    },
    #[error("metric `theil` requires the MonteCarlo estimation method")]
    TheilNeedsMonteCarlo,
    #[error("unknown metric `{0}` (and no evaluator declares it)")]
    UnknownMetric(String),
    #[error("evaluator `{0}` is not registered")]
    UnknownEvaluator(String),
    #[error("workflow plugin `{0}` is not registered")]
    UnknownWorkflowPlugin(String),
    #[error("split generation failed for task `{task}`: {source}")]
    Split {
        task: String,
        #[source]
        source: SplitError,
    },
}

/// The five estimation methodologies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum EstimationMethod {
    #[serde(rename = "CV")]
    Cv(CvSettings),
    #[serde(rename = "Holdout")]
    Holdout(HoldoutSettings),
    #[serde(rename = "Bootstrap")]
    Bootstrap(BootstrapSettings),
    #[serde(rename = "LOOCV")]
    Loocv(LoocvSettings),
    #[serde(rename = "MonteCarlo")]
    MonteCarlo(MonteCarloSettings),
}

impl EstimationMethod {
    pub fn seed(&self) -> u64 {
        match self {
            EstimationMethod::Cv(s) => s.seed,
            EstimationMethod::Holdout(s) => s.seed,
            EstimationMethod::Bootstrap(s) => s.seed,
            EstimationMethod::Loocv(s) => s.seed,
            EstimationMethod::MonteCarlo(s) => s.seed,
        }
    }

    /// Whether splits preserve time order (train strictly before test).
    pub fn is_time_ordered(&self) -> bool {
        matches!(self, EstimationMethod::MonteCarlo(_))
    }

    /// Upper-case family name for banners and reports.
    pub fn family_name(&self) -> &'static str {
        match self {
            EstimationMethod::Cv(_) => "CROSS VALIDATION",
            EstimationMethod::Holdout(_) => "HOLDOUT",
            EstimationMethod::Bootstrap(_) => "BOOTSTRAP",
            EstimationMethod::Loocv(_) => "LEAVE ONE OUT CROSS VALIDATION",
            EstimationMethod::MonteCarlo(_) => "MONTE CARLO",
        }
    }

    fn wants_strat(&self) -> bool {
        match self {
            EstimationMethod::Cv(s) => s.strat,
            EstimationMethod::Holdout(s) => s.strat,
            _ => false,
        }
    }

    /// Generates the split plan for a task of `n` rows.
    pub fn splits(&self, task: &PredTask) -> Result<SplitPlan, SplitError> {
        let n = task.n_rows();
        let labels = if self.wants_strat() {
            let target = task.data().column(&task.formula.target).map_err(|_| {
                SplitError::InvalidSetting("target column missing".to_string())
            })?;
            let n_folds = match self {
                EstimationMethod::Cv(s) => s.n_folds,
                _ => 10,
            };
            strat_labels_for_target(target, n_folds)
        } else {
            None
        };
        match self {
            EstimationMethod::Cv(s) => cv_splits(n, labels.as_ref(), s),
            EstimationMethod::Holdout(s) => holdout_splits(n, labels.as_ref(), s),
            EstimationMethod::Bootstrap(s) => bootstrap_splits(n, s),
            EstimationMethod::Loocv(s) => loocv_splits(n, s),
            EstimationMethod::MonteCarlo(s) => monte_carlo_splits(n, s),
        }
    }
}

/// The estimation task: which metrics to estimate and how.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationTask {
    pub metrics: Vec<String>,
    pub method: EstimationMethod,
    /// Optional user evaluator id for the non-time metrics.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub evaluator: Option<String>,
    /// Shared metric parameters (posClass, beta, cb.matrix, evaluator
    /// specifics).
    #[serde(rename = "evaluatorPars", default)]
    pub evaluator_pars: ParamMap,
    /// Pass the training target to evaluators even when no built-in
    /// metric needs it.
    #[serde(rename = "trainReq", default)]
    pub train_req: bool,
}

impl EstimationTask {
    pub fn new(metrics: &[&str], method: EstimationMethod) -> Self {
        EstimationTask {
            metrics: metrics.iter().map(|s| s.to_string()).collect(),
            method,
            evaluator: None,
            evaluator_pars: ParamMap::new(),
            train_req: false,
        }
    }

    fn metric_request(&self, names: Vec<String>) -> MetricRequest {
        MetricRequest {
            names,
            pos_class: self
                .evaluator_pars
                .get("posClass")
                .and_then(|v| v.as_str())
                .map(str::to_string),
            beta: self.evaluator_pars.get("beta").and_then(|v| v.as_f64()),
            cb_matrix: self
                .evaluator_pars
                .get("cb.matrix")
                .and_then(|v| serde_json::from_value::<CbRepr>(v.clone()).ok())
                .and_then(|r| CostBenefitMatrix::new(r.classes, r.matrix).ok()),
        }
    }

    fn needs_train_target(&self) -> bool {
        self.train_req || self.metrics.iter().any(|m| metric_needs_train_target(m))
    }
}

#[derive(Deserialize)]
struct CbRepr {
    classes: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

/// Parallelism setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub enum Cluster {
    #[default]
    Off,
    Auto,
    Workers(usize),
}


impl Cluster {
    /// Worker count: `auto` uses half the available cores.
    pub fn workers(&self) -> usize {
        match self {
            Cluster::Off => 1,
            Cluster::Auto => {
                let cores = std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(2);
                (cores / 2).max(1)
            }
            Cluster::Workers(n) => (*n).max(1),
        }
    }
}

/// Progress events emitted while an experiment runs.
#[derive(Debug, Clone)]
pub enum ProgressEvent {
    ExperimentStart {
        method: String,
    },
    TaskStart {
        task: String,
    },
    WorkflowStart {
        workflow: String,
        descriptor: String,
        metrics: Vec<String>,
        seed: u64,
    },
    Parallel {
        workers: usize,
    },
    Iteration {
        index: usize,
        total: usize,
    },
    WorkflowDone,
}

/// Receives progress events; implementations must tolerate concurrent
/// calls when the experiment runs on multiple workers.
pub trait ProgressSink: Sync {
    fn on_event(&self, event: &ProgressEvent);
}

/// Ignores every event.
pub struct NoProgress;

impl ProgressSink for NoProgress {
    fn on_event(&self, _event: &ProgressEvent) {}
}

/// Execution options for [`performance_estimation`].
pub struct ExperimentOptions {
    pub cluster: Cluster,
    pub workflow_registry: WorkflowRegistry,
    pub evaluator_registry: EvaluatorRegistry,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            cluster: Cluster::Off,
            workflow_registry: WorkflowRegistry::new(),
            evaluator_registry: EvaluatorRegistry::with_builtins(),
        }
    }
}

fn validate(
    tasks: &[PredTask],
    workflows: &[Workflow],
    est: &EstimationTask,
    opts: &ExperimentOptions,
) -> Result<(), EngineError> {
    if tasks.is_empty() {
        return Err(EngineError::NoTasks);
    }
    if workflows.is_empty() {
        return Err(EngineError::NoWorkflows);
    }
    let mut seen = std::collections::HashSet::new();
    for w in workflows {
        if !seen.insert(&w.id) {
            return Err(EngineError::DuplicateWorkflow(w.id.clone()));
        }
        if let WorkflowKind::Plugin(id) = &w.kind {
            if !opts.workflow_registry.contains(id) {
                return Err(EngineError::UnknownWorkflowPlugin(id.clone()));
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    for t in tasks {
        if !seen.insert(&t.id) {
            return Err(EngineError::DuplicateTask(t.id.clone()));
        }
    }

    let declared_by_evaluator: Vec<String> = match &est.evaluator {
        Some(id) => opts
            .evaluator_registry
            .get(id)
            .ok_or_else(|| EngineError::UnknownEvaluator(id.clone()))?
            .declared(),
        None => Vec::new(),
    };
    for metric in &est.metrics {
        let name = metric.as_str();
        if TIME_METRICS.contains(&name) {
            continue;
        }
        if est.evaluator.is_some() {
            if !declared_by_evaluator.iter().any(|d| d == name) {
                return Err(EngineError::UnknownMetric(metric.clone()));
            }
            continue;
        }
        if CLASSIFICATION_METRICS.contains(&name) {
            for t in tasks {
                if t.task_kind != TaskKind::Classification {
                    return Err(EngineError::IncompatibleMetric {
                        metric: metric.clone(),
                        task: t.id.clone(),
                        kind: t.task_kind,
                    });
                }
            }
        } else if REGRESSION_METRICS.contains(&name) {
            for t in tasks {
                if t.task_kind == TaskKind::Classification {
                    return Err(EngineError::IncompatibleMetric {
                        metric: metric.clone(),
                        task: t.id.clone(),
                        kind: t.task_kind,
                    });
                }
            }
            if name == "theil" && !est.method.is_time_ordered() {
                return Err(EngineError::TheilNeedsMonteCarlo);
            }
        } else {
            return Err(EngineError::UnknownMetric(metric.clone()));
        }
    }
    Ok(())
}

/// Splits the requested metric names into (value metrics, time metrics).
fn partition_metrics(metrics: &[String]) -> (Vec<String>, Vec<String>) {
    let mut value = Vec::new();
    let mut time = Vec::new();
    for m in metrics {
        if TIME_METRICS.contains(&m.as_str()) {
            time.push(m.clone());
        } else {
            value.push(m.clone());
        }
    }
    (value, time)
}

fn score_result(
    task: &PredTask,
    est: &EstimationTask,
    evaluators: &EvaluatorRegistry,
    result: &crate::workflow::WorkflowResult,
    train_rows: &[usize],
) -> Result<ScoreVector, String> {
    let (value_names, time_names) = partition_metrics(&est.metrics);

    let train_ctx = if est.needs_train_target() || est.method.is_time_ordered() {
        let target = task
            .data()
            .column(&task.formula.target)
            .map_err(|e| e.to_string())?;
        let train_values: Option<Vec<f64>> = match &target.data {
            ColumnData::Numeric(v) => Some(
                train_rows
                    .iter()
                    .filter_map(|&r| v[r])
                    .collect(),
            ),
            _ => None,
        };
        let last = train_rows
            .last()
            .and_then(|&r| target.numeric_at(r));
        TrainContext {
            train_target: train_values,
            last_train_value: last,
        }
    } else {
        TrainContext::default()
    };

    let mut scores: Vec<(String, Option<f64>)> = Vec::with_capacity(est.metrics.len());
    if !value_names.is_empty() {
        let value_scores = if let Some(evaluator_id) = &est.evaluator {
            run_evaluator(
                evaluators,
                evaluator_id,
                &value_names,
                &result.trues,
                &result.preds,
                train_ctx.train_target.as_deref(),
                &est.evaluator_pars,
            )
            .map_err(|e| e.to_string())?
        } else {
            match task.task_kind {
                TaskKind::Classification => classification_metrics(
                    &result.trues,
                    &result.preds,
                    &est.metric_request(value_names.clone()),
                )
                .map_err(|e| e.to_string())?,
                _ => regression_metrics(
                    &result.trues,
                    &result.preds,
                    &est.metric_request(value_names.clone()),
                    &train_ctx,
                )
                .map_err(|e| e.to_string())?,
            }
        };
        for (name, value) in value_scores.iter() {
            scores.push((name.to_string(), value));
        }
    }
    if !time_names.is_empty() {
        let time_scores = time_metrics(&time_names, result.times.train, result.times.test);
        for (name, value) in time_scores.iter() {
            scores.push((name.to_string(), value));
        }
    }
    // Reorder to the request order.
    let values = est
        .metrics
        .iter()
        .map(|m| {
            scores
                .iter()
                .find(|(n, _)| n == m)
                .and_then(|(_, v)| *v)
        })
        .collect();
    Ok(ScoreVector::new(est.metrics.clone(), values))
}

/// Runs one workflow on one split iteration and scores it. Failures are
/// captured into the record, never propagated.
#[allow(clippy::too_many_arguments)]
pub fn run_iteration(
    task: &PredTask,
    task_index: usize,
    workflow: &Workflow,
    split: &SplitIteration,
    split_index: usize,
    est: &EstimationTask,
    resub: Option<&ScoreVector>,
    opts: &ExperimentOptions,
) -> IterationRecord {
    let seed = est.method.seed();
    let mut rng = stream_rng(seed, &[task_index as u64, split_index as u64]);
    let attempt = (|| -> Result<(ScoreVector, WorkflowTimes), String> {
        let train = task
            .data()
            .select_rows(&split.train)
            .map_err(|e| e.to_string())?;
        let test = task
            .data()
            .select_rows(&split.test)
            .map_err(|e| e.to_string())?;
        let result = run_workflow(
            &opts.workflow_registry,
            workflow,
            &task.formula,
            &train,
            &test,
            task.task_kind,
            &mut rng,
        )
        .map_err(|e| e.to_string())?;
        let scores = score_result(task, est, &opts.evaluator_registry, &result, &split.train)?;
        Ok((scores, result.times))
    })();

    match attempt {
        Ok((mut scores, times)) => {
            // The .632 estimator blends each out-of-bag score with the
            // full-data resubstitution score; timing metrics stay per
            // iteration.
            if let Some(resub_scores) = resub {
                let (value_names, _) = partition_metrics(&est.metrics);
                for (i, name) in scores.names.clone().iter().enumerate() {
                    if value_names.contains(name) {
                        scores.values[i] = match (resub_scores.get(name), scores.values[i]) {
                            (Some(r), Some(e0)) => Some(0.368 * r + 0.632 * e0),
                            _ => None,
                        };
                    }
                }
            }
            IterationRecord {
                scores: Some(scores),
                times,
                invalid: false,
                error: None,
                split_index,
            }
        }
        Err(message) => IterationRecord {
            scores: None,
            times: WorkflowTimes::default(),
            invalid: true,
            error: Some(message),
            split_index,
        },
    }
}

/// Computes the full-data resubstitution scores used by the .632 blend.
fn resubstitution_scores(
    task: &PredTask,
    task_index: usize,
    workflow: &Workflow,
    est: &EstimationTask,
    opts: &ExperimentOptions,
) -> Result<ScoreVector, String> {
    let all_rows: Vec<usize> = (0..task.n_rows()).collect();
    let mut rng = stream_rng(est.method.seed(), &[task_index as u64, RESUB_STREAM]);
    let frame = task.data();
    let result = run_workflow(
        &opts.workflow_registry,
        workflow,
        &task.formula,
        frame,
        frame,
        task.task_kind,
        &mut rng,
    )
    .map_err(|e| e.to_string())?;
    score_result(task, est, &opts.evaluator_registry, &result, &all_rows)
}

/// Runs the full estimation experiment.
///
/// Progress events trace the run; pass [`NoProgress`] when not interested.
pub fn performance_estimation(
    tasks: &[PredTask],
    workflows: &[Workflow],
    est: &EstimationTask,
    opts: &ExperimentOptions,
    progress: &dyn ProgressSink,
) -> Result<ComparisonResults, EngineError> {
    validate(tasks, workflows, est, opts)?;
    let workers = opts.cluster.workers();

    // One split plan per task, generated before any dispatch and shared
    // by every workflow on that task.
    let mut plans: Vec<SplitPlan> = Vec::with_capacity(tasks.len());
    for task in tasks {
        plans.push(est.method.splits(task).map_err(|source| EngineError::Split {
            task: task.id.clone(),
            source,
        })?);
    }

    let dot632 = matches!(
        est.method,
        EstimationMethod::Bootstrap(BootstrapSettings {
            kind: BootstrapKind::Dot632,
            ..
        })
    );

    progress.on_event(&ProgressEvent::ExperimentStart {
        method: est.method.family_name().to_string(),
    });
    if workers > 1 {
        progress.on_event(&ProgressEvent::Parallel { workers });
    }

    // Resubstitution scores per (task, workflow), only for .632.
    let resub: Vec<Vec<Option<Result<ScoreVector, String>>>> = tasks
        .iter()
        .enumerate()
        .map(|(ti, task)| {
            workflows
                .iter()
                .map(|wf| dot632.then(|| resubstitution_scores(task, ti, wf, est, opts)))
                .collect()
        })
        .collect();

    let run_cell_iteration = |ti: usize, wi: usize, si: usize| -> IterationRecord {
        let split = &plans[ti].iterations[si];
        match &resub[ti][wi] {
            Some(Err(message)) => IterationRecord {
                scores: None,
                times: WorkflowTimes::default(),
                invalid: true,
                error: Some(format!("resubstitution fit failed: {message}")),
                split_index: si,
            },
            Some(Ok(resub_scores)) => run_iteration(
                &tasks[ti],
                ti,
                &workflows[wi],
                split,
                si,
                est,
                Some(resub_scores),
                opts,
            ),
            None => run_iteration(&tasks[ti], ti, &workflows[wi], split, si, est, None, opts),
        }
    };

    let concurrency_safe = |wf: &Workflow| match &wf.kind {
        WorkflowKind::Plugin(id) => opts
            .workflow_registry
            .get(id)
            .map(|p| p.concurrency_safe())
            .unwrap_or(false),
        _ => true,
    };

    let mut records: Vec<Vec<Vec<IterationRecord>>> = Vec::with_capacity(tasks.len());
    if workers <= 1 {
        for (ti, task) in tasks.iter().enumerate() {
            progress.on_event(&ProgressEvent::TaskStart {
                task: task.id.clone(),
            });
            let mut per_workflow = Vec::with_capacity(workflows.len());
            let total = plans[ti].iterations.len();
            for (wi, wf) in workflows.iter().enumerate() {
                progress.on_event(&ProgressEvent::WorkflowStart {
                    workflow: wf.id.clone(),
                    descriptor: plans[ti].method_descriptor.clone(),
                    metrics: est.metrics.clone(),
                    seed: est.method.seed(),
                });
                let mut cell = Vec::with_capacity(total);
                for si in 0..total {
                    progress.on_event(&ProgressEvent::Iteration {
                        index: si + 1,
                        total,
                    });
                    cell.push(run_cell_iteration(ti, wi, si));
                }
                progress.on_event(&ProgressEvent::WorkflowDone);
                per_workflow.push(cell);
            }
            records.push(per_workflow);
        }
    } else {
        // Jobs are pure functions of their (task, workflow, iteration)
        // key, so any schedule produces the same records.
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool");
        let mut jobs: Vec<(usize, usize, usize)> = Vec::new();
        let mut serial_jobs: Vec<(usize, usize, usize)> = Vec::new();
        for (ti, plan) in plans.iter().enumerate() {
            for (wi, wf) in workflows.iter().enumerate() {
                let bucket = if concurrency_safe(wf) {
                    &mut jobs
                } else {
                    &mut serial_jobs
                };
                for si in 0..plan.iterations.len() {
                    bucket.push((ti, wi, si));
                }
            }
        }
        let mut outcomes: std::collections::HashMap<(usize, usize, usize), IterationRecord> =
            pool.install(|| {
                jobs.par_iter()
                    .map(|&(ti, wi, si)| ((ti, wi, si), run_cell_iteration(ti, wi, si)))
                    .collect()
            });
        for &(ti, wi, si) in &serial_jobs {
            outcomes.insert((ti, wi, si), run_cell_iteration(ti, wi, si));
        }
        for (ti, plan) in plans.iter().enumerate() {
            let mut per_workflow = Vec::with_capacity(workflows.len());
            for wi in 0..workflows.len() {
                let cell = (0..plan.iterations.len())
                    .map(|si| outcomes.remove(&(ti, wi, si)).expect("job executed"))
                    .collect();
                per_workflow.push(cell);
            }
            records.push(per_workflow);
        }
    }

    Ok(ComparisonResults::assemble(
        est.clone(),
        tasks,
        workflows,
        &plans,
        records,
    ))
}
