//! Post-experiment exploration: summaries, rankings, top performers,
//! regex subsetting and merging of result objects.
//!
//! Statistics are always computed over valid iterations only; an
//! iteration whose workflow failed contributes to the `invalid` count and
//! to nothing else.

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ComparisonResults;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid regular expression `{pattern}`: {message}")]
    BadRegex { pattern: String, message: String },
    #[error("no {dimension} matches `{pattern}`")]
    EmptyMatch {
        dimension: &'static str,
        pattern: String,
    },
    #[error("unknown workflow `{0}`")]
    UnknownWorkflow(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown summary reducer `{0}` (use mean, median, min or max)")]
    UnknownReducer(String),
    #[error("cannot merge: {0}")]
    Incompatible(String),
    #[error("nothing to merge")]
    NothingToMerge,
}

/// Descriptive statistics of one (task, workflow, metric) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub avg: Option<f64>,
    pub std: Option<f64>,
    pub med: Option<f64>,
    pub iqr: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub invalid: usize,
}

/// One row of a summary table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub task: String,
    pub workflow: String,
    pub metric: String,
    #[serde(flatten)]
    pub stats: SummaryStats,
}

/// Summary rows in task-major, workflow, metric order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryTable {
    pub entries: Vec<SummaryEntry>,
}

/// Sample mean; `None` for an empty slice.
fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (n-1); `None` below two values.
fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Some(var.sqrt())
}

/// Linear-interpolation quantile (the type-7 convention): with n sorted
/// values the p-quantile sits at rank h = (n-1)p and interpolates between
/// the neighbouring order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    if n == 1 {
        return Some(sorted[0]);
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = h - lo as f64;
    Some(sorted[lo] + w * (sorted[hi] - sorted[lo]))
}

/// Computes the per-cell statistics of one metric's valid scores.
///
/// Values are sorted before any accumulation so the statistics are
/// bit-identical under permutation of the iteration order.
pub fn summarize_scores(values: &[f64], invalid: usize) -> SummaryStats {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    SummaryStats {
        avg: mean(&sorted),
        std: sample_std(&sorted),
        med: quantile(&sorted, 0.5),
        iqr: match (quantile(&sorted, 0.75), quantile(&sorted, 0.25)) {
            (Some(q3), Some(q1)) => Some(q3 - q1),
            _ => None,
        },
        min: sorted.first().copied(),
        max: sorted.last().copied(),
        invalid,
    }
}

/// Builds the full summary table of a results object.
pub fn summarize(results: &ComparisonResults) -> SummaryTable {
    let mut entries = Vec::new();
    for (ti, task) in results.tasks.iter().enumerate() {
        for (wi, workflow) in results.workflows.iter().enumerate() {
            let invalid = results.invalid_count(ti, wi);
            for metric in &results.metric_names {
                let values = results.cell_scores(ti, wi, metric);
                entries.push(SummaryEntry {
                    task: task.id.clone(),
                    workflow: workflow.id.clone(),
                    metric: metric.clone(),
                    stats: summarize_scores(&values, invalid),
                });
            }
        }
    }
    SummaryTable { entries }
}

/// Per-metric higher-is-better flags; metrics default to minimization.
#[derive(Debug, Clone, Default)]
pub struct MaxsFlags {
    maximize: Vec<String>,
}

impl MaxsFlags {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn maximizing(metrics: &[&str]) -> Self {
        MaxsFlags {
            maximize: metrics.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn is_max(&self, metric: &str) -> bool {
        self.maximize.iter().any(|m| m == metric)
    }
}

/// One ranked workflow with its estimate (the cell's average score).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedWorkflow {
    pub workflow: String,
    pub estimate: f64,
}

/// Ranking of workflows for one task and metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingEntry {
    pub task: String,
    pub metric: String,
    pub ranked: Vec<RankedWorkflow>,
}

/// Ranks workflows per task and metric by average score (ascending by
/// default, descending for metrics flagged in `maxs`). Ties keep
/// declaration order; workflows with no valid scores are excluded.
pub fn rank_workflows(
    results: &ComparisonResults,
    top: usize,
    maxs: &MaxsFlags,
) -> Vec<RankingEntry> {
    let mut out = Vec::new();
    for (ti, task) in results.tasks.iter().enumerate() {
        for metric in &results.metric_names {
            let mut scored: Vec<RankedWorkflow> = Vec::new();
            for (wi, workflow) in results.workflows.iter().enumerate() {
                if let Some(avg) = mean(&results.cell_scores(ti, wi, metric)) {
                    scored.push(RankedWorkflow {
                        workflow: workflow.id.clone(),
                        estimate: avg,
                    });
                }
            }
            if maxs.is_max(metric) {
                scored.sort_by(|a, b| b.estimate.partial_cmp(&a.estimate).unwrap());
            } else {
                scored.sort_by(|a, b| a.estimate.partial_cmp(&b.estimate).unwrap());
            }
            scored.truncate(top);
            out.push(RankingEntry {
                task: task.id.clone(),
                metric: metric.clone(),
                ranked: scored,
            });
        }
    }
    out
}

/// The single best workflow per task and metric.
pub fn top_performers(results: &ComparisonResults, maxs: &MaxsFlags) -> Vec<RankingEntry> {
    rank_workflows(results, 1, maxs)
}

/// The iteration x metric score matrix of one cell; `None` entries are
/// invalid iterations or undefined metric values.
pub fn get_scores(
    results: &ComparisonResults,
    workflow_id: &str,
    task_id: &str,
) -> Result<Vec<Vec<Option<f64>>>, AnalysisError> {
    let ti = results
        .task_index(task_id)
        .ok_or_else(|| AnalysisError::UnknownTask(task_id.to_string()))?;
    let wi = results
        .workflow_index(workflow_id)
        .ok_or_else(|| AnalysisError::UnknownWorkflow(workflow_id.to_string()))?;
    Ok(results.records[ti][wi]
        .iter()
        .map(|r| {
            results
                .metric_names
                .iter()
                .map(|m| r.scores.as_ref().and_then(|s| s.get(m)))
                .collect()
        })
        .collect())
}

/// Per-metric summary statistics of a single cell.
pub fn estimation_summary(
    results: &ComparisonResults,
    workflow_id: &str,
    task_id: &str,
) -> Result<Vec<(String, SummaryStats)>, AnalysisError> {
    let ti = results
        .task_index(task_id)
        .ok_or_else(|| AnalysisError::UnknownTask(task_id.to_string()))?;
    let wi = results
        .workflow_index(workflow_id)
        .ok_or_else(|| AnalysisError::UnknownWorkflow(workflow_id.to_string()))?;
    let invalid = results.invalid_count(ti, wi);
    Ok(results
        .metric_names
        .iter()
        .map(|m| {
            (
                m.clone(),
                summarize_scores(&results.cell_scores(ti, wi, m), invalid),
            )
        })
        .collect())
}

/// Reducers accepted by [`metrics_summary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reducer {
    Mean,
    Median,
    Min,
    Max,
}

impl std::str::FromStr for Reducer {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Reducer::Mean),
            "median" => Ok(Reducer::Median),
            "min" => Ok(Reducer::Min),
            "max" => Ok(Reducer::Max),
            other => Err(AnalysisError::UnknownReducer(other.to_string())),
        }
    }
}

impl Reducer {
    fn apply(&self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        match self {
            Reducer::Mean => mean(values),
            Reducer::Median => {
                let mut sorted = values.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                quantile(&sorted, 0.5)
            }
            Reducer::Min => values.iter().copied().reduce(f64::min),
            Reducer::Max => values.iter().copied().reduce(f64::max),
        }
    }
}

/// One reduced score per (task, workflow, metric).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsSummaryEntry {
    pub task: String,
    pub workflow: String,
    pub metric: String,
    pub value: Option<f64>,
}

/// Applies a reducer over every cell's valid scores.
pub fn metrics_summary(results: &ComparisonResults, reducer: Reducer) -> Vec<MetricsSummaryEntry> {
    let mut out = Vec::new();
    for (ti, task) in results.tasks.iter().enumerate() {
        for (wi, workflow) in results.workflows.iter().enumerate() {
            for metric in &results.metric_names {
                out.push(MetricsSummaryEntry {
                    task: task.id.clone(),
                    workflow: workflow.id.clone(),
                    metric: metric.clone(),
                    value: reducer.apply(&results.cell_scores(ti, wi, metric)),
                });
            }
        }
    }
    out
}

/// Converts a shell-style glob (`*`, `?`) to an anchored regular
/// expression, for users who prefer wildcard syntax in subsets.
pub fn glob_to_regex(glob: &str) -> String {
    let mut out = String::from("^");
    for c in glob.chars() {
        match c {
            '*' => out.push_str(".*"),
            '?' => out.push('.'),
            c if "\\.+()[]{}^$|".contains(c) => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push('$');
    out
}

fn compile(pattern: &str) -> Result<Regex, AnalysisError> {
    Regex::new(pattern).map_err(|e| AnalysisError::BadRegex {
        pattern: pattern.to_string(),
        message: e.to_string(),
    })
}

/// Selection patterns for [`subset_results`]; `None` keeps a dimension
/// whole. Matching uses unanchored search semantics, so `a1` also matches
/// `a10`; anchor with `^...$` for exact names.
#[derive(Debug, Clone, Default)]
pub struct SubsetSpec {
    pub tasks: Option<String>,
    pub workflows: Option<String>,
    pub metrics: Option<String>,
}

/// Restricts a results object to the tasks, workflows and metrics whose
/// names match the given patterns. Provenance is preserved.
pub fn subset_results(
    results: &ComparisonResults,
    spec: &SubsetSpec,
) -> Result<ComparisonResults, AnalysisError> {
    let match_dim = |pattern: &Option<String>,
                     names: Vec<&str>,
                     dimension: &'static str|
     -> Result<Vec<usize>, AnalysisError> {
        match pattern {
            None => Ok((0..names.len()).collect()),
            Some(p) => {
                let re = compile(p)?;
                let kept: Vec<usize> = names
                    .iter()
                    .enumerate()
                    .filter(|(_, n)| re.is_match(n))
                    .map(|(i, _)| i)
                    .collect();
                if kept.is_empty() {
                    return Err(AnalysisError::EmptyMatch {
                        dimension,
                        pattern: p.clone(),
                    });
                }
                Ok(kept)
            }
        }
    };

    let task_keep = match_dim(&spec.tasks, results.task_names(), "tasks")?;
    let wf_keep = match_dim(&spec.workflows, results.workflow_names(), "workflows")?;
    let metric_keep = match_dim(
        &spec.metrics,
        results.metric_names.iter().map(String::as_str).collect(),
        "metrics",
    )?;

    let metric_names: Vec<String> = metric_keep
        .iter()
        .map(|&i| results.metric_names[i].clone())
        .collect();

    let kept_metrics = metric_names.clone();
    let filter_record = move |r: &crate::engine::IterationRecord| {
        let scores = r.scores.as_ref().map(|s| {
            crate::metrics::ScoreVector::new(
                kept_metrics.clone(),
                kept_metrics.iter().map(|m| s.get(m)).collect(),
            )
        });
        crate::engine::IterationRecord {
            scores,
            ..r.clone()
        }
    };

    let mut estimation = results.estimation.clone();
    estimation.metrics = metric_names.clone();

    Ok(ComparisonResults {
        estimation,
        tasks: task_keep
            .iter()
            .map(|&i| results.tasks[i].clone())
            .collect(),
        workflows: wf_keep
            .iter()
            .map(|&i| results.workflows[i].clone())
            .collect(),
        metric_names,
        split_infos: task_keep
            .iter()
            .map(|&i| results.split_infos[i].clone())
            .collect(),
        records: task_keep
            .iter()
            .map(|&ti| {
                wf_keep
                    .iter()
                    .map(|&wi| {
                        results.records[ti][wi]
                            .iter()
                            .map(&filter_record)
                            .collect()
                    })
                    .collect()
            })
            .collect(),
        provenance: results.provenance.clone(),
    })
}

/// Merge axis for [`merge_results`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeBy {
    Workflows,
    Tasks,
    Metrics,
}

impl std::str::FromStr for MergeBy {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "workflows" => Ok(MergeBy::Workflows),
            "tasks" => Ok(MergeBy::Tasks),
            "metrics" => Ok(MergeBy::Metrics),
            other => Err(AnalysisError::Incompatible(format!(
                "unknown merge dimension `{other}`"
            ))),
        }
    }
}

fn check_compatible(
    a: &ComparisonResults,
    b: &ComparisonResults,
    by: MergeBy,
    strict: bool,
) -> Result<(), AnalysisError> {
    if a.provenance.seed != b.provenance.seed {
        return Err(AnalysisError::Incompatible(format!(
            "seeds differ ({} vs {})",
            a.provenance.seed, b.provenance.seed
        )));
    }
    if a.provenance.method_descriptor != b.provenance.method_descriptor {
        return Err(AnalysisError::Incompatible(format!(
            "estimation methods differ ({} vs {})",
            a.provenance.method_descriptor, b.provenance.method_descriptor
        )));
    }
    let same_tasks = |x: &ComparisonResults, y: &ComparisonResults| -> Result<(), AnalysisError> {
        if x.task_names() != y.task_names() {
            return Err(AnalysisError::Incompatible(
                "task sets differ".to_string(),
            ));
        }
        for (i, (sa, sb)) in x.split_infos.iter().zip(&y.split_infos).enumerate() {
            if sa.descriptor != sb.descriptor || sa.iterations != sb.iterations {
                return Err(AnalysisError::Incompatible(format!(
                    "split plans differ on task `{}`",
                    x.tasks[i].id
                )));
            }
            if strict && sa.fingerprint != sb.fingerprint {
                return Err(AnalysisError::Incompatible(format!(
                    "split contents differ on task `{}` (strict check)",
                    x.tasks[i].id
                )));
            }
        }
        Ok(())
    };
    match by {
        MergeBy::Workflows => {
            same_tasks(a, b)?;
            if a.metric_names != b.metric_names {
                return Err(AnalysisError::Incompatible(
                    "metric sets differ".to_string(),
                ));
            }
            for name in b.workflow_names() {
                if a.workflow_index(name).is_some() {
                    return Err(AnalysisError::Incompatible(format!(
                        "workflow `{name}` appears in both objects"
                    )));
                }
            }
        }
        MergeBy::Tasks => {
            if a.workflow_names() != b.workflow_names() {
                return Err(AnalysisError::Incompatible(
                    "workflow sets differ".to_string(),
                ));
            }
            if a.metric_names != b.metric_names {
                return Err(AnalysisError::Incompatible(
                    "metric sets differ".to_string(),
                ));
            }
            for name in b.task_names() {
                if a.task_index(name).is_some() {
                    return Err(AnalysisError::Incompatible(format!(
                        "task `{name}` appears in both objects"
                    )));
                }
            }
        }
        MergeBy::Metrics => {
            same_tasks(a, b)?;
            if a.workflow_names() != b.workflow_names() {
                return Err(AnalysisError::Incompatible(
                    "workflow sets differ".to_string(),
                ));
            }
            for m in &b.metric_names {
                if a.metric_names.contains(m) {
                    return Err(AnalysisError::Incompatible(format!(
                        "metric `{m}` appears in both objects"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn merge_two(
    a: ComparisonResults,
    b: &ComparisonResults,
    by: MergeBy,
    strict: bool,
) -> Result<ComparisonResults, AnalysisError> {
    check_compatible(&a, b, by, strict)?;
    let mut merged = a;
    match by {
        MergeBy::Workflows => {
            merged.workflows.extend(b.workflows.iter().cloned());
            for (ti, cells) in merged.records.iter_mut().enumerate() {
                cells.extend(b.records[ti].iter().cloned());
            }
        }
        MergeBy::Tasks => {
            merged.tasks.extend(b.tasks.iter().cloned());
            merged.split_infos.extend(b.split_infos.iter().cloned());
            merged.records.extend(b.records.iter().cloned());
        }
        MergeBy::Metrics => {
            merged.metric_names.extend(b.metric_names.iter().cloned());
            merged
                .estimation
                .metrics
                .extend(b.metric_names.iter().cloned());
            for (ti, cells) in merged.records.iter_mut().enumerate() {
                for (wi, cell) in cells.iter_mut().enumerate() {
                    for (si, record) in cell.iter_mut().enumerate() {
                        let other = &b.records[ti][wi][si];
                        if record.invalid != other.invalid {
                            return Err(AnalysisError::Incompatible(format!(
                                "iteration {} validity differs between objects",
                                si + 1
                            )));
                        }
                        if let (Some(s), Some(o)) = (record.scores.as_mut(), other.scores.as_ref())
                        {
                            s.names.extend(o.names.iter().cloned());
                            s.values.extend(o.values.iter().copied());
                        }
                    }
                }
            }
        }
    }
    Ok(merged)
}

/// Merges result objects along one dimension. All parts must share the
/// estimation method and seed; `strict` additionally compares split-plan
/// fingerprints instead of descriptors alone.
pub fn merge_results(
    parts: &[ComparisonResults],
    by: MergeBy,
    strict: bool,
) -> Result<ComparisonResults, AnalysisError> {
    let mut iter = parts.iter();
    let first = iter.next().ok_or(AnalysisError::NothingToMerge)?.clone();
    iter.try_fold(first, |acc, part| merge_two(acc, part, by, strict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{
        performance_estimation, EstimationMethod, EstimationTask, ExperimentOptions, NoProgress,
    };
    use crate::frame::{make_task, parse_formula, Column, DataFrame, TaskOptions};
    use crate::resampling::CvSettings;
    use crate::workflow::{ParamMap, Workflow, WorkflowKind};
    use std::sync::Arc;

    fn reg_task(id: &str, slope: f64, n: usize) -> crate::frame::PredTask {
        let frame = Arc::new(
            DataFrame::new(vec![
                Column::numeric("x", (0..n).map(|i| Some(i as f64)).collect()).unwrap(),
                Column::numeric(
                    "y",
                    (0..n)
                        .map(|i| Some(slope * i as f64 + (i % 3) as f64))
                        .collect(),
                )
                .unwrap(),
            ])
            .unwrap(),
        );
        make_task(
            parse_formula("y ~ .").unwrap(),
            &frame,
            TaskOptions {
                id: Some(id.to_string()),
                ..TaskOptions::default()
            },
        )
        .unwrap()
    }

    fn wf(id: &str, learner: &str) -> Workflow {
        let params: ParamMap =
            serde_json::from_str(&format!(r#"{{"learner":"{learner}"}}"#)).unwrap();
        Workflow::new(id, WorkflowKind::Standard, params)
    }

    fn run(
        tasks: &[crate::frame::PredTask],
        workflows: &[Workflow],
        metrics: &[&str],
    ) -> ComparisonResults {
        let est = EstimationTask::new(
            metrics,
            EstimationMethod::Cv(CvSettings {
                n_folds: 5,
                ..CvSettings::default()
            }),
        );
        performance_estimation(
            tasks,
            workflows,
            &est,
            &ExperimentOptions::default(),
            &NoProgress,
        )
        .unwrap()
    }

    #[test]
    fn summarize_shapes_and_direct_values() {
        let stats = summarize_scores(&[0.0, 0.0, 0.1], 0);
        assert!((stats.avg.unwrap() - 0.0333333).abs() < 1e-6);
        assert_eq!(stats.min, Some(0.0));
        assert_eq!(stats.max, Some(0.1));
        assert_eq!(stats.invalid, 0);

        // Single value: avg = med = min = max, no spread.
        let stats = summarize_scores(&[0.7], 2);
        assert_eq!(stats.avg, Some(0.7));
        assert_eq!(stats.med, Some(0.7));
        assert_eq!(stats.min, Some(0.7));
        assert_eq!(stats.max, Some(0.7));
        assert_eq!(stats.std, None);
        assert_eq!(stats.invalid, 2);

        // All invalid: everything missing.
        let stats = summarize_scores(&[], 10);
        assert_eq!(stats.avg, None);
        assert_eq!(stats.invalid, 10);
    }

    #[test]
    fn quantile_type7_oracle() {
        // Hand-checked type-7 values for [1,2,3,4]: q25 = 1.75, q75 = 3.25.
        let v = [1.0, 2.0, 3.0, 4.0];
        assert!((quantile(&v, 0.25).unwrap() - 1.75).abs() < 1e-12);
        assert!((quantile(&v, 0.75).unwrap() - 3.25).abs() < 1e-12);
        assert!((quantile(&v, 0.5).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn summarize_is_order_free() {
        let tasks = vec![reg_task("t1", 2.0, 30)];
        let wfs = vec![wf("lm", "linreg"), wf("mean", "meanBaseline")];
        let mut results = run(&tasks, &wfs, &["mae", "mse"]);
        let before = summarize(&results);
        // Shuffle iteration order within each cell.
        for cells in results.records.iter_mut() {
            for cell in cells.iter_mut() {
                cell.reverse();
                cell.rotate_left(2);
            }
        }
        let after = summarize(&results);
        for (x, y) in before.entries.iter().zip(&after.entries) {
            assert_eq!(x.stats, y.stats);
        }
    }

    #[test]
    fn ranking_orders_and_flips() {
        let tasks = vec![reg_task("t1", 2.0, 30)];
        let wfs = vec![wf("lm", "linreg"), wf("mean", "meanBaseline")];
        let results = run(&tasks, &wfs, &["mae"]);
        let ranked = rank_workflows(&results, 5, &MaxsFlags::none());
        assert_eq!(ranked.len(), 1);
        // The linear model beats the mean baseline on a linear trend.
        assert_eq!(ranked[0].ranked[0].workflow, "lm");
        assert_eq!(ranked[0].ranked.len(), 2);

        let flipped = rank_workflows(&results, 5, &MaxsFlags::maximizing(&["mae"]));
        assert_eq!(flipped[0].ranked[0].workflow, "mean");

        let top = top_performers(&results, &MaxsFlags::none());
        assert_eq!(top[0].ranked.len(), 1);
        assert_eq!(top[0].ranked[0].workflow, "lm");
    }

    #[test]
    fn rank_negation_equals_max_flip() {
        let tasks = vec![reg_task("t1", 2.0, 30)];
        let wfs = vec![wf("lm", "linreg"), wf("mean", "meanBaseline")];
        let mut results = run(&tasks, &wfs, &["mae"]);
        let flipped = rank_workflows(&results, 9, &MaxsFlags::maximizing(&["mae"]));
        // Negate all scores, rank with default minimization.
        for cells in results.records.iter_mut() {
            for cell in cells.iter_mut() {
                for r in cell.iter_mut() {
                    if let Some(s) = r.scores.as_mut() {
                        for v in s.values.iter_mut() {
                            *v = v.map(|x| -x);
                        }
                    }
                }
            }
        }
        let negated = rank_workflows(&results, 9, &MaxsFlags::none());
        let order_a: Vec<&str> = flipped[0].ranked.iter().map(|r| r.workflow.as_str()).collect();
        let order_b: Vec<&str> = negated[0].ranked.iter().map(|r| r.workflow.as_str()).collect();
        assert_eq!(order_a, order_b);
    }

    #[test]
    fn get_scores_matrix_shape() {
        let tasks = vec![reg_task("t1", 2.0, 30)];
        let wfs = vec![wf("lm", "linreg")];
        let results = run(&tasks, &wfs, &["mae", "mse"]);
        let matrix = get_scores(&results, "lm", "t1").unwrap();
        assert_eq!(matrix.len(), 5);
        assert!(matrix.iter().all(|row| row.len() == 2));
        assert!(get_scores(&results, "nope", "t1").is_err());
        assert!(get_scores(&results, "lm", "nope").is_err());
    }

    #[test]
    fn metrics_summary_reducers() {
        let tasks = vec![reg_task("t1", 2.0, 30)];
        let wfs = vec![wf("lm", "linreg")];
        let results = run(&tasks, &wfs, &["mae"]);
        let med = metrics_summary(&results, Reducer::Median);
        let scores = results.cell_scores(0, 0, "mae");
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(med[0].value, quantile(&sorted, 0.5));

        // mean reducer equals the summary's avg.
        let m = metrics_summary(&results, Reducer::Mean);
        let table = summarize(&results);
        assert_eq!(m[0].value, table.entries[0].stats.avg);

        assert!("max".parse::<Reducer>().is_ok());
        assert!("oops".parse::<Reducer>().is_err());
    }

    #[test]
    fn subset_by_regex() {
        let tasks = vec![reg_task("a1", 2.0, 25), reg_task("a2", 1.0, 25)];
        let mut wfs: Vec<Workflow> = Vec::new();
        for i in 1..=15 {
            wfs.push(wf(&format!("svm.v{i}"), "linreg"));
        }
        let results = run(&tasks, &wfs, &["mae", "mse"]);

        let spec = SubsetSpec {
            workflows: Some("4$".to_string()),
            ..SubsetSpec::default()
        };
        let sub = subset_results(&results, &spec).unwrap();
        assert_eq!(sub.workflow_names(), vec!["svm.v4", "svm.v14"]);

        let spec = SubsetSpec {
            workflows: Some(glob_to_regex("*svm*")),
            ..SubsetSpec::default()
        };
        let sub = subset_results(&results, &spec).unwrap();
        assert_eq!(sub.workflows.len(), 15);

        // Unanchored search: `a1` matches only task a1 here.
        let spec = SubsetSpec {
            tasks: Some("a1".to_string()),
            metrics: Some("^mae$".to_string()),
            ..SubsetSpec::default()
        };
        let sub = subset_results(&results, &spec).unwrap();
        assert_eq!(sub.task_names(), vec!["a1"]);
        assert_eq!(sub.metric_names, vec!["mae"]);
        assert_eq!(sub.records[0][0][0].scores.as_ref().unwrap().names.len(), 1);

        let spec = SubsetSpec {
            workflows: Some("zzz".to_string()),
            ..SubsetSpec::default()
        };
        assert!(matches!(
            subset_results(&results, &spec),
            Err(AnalysisError::EmptyMatch { .. })
        ));
        let spec = SubsetSpec {
            workflows: Some("[".to_string()),
            ..SubsetSpec::default()
        };
        assert!(matches!(
            subset_results(&results, &spec),
            Err(AnalysisError::BadRegex { .. })
        ));
    }

    #[test]
    fn merge_by_workflows_and_tasks() {
        let tasks = vec![reg_task("a1", 2.0, 25)];
        let svm_like: Vec<Workflow> = (1..=12).map(|i| wf(&format!("svm.v{i}"), "linreg")).collect();
        let rf_like: Vec<Workflow> = (1..=6)
            .map(|i| wf(&format!("randomForest.v{i}"), "meanBaseline"))
            .collect();
        let part_a = run(&tasks, &svm_like, &["mae"]);
        let part_b = run(&tasks, &rf_like, &["mae"]);
        let merged = merge_results(&[part_a, part_b], MergeBy::Workflows, true).unwrap();
        assert_eq!(merged.workflows.len(), 18);
        assert_eq!(merged.tasks.len(), 1);

        let more_tasks = vec![reg_task("a2", 1.0, 25)];
        let part_c = run(&more_tasks, &svm_like, &["mae"]);
        let part_d = run(&more_tasks, &rf_like, &["mae"]);
        let merged_c = merge_results(&[part_c, part_d], MergeBy::Workflows, true).unwrap();
        let all = merge_results(&[merged, merged_c], MergeBy::Tasks, true).unwrap();
        assert_eq!(all.workflows.len(), 18);
        assert_eq!(all.tasks.len(), 2);
        assert_eq!(all.records.len(), 2);
        assert_eq!(all.records[1].len(), 18);
    }

    #[test]
    fn merge_rejects_mismatched_seeds() {
        let tasks = vec![reg_task("a1", 2.0, 25)];
        let wf_a = vec![wf("one", "linreg")];
        let wf_b = vec![wf("two", "meanBaseline")];
        let part_a = run(&tasks, &wf_a, &["mae"]);
        let est = EstimationTask::new(
            &["mae"],
            EstimationMethod::Cv(CvSettings {
                n_folds: 5,
                seed: 999,
                ..CvSettings::default()
            }),
        );
        let part_b = performance_estimation(
            &tasks,
            &wf_b,
            &est,
            &ExperimentOptions::default(),
            &NoProgress,
        )
        .unwrap();
        assert!(matches!(
            merge_results(&[part_a, part_b], MergeBy::Workflows, false),
            Err(AnalysisError::Incompatible(_))
        ));
    }

    #[test]
    fn merge_single_object_is_identity() {
        let tasks = vec![reg_task("a1", 2.0, 25)];
        let results = run(&tasks, &[wf("one", "linreg")], &["mae"]);
        let merged = merge_results(std::slice::from_ref(&results), MergeBy::Workflows, true).unwrap();
        assert_eq!(merged.workflow_names(), results.workflow_names());
        assert_eq!(merged.records, results.records);
    }

    #[test]
    fn subset_then_merge_reconstructs_summaries() {
        let tasks = vec![reg_task("a1", 2.0, 25)];
        let wfs = vec![wf("w1", "linreg"), wf("w2", "meanBaseline")];
        let results = run(&tasks, &wfs, &["mae"]);
        let left = subset_results(
            &results,
            &SubsetSpec {
                workflows: Some("^w1$".to_string()),
                ..SubsetSpec::default()
            },
        )
        .unwrap();
        let right = subset_results(
            &results,
            &SubsetSpec {
                workflows: Some("^w2$".to_string()),
                ..SubsetSpec::default()
            },
        )
        .unwrap();
        let rebuilt = merge_results(&[left, right], MergeBy::Workflows, true).unwrap();
        let a = summarize(&results);
        let b = summarize(&rebuilt);
        assert_eq!(a.entries.len(), b.entries.len());
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!(x.workflow, y.workflow);
            assert_eq!(x.stats, y.stats);
        }
    }

    #[test]
    fn glob_conversion() {
        assert_eq!(glob_to_regex("*svm*"), "^.*svm.*$");
        assert_eq!(glob_to_regex("a?c"), "^a.c$");
        assert_eq!(glob_to_regex("a.b"), "^a\\.b$");
    }
}
