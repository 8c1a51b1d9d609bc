//! The experiment results store and its versioned JSON persistence.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EstimationTask;
use crate::frame::{PredTask, TaskKind};
use crate::metrics::ScoreVector;
use crate::resampling::SplitPlan;
use crate::workflow::{Workflow, WorkflowTimes};
use crate::{RESULTS_FORMAT_VERSION, TOOL_VERSION};

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("results file parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("results file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
}

/// The scored outcome of one train+test iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Absent iff the iteration is invalid.
    pub scores: Option<ScoreVector>,
    pub times: WorkflowTimes,
    pub invalid: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(rename = "splitIndex")]
    pub split_index: usize,
}

/// Identity of one predictive task inside a results object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub id: String,
    pub formula: String,
    #[serde(rename = "taskType")]
    pub task_type: TaskKind,
    #[serde(rename = "nRows")]
    pub n_rows: usize,
}

/// Split-plan identity used for merge compatibility checks: the method
/// descriptor plus a fingerprint over the actual index lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub descriptor: String,
    pub fingerprint: String,
    pub iterations: usize,
}

/// Experiment provenance recorded in every results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    #[serde(rename = "methodDescriptor")]
    pub method_descriptor: String,
    #[serde(rename = "toolVersion")]
    pub tool_version: String,
    /// Seconds since the Unix epoch at assembly time.
    pub timestamp: u64,
}

/// The three-axis score store: task x workflow x (iteration x metric),
/// plus failure records and full experiment metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonResults {
    #[serde(rename = "estimationTask")]
    pub estimation: EstimationTask,
    pub tasks: Vec<TaskDescriptor>,
    pub workflows: Vec<Workflow>,
    #[serde(rename = "metricNames")]
    pub metric_names: Vec<String>,
    #[serde(rename = "splitPlans")]
    pub split_infos: Vec<SplitInfo>,
    /// `records[task][workflow]` is the ordered iteration list.
    pub records: Vec<Vec<Vec<IterationRecord>>>,
    pub provenance: Provenance,
}

impl ComparisonResults {
    pub(crate) fn assemble(
        estimation: EstimationTask,
        tasks: &[PredTask],
        workflows: &[Workflow],
        plans: &[SplitPlan],
        records: Vec<Vec<Vec<IterationRecord>>>,
    ) -> ComparisonResults {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ComparisonResults {
            metric_names: estimation.metrics.clone(),
            provenance: Provenance {
                seed: estimation.method.seed(),
                method_descriptor: plans
                    .first()
                    .map(|p| p.method_descriptor.clone())
                    .unwrap_or_default(),
                tool_version: TOOL_VERSION.to_string(),
                timestamp,
            },
            estimation,
            tasks: tasks
                .iter()
                .map(|t| TaskDescriptor {
                    id: t.id.clone(),
                    formula: t.formula.format(),
                    task_type: t.task_kind,
                    n_rows: t.n_rows(),
                })
                .collect(),
            workflows: workflows.to_vec(),
            split_infos: plans
                .iter()
                .map(|p| SplitInfo {
                    descriptor: p.method_descriptor.clone(),
                    fingerprint: format!("{:016x}", p.fingerprint()),
                    iterations: p.iterations.len(),
                })
                .collect(),
            records,
        }
    }

    pub fn task_names(&self) -> Vec<&str> {
        self.tasks.iter().map(|t| t.id.as_str()).collect()
    }

    pub fn workflow_names(&self) -> Vec<&str> {
        self.workflows.iter().map(|w| w.id.as_str()).collect()
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    pub fn workflow_index(&self, id: &str) -> Option<usize> {
        self.workflows.iter().position(|w| w.id == id)
    }

    /// Number of invalid iterations in one cell.
    pub fn invalid_count(&self, task: usize, workflow: usize) -> usize {
        self.records[task][workflow]
            .iter()
            .filter(|r| r.invalid)
            .count()
    }

    /// Valid values of one metric in one cell, in iteration order.
    pub fn cell_scores(&self, task: usize, workflow: usize, metric: &str) -> Vec<f64> {
        self.records[task][workflow]
            .iter()
            .filter_map(|r| r.scores.as_ref().and_then(|s| s.get(metric)))
            .collect()
    }
}

/// Versioned envelope for the results file.
#[derive(Serialize, Deserialize)]
struct ResultsFile {
    version: u32,
    #[serde(flatten)]
    results: ComparisonResults,
}

/// Serializes results to the versioned JSON format.
pub fn results_to_json(results: &ComparisonResults) -> String {
    serde_json::to_string_pretty(&ResultsFile {
        version: RESULTS_FORMAT_VERSION,
        results: results.clone(),
    })
    .expect("results serialize")
}

/// Parses results from JSON text, rejecting unknown versions.
pub fn results_from_json(text: &str) -> Result<ComparisonResults, ResultsError> {
    // Check the version before attempting the full parse so version
    // mismatches are reported as such, not as shape errors.
    let probe: serde_json::Value = serde_json::from_str(text)?;
    let found = probe
        .get("version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if found != RESULTS_FORMAT_VERSION {
        return Err(ResultsError::VersionMismatch {
            found,
            expected: RESULTS_FORMAT_VERSION,
        });
    }
    let file: ResultsFile = serde_json::from_str(text)?;
    Ok(file.results)
}

/// Writes results to a JSON file; the round trip is lossless.
pub fn save_results(results: &ComparisonResults, path: impl AsRef<Path>) -> Result<(), ResultsError> {
    std::fs::write(path, results_to_json(results))?;
    Ok(())
}

/// Loads results from a JSON file written by [`save_results`].
pub fn load_results(path: impl AsRef<Path>) -> Result<ComparisonResults, ResultsError> {
    let text = std::fs::read_to_string(path)?;
    results_from_json(&text)
}
