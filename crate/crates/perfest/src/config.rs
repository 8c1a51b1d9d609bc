//! Declarative experiment configuration.
//!
//! A config file names the tasks (CSV path plus formula), the workflows
//! (direct declarations or variant grids), the estimation task and the
//! parallelism setting. Method parameters use the constructor names from
//! the generic API (`nReps`, `nFolds`, `strat`, `hldSz`, `szTrain`,
//! `szTest`, `seed`), so existing descriptions of those methods read as
//! documentation for the file format.
//!
//! ```json
//! {
//!   "tasks": [
//!     {"id": "iris", "csvPath": "iris.csv", "formula": "Species ~ ."}
//!   ],
//!   "workflows": [
//!     {"wfID": "knn3", "learner": "knn", "learner.pars": {"k": 3}},
//!     {"variants": {"learner": "knn", "learner.pars": {"k": [1, 3, 5]}}}
//!   ],
//!   "estimation": {
//!     "metrics": ["err"],
//!     "method": {"name": "CV", "nReps": 1, "nFolds": 10, "seed": 1234}
//!   },
//!   "cluster": "off",
//!   "outputPath": "results.json"
//! }
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Cluster, EstimationTask, ExperimentOptions};
use crate::frame::{make_task, parse_formula, read_csv, CsvOptions, PredTask, TaskOptions};
use crate::workflow::{
    workflow_variants, ParamMap, StandardParams, TimeseriesParams, VariantGrid, Workflow,
    WorkflowKind,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error reading `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

/// One task declaration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskConfig {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(rename = "csvPath")]
    pub csv_path: String,
    pub formula: String,
    #[serde(default)]
    pub copy: bool,
    /// Treat the rows as time ordered (numeric targets only).
    #[serde(default)]
    pub timeseries: bool,
    #[serde(rename = "naTokens", default)]
    pub na_tokens: Option<Vec<String>>,
    #[serde(default = "default_true")]
    pub header: bool,
}

fn default_true() -> bool {
    true
}

/// A workflow entry: either a direct declaration or a variant grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WorkflowConfig {
    Grid {
        /// Template parameters; array values expand cartesian variants.
        variants: ParamMap,
        /// Parameter names excluded from expansion.
        #[serde(rename = "as.is", default)]
        as_is: Vec<String>,
        /// Workflow function: `standardWF`, `timeseriesWF` or a plugin id.
        #[serde(default)]
        wf: Option<String>,
        /// Base name for generated variant ids.
        #[serde(rename = "wfID", default)]
        wf_id: Option<String>,
    },
    Direct {
        #[serde(rename = "wfID", default)]
        wf_id: Option<String>,
        /// Workflow function; inferred from the parameters when omitted.
        #[serde(default)]
        wf: Option<String>,
        #[serde(flatten)]
        params: ParamMap,
    },
}

/// The estimation block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub metrics: Vec<String>,
    pub method: serde_json::Value,
    #[serde(default)]
    pub evaluator: Option<String>,
    #[serde(rename = "evaluatorPars", default)]
    pub evaluator_pars: ParamMap,
    #[serde(rename = "trainReq", default)]
    pub train_req: bool,
}

/// The whole experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub tasks: Vec<TaskConfig>,
    pub workflows: Vec<WorkflowConfig>,
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub cluster: serde_json::Value,
    #[serde(rename = "outputPath", default)]
    pub output_path: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Parses the cluster setting: `"off"`, `"auto"` or a worker count.
    /// The `PERFEST_WORKERS` environment variable overrides the file.
    pub fn cluster(&self) -> Result<Cluster, String> {
        if let Ok(env) = std::env::var("PERFEST_WORKERS") {
            return parse_cluster_text(&env)
                .ok_or_else(|| format!("PERFEST_WORKERS=`{env}` is not off, auto or a count"));
        }
        match &self.cluster {
            serde_json::Value::Null => Ok(Cluster::Off),
            serde_json::Value::String(s) => {
                parse_cluster_text(s).ok_or_else(|| format!("cluster `{s}` is not off or auto"))
            }
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|n| Cluster::Workers(n as usize))
                .ok_or_else(|| format!("cluster count `{n}` is not a positive integer")),
            other => Err(format!("cluster must be off, auto or a count, got {other}")),
        }
    }

    /// Builds the estimation task from the config block.
    pub fn estimation_task(&self) -> Result<EstimationTask, String> {
        let method = serde_json::from_value(self.estimation.method.clone())
            .map_err(|e| format!("estimation.method: {e}"))?;
        Ok(EstimationTask {
            metrics: self.estimation.metrics.clone(),
            method,
            evaluator: self.estimation.evaluator.clone(),
            evaluator_pars: self.estimation.evaluator_pars.clone(),
            train_req: self.estimation.train_req,
        })
    }

    /// Expands every workflow entry into concrete workflows.
    pub fn build_workflows(&self) -> Result<Vec<Workflow>, String> {
        let mut out = Vec::new();
        for (i, entry) in self.workflows.iter().enumerate() {
            match entry {
                WorkflowConfig::Direct { wf_id, wf, params } => {
                    let kind = kind_from_name(wf.as_deref(), params);
                    let id = wf_id.clone().unwrap_or_else(|| default_id(&kind, params));
                    out.push(Workflow::new(id, kind, params.clone()));
                }
                WorkflowConfig::Grid {
                    variants,
                    as_is,
                    wf,
                    wf_id,
                } => {
                    let grid = VariantGrid {
                        kind: wf
                            .as_deref()
                            .map(|name| kind_from_name(Some(name), variants)),
                        base_id: wf_id.clone(),
                        params: variants.clone(),
                        as_is: as_is.clone(),
                    };
                    let expanded = workflow_variants(&grid)
                        .map_err(|e| format!("workflows[{i}]: {e}"))?;
                    out.extend(expanded);
                }
            }
        }
        Ok(out)
    }

    /// Loads every task's CSV and builds the predictive tasks.
    pub fn load_tasks(&self, base_dir: &Path) -> Result<Vec<PredTask>, String> {
        let mut tasks = Vec::with_capacity(self.tasks.len());
        for t in &self.tasks {
            let formula =
                parse_formula(&t.formula).map_err(|e| format!("task `{}`: {e}", t.describe()))?;
            let mut opts = CsvOptions {
                header_row: t.header,
                ..CsvOptions::default()
            };
            if let Some(tokens) = &t.na_tokens {
                opts.na_tokens = tokens.clone();
            }
            let path = resolve_path(base_dir, &t.csv_path);
            let frame = read_csv(&path, &opts)
                .map_err(|e| format!("task `{}` ({}): {e}", t.describe(), path.display()))?;
            let frame = Arc::new(frame);
            let task = make_task(
                formula,
                &frame,
                TaskOptions {
                    id: t.id.clone(),
                    copy: t.copy,
                    time_ordered: t.timeseries,
                },
            )
            .map_err(|e| format!("task `{}`: {e}", t.describe()))?;
            tasks.push(task);
        }
        Ok(tasks)
    }

    /// Validates everything checkable without reading data files and
    /// returns the full list of problems.
    pub fn validate(&self, opts: &ExperimentOptions) -> Vec<String> {
        let mut problems = Vec::new();
        if self.tasks.is_empty() {
            problems.push("no tasks declared".to_string());
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if t.csv_path.is_empty() {
                problems.push(format!("tasks[{i}]: csvPath is empty"));
            }
            if let Err(e) = parse_formula(&t.formula) {
                problems.push(format!("tasks[{i}]: {e}"));
            }
        }
        if self.workflows.is_empty() {
            problems.push("no workflows declared".to_string());
        }
        match self.build_workflows() {
            Err(e) => problems.push(e),
            Ok(workflows) => {
                let mut seen = std::collections::HashSet::new();
                for w in &workflows {
                    if !seen.insert(w.id.clone()) {
                        problems.push(format!("duplicate workflow id `{}`", w.id));
                    }
                    match &w.kind {
                        WorkflowKind::Standard => {
                            if let Err(e) = StandardParams::from_params(&w.params) {
                                problems.push(format!("workflow `{}`: {e}", w.id));
                            }
                        }
                        WorkflowKind::Timeseries => {
                            if let Err(e) = TimeseriesParams::from_params(&w.params) {
                                problems.push(format!("workflow `{}`: {e}", w.id));
                            }
                        }
                        WorkflowKind::Plugin(id) => {
                            if !opts.workflow_registry.contains(id) {
                                problems
                                    .push(format!("workflow `{}`: plugin `{id}` not registered", w.id));
                            }
                        }
                    }
                }
            }
        }
        if self.estimation.metrics.is_empty() {
            problems.push("estimation.metrics is empty".to_string());
        }
        let declared: Vec<String> = self
            .estimation
            .evaluator
            .as_deref()
            .and_then(|id| opts.evaluator_registry.get(id).map(|e| e.declared()))
            .unwrap_or_default();
        if let Some(id) = &self.estimation.evaluator {
            if !opts.evaluator_registry.contains(id) {
                problems.push(format!("evaluator `{id}` not registered"));
            }
        }
        for m in &self.estimation.metrics {
            let name = m.as_str();
            let builtin = crate::metrics::CLASSIFICATION_METRICS.contains(&name)
                || crate::metrics::REGRESSION_METRICS.contains(&name)
                || crate::metrics::TIME_METRICS.contains(&name);
            let from_evaluator = declared.iter().any(|d| d == name);
            if self.estimation.evaluator.is_some() {
                if !from_evaluator && !crate::metrics::TIME_METRICS.contains(&name) {
                    problems.push(format!("metric `{m}` not declared by the evaluator"));
                }
            } else if !builtin {
                problems.push(format!("unknown metric `{m}`"));
            }
        }
        if let Err(e) = self.estimation_task() {
            problems.push(e);
        }
        if let Err(e) = self.cluster() {
            problems.push(e);
        }
        problems
    }
}

impl TaskConfig {
    fn describe(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.csv_path.clone())
    }
}

fn parse_cluster_text(text: &str) -> Option<Cluster> {
    match text {
        "off" => Some(Cluster::Off),
        "auto" => Some(Cluster::Auto),
        n => n.parse::<usize>().ok().map(Cluster::Workers),
    }
}

fn kind_from_name(name: Option<&str>, params: &ParamMap) -> WorkflowKind {
    match name {
        Some("standardWF") => WorkflowKind::Standard,
        Some("timeseriesWF") => WorkflowKind::Timeseries,
        Some(plugin) => WorkflowKind::Plugin(plugin.to_string()),
        None => Workflow::infer_kind(params),
    }
}

fn default_id(kind: &WorkflowKind, params: &ParamMap) -> String {
    if let Some(learner) = params.get("learner").and_then(|v| v.as_str()) {
        return learner.to_string();
    }
    match kind {
        WorkflowKind::Plugin(id) => id.clone(),
        WorkflowKind::Timeseries => "timeseriesWF".to_string(),
        WorkflowKind::Standard => "standardWF".to_string(),
    }
}

fn resolve_path(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
