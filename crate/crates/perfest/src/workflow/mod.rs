//! Workflows: the learn-then-predict contract evaluated on one train/test
//! pair, the two generic workflows, built-in learners, user plugins and
//! cartesian variant expansion.
//!
//! A [`Workflow`] is a name plus a parameter map; parameters are parsed
//! into a concrete learner/pre/post configuration only when an iteration
//! runs, so unknown learners or malformed parameters surface as invalid
//! iterations rather than aborting an experiment.

mod learner;
mod standard;
mod timeseries;
mod variants;

pub use learner::{
    fit_learner, predict_model, register_learner, LearnerSpec, Model, OutputShape, UserLearner,
    UserModel,
};
pub use standard::{standard_wf, StandardParams};
pub use timeseries::{timeseries_wf, TimeseriesParams, WindowKind};
pub use variants::{workflow_variants, VariantGrid};

use std::collections::HashMap;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Column, DataFrame, Formula, FrameError};
use crate::prepost::PrepostError;

/// Ordered parameter map; insertion order drives variant numbering.
pub type ParamMap = serde_json::Map<String, serde_json::Value>;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("unknown learner `{0}`")]
    UnknownLearner(String),
    #[error("learner `{learner}` failed: {message}")]
    LearnerFailed { learner: String, message: String },
    #[error("invalid workflow parameter `{name}`: {message}")]
    BadParam { name: String, message: String },
    #[error("workflow plugin `{0}` is not registered")]
    UnknownPlugin(String),
    #[error("plugin `{plugin}` violated the workflow contract: {message}")]
    ContractViolation { plugin: String, message: String },
    #[error("plugin `{plugin}` failed: {message}")]
    PluginFailed { plugin: String, message: String },
    #[error("empty {0} set")]
    EmptyData(&'static str),
    #[error(transparent)]
    Prepost(#[from] PrepostError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("variant expansion: {0}")]
    Variants(String),
}

/// Kind of a workflow; plugins carry their registry id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkflowKind {
    Standard,
    Timeseries,
    Plugin(String),
}

/// A workflow declaration: unique id, kind, and raw parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workflow {
    #[serde(rename = "wfID")]
    pub id: String,
    pub kind: WorkflowKind,
    pub params: ParamMap,
}

impl Workflow {
    pub fn new(id: impl Into<String>, kind: WorkflowKind, params: ParamMap) -> Self {
        Workflow {
            id: id.into(),
            kind,
            params,
        }
    }

    /// Infers the kind the way the generic constructors do: a `type`
    /// parameter selects the time-series workflow, everything else is
    /// the standard one.
    pub fn infer_kind(params: &ParamMap) -> WorkflowKind {
        if params.contains_key("type") {
            WorkflowKind::Timeseries
        } else {
            WorkflowKind::Standard
        }
    }
}

/// Shape of the predictions a workflow returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predictions {
    /// Class labels; `None` marks a missing prediction.
    Labels(Vec<Option<String>>),
    /// Numeric values; `None` marks a missing prediction.
    Numeric(Vec<Option<f64>>),
    /// Per-row class probabilities over `class_order`.
    Probabilities {
        class_order: Vec<String>,
        rows: Vec<Vec<f64>>,
    },
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Labels(v) => v.len(),
            Predictions::Numeric(v) => v.len(),
            Predictions::Probabilities { rows, .. } => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Validates the probability invariants: non-negative rows summing to 1.
    pub fn validate(&self) -> Result<(), WorkflowError> {
        if let Predictions::Probabilities { class_order, rows } = self {
            for (i, row) in rows.iter().enumerate() {
                if row.len() != class_order.len() {
                    return Err(WorkflowError::BadParam {
                        name: "preds".into(),
                        message: format!("probability row {i} has wrong width"),
                    });
                }
                if row.iter().any(|&p| p < 0.0) {
                    return Err(WorkflowError::BadParam {
                        name: "preds".into(),
                        message: format!("negative probability in row {i}"),
                    });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(WorkflowError::BadParam {
                        name: "preds".into(),
                        message: format!("probability row {i} sums to {sum}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Converts probabilities to labels by argmax; ties go to the lowest
    /// class index. Labels and numeric predictions pass through unchanged.
    pub fn to_labels(&self) -> Predictions {
        match self {
            Predictions::Probabilities { class_order, rows } => Predictions::Labels(
                rows.iter()
                    .map(|row| {
                        let mut best = 0usize;
                        for (j, &p) in row.iter().enumerate() {
                            if p > row[best] {
                                best = j;
                            }
                        }
                        Some(class_order[best].clone())
                    })
                    .collect(),
            ),
            other => other.clone(),
        }
    }
}

/// Train/test wall-clock durations in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorkflowTimes {
    pub train: f64,
    pub test: f64,
}

/// The outcome of one workflow run on a train/test pair.
#[derive(Debug, Clone)]
pub struct WorkflowResult {
    /// Target values of the (surviving) test rows, in test order.
    pub trues: Column,
    pub preds: Predictions,
    pub times: WorkflowTimes,
    /// Optional named payloads a workflow chooses to return.
    pub extras: HashMap<String, serde_json::Value>,
}

impl WorkflowResult {
    /// Checks the result invariants: prediction rows match the trues.
    pub fn validate(&self) -> Result<(), WorkflowError> {
        if self.preds.len() != self.trues.len() {
            return Err(WorkflowError::ContractViolation {
                plugin: "<workflow>".into(),
                message: format!(
                    "{} predictions for {} test rows",
                    self.preds.len(),
                    self.trues.len()
                ),
            });
        }
        self.preds.validate()
    }
}

/// Execution context handed to user workflow plugins.
pub struct PluginContext<'a> {
    pub formula: &'a Formula,
    pub train: &'a DataFrame,
    pub test: &'a DataFrame,
    pub params: &'a ParamMap,
    /// Seed for any randomness the plugin needs; derived from the
    /// experiment seed and the iteration, never from the workflow.
    pub rng_seed: u64,
}

/// A user-defined workflow registered under a string id.
///
/// The contract mirrors the generic workflows: given a formula and a
/// train/test pair, return the test trues and matching predictions.
pub trait UserWorkflow: Send + Sync {
    fn run(&self, ctx: &PluginContext<'_>) -> Result<WorkflowResult, String>;

    /// Plugins that touch shared state can opt out of concurrent
    /// execution; their iterations then run serially.
    fn concurrency_safe(&self) -> bool {
        true
    }
}

/// Registry of workflow plugins, keyed by id.
#[derive(Default, Clone)]
pub struct WorkflowRegistry {
    plugins: HashMap<String, Arc<dyn UserWorkflow>>,
}

impl WorkflowRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, id: impl Into<String>, wf: Arc<dyn UserWorkflow>) {
        self.plugins.insert(id.into(), wf);
    }

    pub fn get(&self, id: &str) -> Option<&Arc<dyn UserWorkflow>> {
        self.plugins.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.plugins.contains_key(id)
    }
}

/// Invokes a registered user workflow and validates its result.
///
/// Wall-clock times are attached when the plugin reported none.
pub fn run_user_workflow(
    registry: &WorkflowRegistry,
    plugin_id: &str,
    formula: &Formula,
    train: &DataFrame,
    test: &DataFrame,
    params: &ParamMap,
    rng_seed: u64,
) -> Result<WorkflowResult, WorkflowError> {
    let plugin = registry
        .get(plugin_id)
        .ok_or_else(|| WorkflowError::UnknownPlugin(plugin_id.to_string()))?;
    let ctx = PluginContext {
        formula,
        train,
        test,
        params,
        rng_seed,
    };
    let started = std::time::Instant::now();
    let mut result = plugin
        .run(&ctx)
        .map_err(|message| WorkflowError::PluginFailed {
            plugin: plugin_id.to_string(),
            message,
        })?;
    let elapsed = started.elapsed().as_secs_f64();
    result.validate().map_err(|e| match e {
        WorkflowError::ContractViolation { message, .. } => WorkflowError::ContractViolation {
            plugin: plugin_id.to_string(),
            message,
        },
        other => other,
    })?;
    if result.times.train == 0.0 && result.times.test == 0.0 {
        result.times = WorkflowTimes {
            train: elapsed,
            test: 0.0,
        };
    }
    Ok(result)
}

/// Dispatches a workflow by kind. `rng` seeds per-iteration randomness
/// (resampling pre-steps, plugin draws).
pub fn run_workflow(
    registry: &WorkflowRegistry,
    workflow: &Workflow,
    formula: &Formula,
    train: &DataFrame,
    test: &DataFrame,
    task_kind: crate::frame::TaskKind,
    rng: &mut ChaCha8Rng,
) -> Result<WorkflowResult, WorkflowError> {
    match &workflow.kind {
        WorkflowKind::Standard => {
            let params = StandardParams::from_params(&workflow.params)?;
            standard_wf(formula, train, test, &params, task_kind, rng)
        }
        WorkflowKind::Timeseries => {
            let params = TimeseriesParams::from_params(&workflow.params)?;
            timeseries_wf(formula, train, test, &params, task_kind, rng)
        }
        WorkflowKind::Plugin(id) => {
            use rand::RngExt;
            let seed: u64 = rng.random();
            run_user_workflow(registry, id, formula, train, test, &workflow.params, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::parse_formula;

    fn frame() -> DataFrame {
        DataFrame::new(vec![
            Column::numeric("x", vec![Some(1.0), Some(2.0)]).unwrap(),
            Column::numeric("y", vec![Some(3.0), Some(4.0)]).unwrap(),
        ])
        .unwrap()
    }

    struct Echo;
    impl UserWorkflow for Echo {
        fn run(&self, ctx: &PluginContext<'_>) -> Result<WorkflowResult, String> {
            let trues = crate::frame::response_values(ctx.formula, ctx.test).unwrap();
            let preds = match &trues.data {
                crate::frame::ColumnData::Numeric(v) => Predictions::Numeric(v.clone()),
                _ => unreachable!(),
            };
            let mut extras = HashMap::new();
            extras.insert("note".to_string(), serde_json::json!("echo"));
            Ok(WorkflowResult {
                trues,
                preds,
                times: WorkflowTimes::default(),
                extras,
            })
        }
    }

    struct WrongLength;
    impl UserWorkflow for WrongLength {
        fn run(&self, ctx: &PluginContext<'_>) -> Result<WorkflowResult, String> {
            let trues = crate::frame::response_values(ctx.formula, ctx.test).unwrap();
            Ok(WorkflowResult {
                trues,
                preds: Predictions::Numeric(vec![Some(0.0); 99]),
                times: WorkflowTimes::default(),
                extras: HashMap::new(),
            })
        }
    }

    #[test]
    fn plugin_echo_round_trip() {
        let mut reg = WorkflowRegistry::new();
        reg.register("echo", Arc::new(Echo));
        let f = frame();
        let formula = parse_formula("y ~ .").unwrap();
        let res =
            run_user_workflow(&reg, "echo", &formula, &f, &f, &ParamMap::new(), 7).unwrap();
        assert_eq!(res.preds.len(), 2);
        assert_eq!(res.preds, Predictions::Numeric(vec![Some(3.0), Some(4.0)]));
        // Extras payloads are preserved.
        assert_eq!(res.extras["note"], serde_json::json!("echo"));
    }

    #[test]
    fn plugin_contract_violation() {
        let mut reg = WorkflowRegistry::new();
        reg.register("bad", Arc::new(WrongLength));
        let f = frame();
        let formula = parse_formula("y ~ .").unwrap();
        let err =
            run_user_workflow(&reg, "bad", &formula, &f, &f, &ParamMap::new(), 7).unwrap_err();
        assert!(matches!(err, WorkflowError::ContractViolation { .. }));
    }

    #[test]
    fn unregistered_plugin_errors() {
        let reg = WorkflowRegistry::new();
        let f = frame();
        let formula = parse_formula("y ~ .").unwrap();
        assert!(matches!(
            run_user_workflow(&reg, "nope", &formula, &f, &f, &ParamMap::new(), 7),
            Err(WorkflowError::UnknownPlugin(_))
        ));
    }

    #[test]
    fn probability_invariants_enforced() {
        let good = Predictions::Probabilities {
            class_order: vec!["a".into(), "b".into()],
            rows: vec![vec![0.25, 0.75]],
        };
        assert!(good.validate().is_ok());
        let bad = Predictions::Probabilities {
            class_order: vec!["a".into(), "b".into()],
            rows: vec![vec![0.5, 0.6]],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn argmax_tie_breaks_to_lowest_index() {
        let p = Predictions::Probabilities {
            class_order: vec!["a".into(), "b".into()],
            rows: vec![vec![0.5, 0.5], vec![0.2, 0.8]],
        };
        match p.to_labels() {
            Predictions::Labels(l) => {
                assert_eq!(l[0].as_deref(), Some("a"));
                assert_eq!(l[1].as_deref(), Some("b"));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn kind_inference_from_type_param() {
        let mut p = ParamMap::new();
        p.insert("learner".into(), serde_json::json!("knn"));
        assert_eq!(Workflow::infer_kind(&p), WorkflowKind::Standard);
        p.insert("type".into(), serde_json::json!("slide"));
        assert_eq!(Workflow::infer_kind(&p), WorkflowKind::Timeseries);
    }
}
