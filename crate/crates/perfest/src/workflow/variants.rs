//! Cartesian expansion of workflow parameter grids.
//!
//! Any JSON-array value in the grid (top level or nested inside a `*.pars`
//! object) is a candidate list; the expansion walks all combinations in
//! declaration order with the last declared parameter varying fastest.
//! Parameters named in `as_is` are passed through whole, which is how a
//! genuinely vector-valued parameter (a pre-processing chain, say) escapes
//! expansion.

use serde_json::Value;

use crate::workflow::{ParamMap, Workflow, WorkflowError, WorkflowKind};

/// A workflow template with candidate values to expand.
#[derive(Debug, Clone)]
pub struct VariantGrid {
    /// Workflow kind; `None` infers it from the parameters.
    pub kind: Option<WorkflowKind>,
    /// Explicit base name for generated ids; defaults to the learner
    /// name (or plugin id).
    pub base_id: Option<String>,
    /// Template parameters; arrays mark candidate lists.
    pub params: ParamMap,
    /// Parameter names excluded from expansion.
    pub as_is: Vec<String>,
}

/// Location of one varying parameter: either a top-level key or a key
/// inside a nested parameter object such as `learner.pars`.
#[derive(Debug, Clone, PartialEq)]
enum Slot {
    Top(String),
    Nested(String, String),
}

fn collect_dims(grid: &VariantGrid) -> Result<Vec<(Slot, Vec<Value>)>, WorkflowError> {
    let mut dims = Vec::new();
    for (key, value) in &grid.params {
        if grid.as_is.iter().any(|n| n == key) {
            continue;
        }
        match value {
            Value::Array(items) => {
                if items.is_empty() {
                    return Err(WorkflowError::Variants(format!(
                        "parameter `{key}` has an empty candidate list"
                    )));
                }
                dims.push((Slot::Top(key.clone()), items.clone()));
            }
            Value::Object(nested) if key.ends_with(".pars") => {
                for (inner_key, inner_value) in nested {
                    if grid.as_is.iter().any(|n| n == inner_key) {
                        continue;
                    }
                    if let Value::Array(items) = inner_value {
                        if items.is_empty() {
                            return Err(WorkflowError::Variants(format!(
                                "parameter `{key}.{inner_key}` has an empty candidate list"
                            )));
                        }
                        dims.push((
                            Slot::Nested(key.clone(), inner_key.clone()),
                            items.clone(),
                        ));
                    }
                }
            }
            _ => {}
        }
    }
    Ok(dims)
}

fn instantiate(base: &ParamMap, dims: &[(Slot, Vec<Value>)], choice: &[usize]) -> ParamMap {
    let mut params = base.clone();
    for ((slot, candidates), &pick) in dims.iter().zip(choice) {
        let value = candidates[pick].clone();
        match slot {
            Slot::Top(key) => {
                params.insert(key.clone(), value);
            }
            Slot::Nested(outer, inner) => {
                if let Some(Value::Object(nested)) = params.get_mut(outer) {
                    nested.insert(inner.clone(), value);
                }
            }
        }
    }
    params
}

fn base_name(grid: &VariantGrid, params: &ParamMap, kind: &WorkflowKind) -> String {
    if let Some(name) = &grid.base_id {
        return name.clone();
    }
    if let Some(learner) = params.get("learner").and_then(|v| v.as_str()) {
        return learner.to_string();
    }
    match kind {
        WorkflowKind::Plugin(id) => id.clone(),
        WorkflowKind::Timeseries => "timeseriesWF".to_string(),
        WorkflowKind::Standard => "standardWF".to_string(),
    }
}

/// Expands a grid into concrete workflows.
///
/// Ids are `<base>.v1`, `<base>.v2`, ... in expansion order, numbered per
/// base name; a base that yields exactly one variant keeps its bare name.
pub fn workflow_variants(grid: &VariantGrid) -> Result<Vec<Workflow>, WorkflowError> {
    let dims = collect_dims(grid)?;
    let kind = grid
        .kind
        .clone()
        .unwrap_or_else(|| Workflow::infer_kind(&grid.params));

    let total: usize = dims.iter().map(|(_, c)| c.len()).product();
    let mut expanded: Vec<(String, ParamMap)> = Vec::with_capacity(total);
    let mut choice = vec![0usize; dims.len()];
    loop {
        let params = instantiate(&grid.params, &dims, &choice);
        let name = base_name(grid, &params, &kind);
        expanded.push((name, params));
        // Odometer step: the last declared dimension varies fastest.
        let mut pos = dims.len();
        loop {
            if pos == 0 {
                // All combinations emitted.
                let mut counts: std::collections::HashMap<String, usize> =
                    std::collections::HashMap::new();
                for (name, _) in &expanded {
                    *counts.entry(name.clone()).or_default() += 1;
                }
                let mut seen: std::collections::HashMap<String, usize> =
                    std::collections::HashMap::new();
                let workflows = expanded
                    .into_iter()
                    .map(|(name, params)| {
                        let id = if counts[&name] == 1 {
                            name.clone()
                        } else {
                            let k = seen.entry(name.clone()).or_default();
                            *k += 1;
                            format!("{name}.v{k}")
                        };
                        Workflow::new(id, kind.clone(), params)
                    })
                    .collect();
                return Ok(workflows);
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < dims[pos].1.len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(params: &str, as_is: &[&str]) -> VariantGrid {
        VariantGrid {
            kind: None,
            base_id: None,
            params: serde_json::from_str(params).unwrap(),
            as_is: as_is.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn cost_gamma_grid_expands_to_fifteen() {
        let g = grid(
            r#"{"learner":"svm","learner.pars":{"cost":[1,2,3,4,5],"gamma":[0.1,0.05,0.01]}}"#,
            &[],
        );
        let wfs = workflow_variants(&g).unwrap();
        assert_eq!(wfs.len(), 15);
        assert_eq!(wfs[0].id, "svm.v1");
        assert_eq!(wfs[14].id, "svm.v15");
        // Last declared parameter varies fastest.
        let pars = |i: usize, key: &str| -> f64 {
            wfs[i].params["learner.pars"][key].as_f64().unwrap()
        };
        assert_eq!(pars(0, "cost"), 1.0);
        assert_eq!(pars(0, "gamma"), 0.1);
        assert_eq!(pars(1, "cost"), 1.0);
        assert_eq!(pars(1, "gamma"), 0.05);
        assert_eq!(pars(3, "cost"), 2.0);
        assert_eq!(pars(3, "gamma"), 0.1);
        assert_eq!(pars(14, "cost"), 5.0);
        assert_eq!(pars(14, "gamma"), 0.01);
    }

    #[test]
    fn three_way_grid_expands_to_twelve() {
        let g = VariantGrid {
            kind: Some(WorkflowKind::Plugin("ensemble".into())),
            base_id: None,
            params: serde_json::from_str(
                r#"{"se":[0,1],"step":[true,false],"weightRT":[0.4,0.5,0.6]}"#,
            )
            .unwrap(),
            as_is: vec![],
        };
        let wfs = workflow_variants(&g).unwrap();
        assert_eq!(wfs.len(), 12);
        assert_eq!(wfs[0].id, "ensemble.v1");
        assert_eq!(wfs[11].id, "ensemble.v12");
        assert_eq!(wfs[0].params["weightRT"].as_f64(), Some(0.4));
        assert_eq!(wfs[1].params["weightRT"].as_f64(), Some(0.5));
        assert_eq!(wfs[3].params["weightRT"].as_f64(), Some(0.4));
        assert_eq!(wfs[3].params["step"].as_bool(), Some(false));
    }

    #[test]
    fn as_is_passes_vector_whole() {
        let g = grid(
            r#"{"learner":"linreg","pre":["centralImp","scale"]}"#,
            &["pre"],
        );
        let wfs = workflow_variants(&g).unwrap();
        assert_eq!(wfs.len(), 1);
        assert_eq!(wfs[0].id, "linreg");
        assert_eq!(
            wfs[0].params["pre"],
            serde_json::json!(["centralImp", "scale"])
        );
    }

    #[test]
    fn varying_learner_names_variants_per_learner() {
        let g = grid(r#"{"learner":["knn","linreg","meanBaseline"]}"#, &[]);
        let wfs = workflow_variants(&g).unwrap();
        assert_eq!(wfs.len(), 3);
        let ids: Vec<&str> = wfs.iter().map(|w| w.id.as_str()).collect();
        assert_eq!(ids, vec!["knn", "linreg", "meanBaseline"]);
    }

    #[test]
    fn empty_candidate_list_is_an_error() {
        let g = grid(r#"{"learner":"knn","learner.pars":{"k":[]}}"#, &[]);
        assert!(matches!(
            workflow_variants(&g),
            Err(WorkflowError::Variants(_))
        ));
    }

    #[test]
    fn type_parameter_selects_timeseries_kind() {
        let g = grid(
            r#"{"learner":"linreg","type":"slide","relearn.step":[5,10]}"#,
            &["type"],
        );
        let wfs = workflow_variants(&g).unwrap();
        assert_eq!(wfs.len(), 2);
        assert!(wfs.iter().all(|w| w.kind == WorkflowKind::Timeseries));
    }

    #[test]
    fn variant_count_equals_product_of_candidate_lengths() {
        let g = grid(
            r#"{"learner":"knn","learner.pars":{"k":[1,3,5,7],"weighted":[true,false]},
                "predictor.pars":{"type":["class","prob"]}}"#,
            &[],
        );
        let wfs = workflow_variants(&g).unwrap();
        assert_eq!(wfs.len(), 4 * 2 * 2);
        // Ids are unique.
        let mut ids: Vec<&str> = wfs.iter().map(|w| w.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 16);
    }
}
