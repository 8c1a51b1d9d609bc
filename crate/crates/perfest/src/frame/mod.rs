//! Columnar data sets and predictive-task definitions.
//!
//! A [`DataFrame`] holds named columns of equal length; each column is
//! either numeric or categorical and every cell may be missing. Frames are
//! immutable after construction and safe to share across threads.
//!
//! A [`PredTask`] binds a [`Formula`] (target plus predictor subset) to a
//! frame and infers the task type from the target column: categorical
//! targets give classification tasks, numeric targets regression tasks
//! (or time-series regression when the rows are flagged as time ordered).

mod csv;
mod formula;

pub use csv::{read_csv, read_csv_str, write_csv, write_csv_str, CsvOptions};
pub use formula::{parse_formula, Formula, Predictors};

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by frame construction, CSV ingestion and task definition.
#[derive(Debug, Error)]
pub enum FrameError {
    #[error("CSV parse error at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("empty input: no rows or columns")]
    Empty,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("columns have unequal lengths ({0} vs {1})")]
    UnequalLengths(usize, usize),
    #[error("non-finite numeric value in column `{0}`")]
    NonFinite(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("formula syntax error at position {position}: {message}")]
    FormulaSyntax { position: usize, message: String },
    #[error("row index {index} out of range for {n_rows} rows")]
    RowOutOfRange { index: usize, n_rows: usize },
    #[error("target column `{0}` contains missing values")]
    MissingTarget(String),
    #[error("target `{0}` may not appear among the predictors")]
    TargetInPredictors(String),
    #[error("time-ordered tasks require a numeric target, `{0}` is categorical")]
    TimeseriesCategoricalTarget(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Cell storage of one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    /// Present cells are finite floats.
    Numeric(Vec<Option<f64>>),
    /// Present cells are indices into `categories`.
    Categorical {
        codes: Vec<Option<u32>>,
        /// Distinct labels in lexicographic order.
        categories: Vec<String>,
    },
}

/// A named column of a [`DataFrame`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    /// Builds a numeric column, rejecting non-finite present values.
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Result<Self, FrameError> {
        let name = name.into();
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(FrameError::NonFinite(name));
        }
        Ok(Column {
            name,
            data: ColumnData::Numeric(values),
        })
    }

    /// Builds a categorical column from string labels; `None` marks missing.
    /// The category set is the lexicographically sorted distinct labels.
    pub fn categorical(name: impl Into<String>, labels: Vec<Option<&str>>) -> Self {
        let mut categories: Vec<String> = labels
            .iter()
            .flatten()
            .map(|s| s.to_string())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        categories.sort();
        let codes = labels
            .iter()
            .map(|l| l.map(|s| categories.binary_search_by(|c| c.as_str().cmp(s)).unwrap() as u32))
            .collect();
        Column {
            name: name.into(),
            data: ColumnData::Categorical { codes, categories },
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.data, ColumnData::Numeric(_))
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.data, ColumnData::Categorical { .. })
    }

    /// Number of missing cells.
    pub fn missing_count(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.iter().filter(|c| c.is_none()).count(),
            ColumnData::Categorical { codes, .. } => codes.iter().filter(|c| c.is_none()).count(),
        }
    }

    /// Whether the cell at `row` is missing.
    pub fn is_missing(&self, row: usize) -> bool {
        match &self.data {
            ColumnData::Numeric(v) => v[row].is_none(),
            ColumnData::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    /// Numeric value at `row`, if the column is numeric and the cell present.
    pub fn numeric_at(&self, row: usize) -> Option<f64> {
        match &self.data {
            ColumnData::Numeric(v) => v[row],
            _ => None,
        }
    }

    /// Label at `row`, if the column is categorical and the cell present.
    pub fn label_at(&self, row: usize) -> Option<&str> {
        match &self.data {
            ColumnData::Categorical { codes, categories } => {
                codes[row].map(|c| categories[c as usize].as_str())
            }
            _ => None,
        }
    }

    /// Category labels (empty for numeric columns).
    pub fn categories(&self) -> &[String] {
        match &self.data {
            ColumnData::Categorical { categories, .. } => categories,
            _ => &[],
        }
    }

    /// New column with the rows at `indices`, in order. Duplicates allowed.
    pub fn take(&self, indices: &[usize]) -> Column {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(indices.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical { codes, categories } => ColumnData::Categorical {
                codes: indices.iter().map(|&i| codes[i]).collect(),
                categories: categories.clone(),
            },
        };
        Column {
            name: self.name.clone(),
            data,
        }
    }
}

/// An immutable table of named columns with equal lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFrame {
    columns: Vec<Column>,
    n_rows: usize,
    /// Source name used for default task ids, e.g. the CSV file stem.
    pub source_name: Option<String>,
}

impl DataFrame {
    pub fn new(columns: Vec<Column>) -> Result<Self, FrameError> {
        if columns.is_empty() {
            return Err(FrameError::Empty);
        }
        let n_rows = columns[0].len();
        let mut seen = HashSet::new();
        for c in &columns {
            if c.len() != n_rows {
                return Err(FrameError::UnequalLengths(n_rows, c.len()));
            }
            if !seen.insert(c.name.clone()) {
                return Err(FrameError::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(DataFrame {
            columns,
            n_rows,
            source_name: None,
        })
    }

    pub fn with_source_name(mut self, name: impl Into<String>) -> Self {
        self.source_name = Some(name.into());
        self
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&Column, FrameError> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| FrameError::UnknownColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// New frame with the rows at `indices`, in the given order.
    /// Duplicate indices are permitted (bootstrap resamples need them).
    pub fn select_rows(&self, indices: &[usize]) -> Result<DataFrame, FrameError> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_rows) {
            return Err(FrameError::RowOutOfRange {
                index: bad,
                n_rows: self.n_rows,
            });
        }
        Ok(DataFrame {
            columns: self.columns.iter().map(|c| c.take(indices)).collect(),
            n_rows: indices.len(),
            source_name: self.source_name.clone(),
        })
    }

    /// New frame without the named column.
    pub fn drop_column(&self, name: &str) -> Result<DataFrame, FrameError> {
        if !self.has_column(name) {
            return Err(FrameError::UnknownColumn(name.to_string()));
        }
        Ok(DataFrame {
            columns: self
                .columns
                .iter()
                .filter(|c| c.name != name)
                .cloned()
                .collect(),
            n_rows: self.n_rows,
            source_name: self.source_name.clone(),
        })
    }

    /// New frame where the named columns are replaced.
    pub fn with_columns_replaced(&self, replacements: Vec<Column>) -> Result<DataFrame, FrameError> {
        let mut columns = self.columns.clone();
        for r in replacements {
            match columns.iter_mut().find(|c| c.name == r.name) {
                Some(slot) => {
                    if r.len() != self.n_rows {
                        return Err(FrameError::UnequalLengths(self.n_rows, r.len()));
                    }
                    *slot = r;
                }
                None => return Err(FrameError::UnknownColumn(r.name)),
            }
        }
        Ok(DataFrame {
            columns,
            n_rows: self.n_rows,
            source_name: self.source_name.clone(),
        })
    }

    /// Appends the rows of `other`, which must have the same column layout.
    pub fn concat_rows(&self, other: &DataFrame) -> Result<DataFrame, FrameError> {
        let mut columns = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            let o = other.column(&c.name)?;
            let data = match (&c.data, &o.data) {
                (ColumnData::Numeric(a), ColumnData::Numeric(b)) => {
                    let mut v = a.clone();
                    v.extend_from_slice(b);
                    ColumnData::Numeric(v)
                }
                (
                    ColumnData::Categorical { codes, categories },
                    ColumnData::Categorical {
                        codes: oc,
                        categories: ocat,
                    },
                ) => {
                    // Re-code the other side when category universes differ.
                    let mut v = codes.clone();
                    if categories == ocat {
                        v.extend_from_slice(oc);
                        ColumnData::Categorical {
                            codes: v,
                            categories: categories.clone(),
                        }
                    } else {
                        let mut cats = categories.clone();
                        for l in ocat {
                            if !cats.contains(l) {
                                cats.push(l.clone());
                            }
                        }
                        cats.sort();
                        let remap = |code: Option<u32>, from: &[String]| {
                            code.map(|i| {
                                cats.iter().position(|c| c == &from[i as usize]).unwrap() as u32
                            })
                        };
                        let mut merged: Vec<Option<u32>> =
                            codes.iter().map(|&c| remap(c, categories)).collect();
                        merged.extend(oc.iter().map(|&c| remap(c, ocat)));
                        v = merged;
                        ColumnData::Categorical {
                            codes: v,
                            categories: cats,
                        }
                    }
                }
                _ => return Err(FrameError::UnknownColumn(c.name.clone())),
            };
            columns.push(Column {
                name: c.name.clone(),
                data,
            });
        }
        Ok(DataFrame {
            columns,
            n_rows: self.n_rows + other.n_rows,
            source_name: self.source_name.clone(),
        })
    }
}

/// Kind of a predictive task, inferred from the target column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Classification,
    Regression,
    TimeseriesRegression,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskKind::Classification => write!(f, "classification"),
            TaskKind::Regression => write!(f, "regression"),
            TaskKind::TimeseriesRegression => write!(f, "timeseries-regression"),
        }
    }
}

/// A predictive task: a formula bound to a data set.
#[derive(Debug, Clone)]
pub struct PredTask {
    pub id: String,
    pub formula: Formula,
    data: Arc<DataFrame>,
    /// Whether the task holds its own snapshot of the data.
    pub copied: bool,
    pub task_kind: TaskKind,
}

impl PredTask {
    pub fn data(&self) -> &DataFrame {
        &self.data
    }

    /// True when this task shares storage with `frame`.
    pub fn shares_data_with(&self, frame: &Arc<DataFrame>) -> bool {
        Arc::ptr_eq(&self.data, frame)
    }

    pub fn n_rows(&self) -> usize {
        self.data.n_rows()
    }

    /// Names of the predictor columns, resolved against the data.
    pub fn predictor_names(&self) -> Vec<String> {
        self.formula.predictor_names(&self.data)
    }
}

/// Options for [`make_task`].
#[derive(Debug, Clone, Default)]
pub struct TaskOptions {
    /// Explicit task id; defaults to `<sourceName>.<target>`.
    pub id: Option<String>,
    /// Snapshot the data instead of sharing the caller's allocation.
    pub copy: bool,
    /// Mark the rows as time ordered (numeric targets only).
    pub time_ordered: bool,
}

/// Creates a predictive task from a formula and a data frame.
///
/// The task type is inferred from the target column: categorical targets
/// give classification, numeric targets regression (time-series regression
/// when `time_ordered` is set). Targets with missing values are rejected:
/// a truth that is absent can neither be learned from nor scored against.
pub fn make_task(
    formula: Formula,
    data: &Arc<DataFrame>,
    opts: TaskOptions,
) -> Result<PredTask, FrameError> {
    let target = data.column(&formula.target)?;
    for p in formula.explicit_predictors() {
        data.column(p)?;
        if *p == formula.target {
            return Err(FrameError::TargetInPredictors(formula.target.clone()));
        }
    }
    if target.missing_count() > 0 {
        return Err(FrameError::MissingTarget(formula.target.clone()));
    }
    let task_kind = if target.is_categorical() {
        if opts.time_ordered {
            return Err(FrameError::TimeseriesCategoricalTarget(
                formula.target.clone(),
            ));
        }
        TaskKind::Classification
    } else if opts.time_ordered {
        TaskKind::TimeseriesRegression
    } else {
        TaskKind::Regression
    };
    let id = opts.id.unwrap_or_else(|| {
        let base = data.source_name.as_deref().unwrap_or("data");
        format!("{base}.{}", formula.target)
    });
    let data = if opts.copy {
        Arc::new((**data).clone())
    } else {
        Arc::clone(data)
    };
    Ok(PredTask {
        id,
        formula,
        data,
        copied: opts.copy,
        task_kind,
    })
}

/// The values of the target variable of `formula` in `data`, order preserved.
pub fn response_values(formula: &Formula, data: &DataFrame) -> Result<Column, FrameError> {
    Ok(data.column(&formula.target)?.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_frame() -> DataFrame {
        DataFrame::new(vec![
            Column::numeric("x", vec![Some(1.0), Some(2.0), Some(3.0)]).unwrap(),
            Column::categorical("y", vec![Some("a"), Some("b"), Some("a")]),
        ])
        .unwrap()
        .with_source_name("toy")
    }

    #[test]
    fn categorical_categories_are_sorted() {
        let c = Column::categorical("c", vec![Some("z"), Some("a"), None, Some("m")]);
        assert_eq!(c.categories(), ["a", "m", "z"]);
        assert_eq!(c.label_at(0), Some("z"));
        assert!(c.is_missing(2));
    }

    #[test]
    fn non_finite_numeric_rejected() {
        assert!(Column::numeric("x", vec![Some(f64::NAN)]).is_err());
        assert!(Column::numeric("x", vec![Some(f64::INFINITY)]).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = DataFrame::new(vec![
            Column::numeric("x", vec![Some(1.0)]).unwrap(),
            Column::numeric("x", vec![Some(2.0)]).unwrap(),
        ]);
        assert!(matches!(err, Err(FrameError::DuplicateColumn(_))));
    }

    #[test]
    fn select_rows_duplicates_and_bounds() {
        let f = toy_frame();
        let g = f.select_rows(&[0, 0, 2]).unwrap();
        assert_eq!(g.n_rows(), 3);
        assert_eq!(g.column("x").unwrap().numeric_at(1), Some(1.0));
        assert_eq!(g.column("y").unwrap().label_at(2), Some("a"));
        assert_eq!(f.select_rows(&[]).unwrap().n_rows(), 0);
        assert!(matches!(
            f.select_rows(&[5]),
            Err(FrameError::RowOutOfRange { index: 5, .. })
        ));
    }

    #[test]
    fn task_type_inference() {
        let f = Arc::new(toy_frame());
        let t = make_task(
            parse_formula("y ~ .").unwrap(),
            &f,
            TaskOptions::default(),
        )
        .unwrap();
        assert_eq!(t.task_kind, TaskKind::Classification);
        assert_eq!(t.id, "toy.y");

        let t = make_task(
            parse_formula("x ~ .").unwrap(),
            &f,
            TaskOptions::default(),
        )
        .unwrap();
        assert_eq!(t.task_kind, TaskKind::Regression);
        assert_eq!(t.id, "toy.x");
    }

    #[test]
    fn task_copy_semantics() {
        let f = Arc::new(toy_frame());
        let shared = make_task(
            parse_formula("y ~ .").unwrap(),
            &f,
            TaskOptions::default(),
        )
        .unwrap();
        assert!(shared.shares_data_with(&f));

        let copied = make_task(
            parse_formula("y ~ .").unwrap(),
            &f,
            TaskOptions {
                copy: true,
                ..TaskOptions::default()
            },
        )
        .unwrap();
        assert!(!copied.shares_data_with(&f));
        // The snapshot survives the source being dropped.
        drop(f);
        assert_eq!(copied.n_rows(), 3);
    }

    #[test]
    fn missing_target_rejected() {
        let f = Arc::new(
            DataFrame::new(vec![
                Column::numeric("x", vec![Some(1.0), Some(2.0)]).unwrap(),
                Column::numeric("t", vec![Some(1.0), None]).unwrap(),
            ])
            .unwrap(),
        );
        let err = make_task(
            parse_formula("t ~ .").unwrap(),
            &f,
            TaskOptions::default(),
        );
        assert!(matches!(err, Err(FrameError::MissingTarget(_))));
    }

    #[test]
    fn response_values_projects_target() {
        let f = toy_frame();
        let col = response_values(&parse_formula("x ~ .").unwrap(), &f).unwrap();
        assert_eq!(col.numeric_at(0), Some(1.0));
        assert_eq!(col.len(), 3);

        let empty = f.select_rows(&[]).unwrap();
        let col = response_values(&parse_formula("x ~ y").unwrap(), &empty).unwrap();
        assert!(col.is_empty());

        assert!(response_values(&parse_formula("z ~ .").unwrap(), &f).is_err());
    }
}
