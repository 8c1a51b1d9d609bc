//! Paired statistical comparison of workflows across tasks: rank
//! matrices, the Friedman test with the Iman-Davenport correction, the
//! Nemenyi and Bonferroni-Dunn post-hoc tests, Wilcoxon signed-rank and
//! paired t baselines, and critical-difference diagrams.

pub mod dist;
mod cd_diagram;
mod qtable;
mod wilcoxon;

pub use cd_diagram::{render_cd_diagram, CdDiagram, CdKind};
pub use qtable::{compute_nemenyi_q, nemenyi_q, normal_range_cdf, Q_TABLE_MAX_K};
pub use wilcoxon::{signed_rank_test, SignedRankOutcome, EXACT_LIMIT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ComparisonResults;
use dist::{f_quantile, normal_quantile, t_cdf};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("rank-based tests need at least two workflows, got {0}")]
    TooFewWorkflows(usize),
    #[error("no workflow has a complete score matrix (every task valid)")]
    NoCompleteWorkflows,
    #[error("the embedded critical-value table covers 2..=30 workflows, got {0}")]
    QTableRange(usize),
    #[error("unsupported significance level {0} (use 0.05 or 0.01)")]
    UnsupportedAlpha(f64),
    #[error("unknown baseline workflow `{0}`")]
    UnknownBaseline(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

/// Average scores, median scores and rank positions of k workflows over
/// N tasks, for one metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankSummary {
    pub workflows: Vec<String>,
    pub tasks: Vec<String>,
    /// `avg_scores[workflow][task]`.
    #[serde(rename = "avgScores")]
    pub avg_scores: Vec<Vec<f64>>,
    #[serde(rename = "medScores")]
    pub med_scores: Vec<Vec<f64>>,
    /// Rank positions per task; rank 1 is best, ties get mean ranks.
    #[serde(rename = "rks")]
    pub ranks: Vec<Vec<f64>>,
    /// Mean rank of each workflow across tasks.
    #[serde(rename = "avgRksWfs")]
    pub avg_ranks: Vec<f64>,
}

impl RankSummary {
    pub fn n_workflows(&self) -> usize {
        self.workflows.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }
}

/// Ranks one task's scores: rank 1 for the best score (lowest, or highest
/// under `maximize`), mean ranks for ties.
fn rank_column(scores: &[f64], maximize: bool) -> Vec<f64> {
    let k = scores.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let cmp = scores[a].partial_cmp(&scores[b]).unwrap();
        if maximize {
            cmp.reverse().then(a.cmp(&b))
        } else {
            cmp.then(a.cmp(&b))
        }
    });
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mean_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

/// Builds the rank summary from per-(workflow, task) average and median
/// scores. Callers exclude workflows with missing averages beforehand.
pub fn compute_ranks(
    workflows: Vec<String>,
    tasks: Vec<String>,
    avg_scores: Vec<Vec<f64>>,
    med_scores: Vec<Vec<f64>>,
    maximize: bool,
) -> Result<RankSummary, StatsError> {
    let k = workflows.len();
    if k < 2 {
        return Err(StatsError::TooFewWorkflows(k));
    }
    let n_tasks = tasks.len();
    let mut ranks = vec![vec![0.0; n_tasks]; k];
    for task in 0..n_tasks {
        let column: Vec<f64> = (0..k).map(|w| avg_scores[w][task]).collect();
        for (w, r) in rank_column(&column, maximize).into_iter().enumerate() {
            ranks[w][task] = r;
        }
    }
    let avg_ranks = ranks
        .iter()
        .map(|row| row.iter().sum::<f64>() / n_tasks as f64)
        .collect();
    Ok(RankSummary {
        workflows,
        tasks,
        avg_scores,
        med_scores,
        ranks,
        avg_ranks,
    })
}

/// Friedman test with the Iman-Davenport correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub chi: f64,
    #[serde(rename = "FF")]
    pub ff: f64,
    #[serde(rename = "critVal")]
    pub crit_val: f64,
    #[serde(rename = "rejNull")]
    pub reject_null: bool,
    pub alpha: f64,
}

/// Computes the Iman-Davenport statistic and decision from a Friedman
/// chi-square value with N tasks and k workflows.
///
/// The F statistic is `(N-1) chi / (N(k-1) - chi)` compared against the
/// `1 - alpha` F quantile with `(k-1, (k-1)(N-1))` degrees of freedom;
/// a collapsed denominator (perfectly consistent rankings) reports an
/// infinite statistic and rejects.
pub fn friedman_from_chi(chi: f64, n_tasks: usize, k: usize, alpha: f64) -> FriedmanResult {
    let n = n_tasks as f64;
    let kf = k as f64;
    let crit_val = f_quantile(1.0 - alpha, kf - 1.0, (kf - 1.0) * (n - 1.0));
    let denominator = n * (kf - 1.0) - chi;
    let ff = if denominator > 0.0 {
        (n - 1.0) * chi / denominator
    } else {
        f64::INFINITY
    };
    FriedmanResult {
        chi,
        ff,
        crit_val,
        reject_null: ff > crit_val,
        alpha,
    }
}

/// Friedman test over a rank summary.
pub fn friedman_test(rks: &RankSummary, alpha: f64) -> FriedmanResult {
    let k = rks.n_workflows() as f64;
    let n = rks.n_tasks() as f64;
    let sum_sq: f64 = rks.avg_ranks.iter().map(|r| r * r).sum();
    let chi = 12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0).powi(2) / 4.0);
    friedman_from_chi(chi, rks.n_tasks(), rks.n_workflows(), alpha)
}

/// Nemenyi post-hoc test: all pairwise average-rank differences against
/// one critical difference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NemenyiResult {
    #[serde(rename = "critDif")]
    pub crit_dif: f64,
    pub workflows: Vec<String>,
    /// `rk_difs[i][j]` = |avgRank_i - avgRank_j|.
    #[serde(rename = "rkDifs")]
    pub rk_difs: Vec<Vec<f64>>,
    #[serde(rename = "signifDifs")]
    pub signif_difs: Vec<Vec<bool>>,
}

/// The critical difference `q_alpha(k) * sqrt(k(k+1) / 6N)`.
fn critical_difference(q: f64, k: usize, n_tasks: usize) -> f64 {
    q * ((k * (k + 1)) as f64 / (6.0 * n_tasks as f64)).sqrt()
}

pub fn nemenyi_test(rks: &RankSummary, alpha: f64) -> Result<NemenyiResult, StatsError> {
    let k = rks.n_workflows();
    let q = nemenyi_q(k, alpha).ok_or(if !(2..=Q_TABLE_MAX_K).contains(&k) {
        StatsError::QTableRange(k)
    } else {
        StatsError::UnsupportedAlpha(alpha)
    })?;
    let crit_dif = critical_difference(q, k, rks.n_tasks());
    let rk_difs: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| (rks.avg_ranks[i] - rks.avg_ranks[j]).abs())
                .collect()
        })
        .collect();
    let signif_difs = rk_difs
        .iter()
        .map(|row| row.iter().map(|&d| d > crit_dif).collect())
        .collect();
    Ok(NemenyiResult {
        crit_dif,
        workflows: rks.workflows.clone(),
        rk_difs,
        signif_difs,
    })
}

/// Bonferroni-Dunn post-hoc test of every workflow against a baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BonferroniDunnResult {
    pub baseline: String,
    #[serde(rename = "critDif")]
    pub crit_dif: f64,
    pub workflows: Vec<String>,
    /// |avgRank_w - avgRank_baseline| per workflow.
    pub diffs: Vec<f64>,
    #[serde(rename = "signifDifs")]
    pub signif_difs: Vec<bool>,
}

pub fn bonferroni_dunn_test(
    rks: &RankSummary,
    alpha: f64,
    baseline: &str,
) -> Result<BonferroniDunnResult, StatsError> {
    let k = rks.n_workflows();
    if k < 2 {
        return Err(StatsError::TooFewWorkflows(k));
    }
    let base = rks
        .workflows
        .iter()
        .position(|w| w == baseline)
        .ok_or_else(|| StatsError::UnknownBaseline(baseline.to_string()))?;
    // Two-sided normal critical value adjusted for the k-1 comparisons.
    let q = normal_quantile(1.0 - alpha / (2.0 * (k as f64 - 1.0)));
    let crit_dif = critical_difference(q, k, rks.n_tasks());
    let diffs: Vec<f64> = rks
        .avg_ranks
        .iter()
        .map(|r| (r - rks.avg_ranks[base]).abs())
        .collect();
    let signif_difs = diffs.iter().map(|&d| d > crit_dif).collect();
    Ok(BonferroniDunnResult {
        baseline: baseline.to_string(),
        crit_dif,
        workflows: rks.workflows.clone(),
        diffs,
        signif_difs,
    })
}

/// One cell of a pairwise-test table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseCell {
    /// Average (t test) or median (Wilcoxon) score of the workflow.
    pub score: Option<f64>,
    /// Difference of that score against the baseline's.
    #[serde(rename = "diffVsBaseline")]
    pub diff: Option<f64>,
    #[serde(rename = "pValue")]
    pub p_value: Option<f64>,
}

/// Per-task matrices of paired tests against a baseline workflow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseTestResult {
    pub baseline: String,
    pub tasks: Vec<String>,
    pub workflows: Vec<String>,
    /// `cells[task][workflow]`.
    pub cells: Vec<Vec<PairwiseCell>>,
}

fn mean_of(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn median_of(values: &[f64]) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    crate::analysis::quantile(&sorted, 0.5)
}

/// Per-iteration scores of one cell keyed by split index (valid and
/// defined entries only).
fn paired_scores(
    results: &ComparisonResults,
    task: usize,
    workflow: usize,
    metric: &str,
) -> Vec<(usize, f64)> {
    results.records[task][workflow]
        .iter()
        .filter_map(|r| {
            let v = r.scores.as_ref()?.get(metric)?;
            Some((r.split_index, v))
        })
        .collect()
}

/// Differences of one workflow against the baseline over shared split
/// indices, in split order.
fn paired_differences(a: &[(usize, f64)], b: &[(usize, f64)]) -> Vec<f64> {
    let mut out = Vec::new();
    let b_map: std::collections::HashMap<usize, f64> = b.iter().copied().collect();
    for (split, value) in a {
        if let Some(base) = b_map.get(split) {
            out.push(value - base);
        }
    }
    out
}

/// Paired two-sided t test on per-iteration differences.
fn paired_t_p_value(diffs: &[f64]) -> Option<f64> {
    let n = diffs.len();
    if n < 2 {
        return None;
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        // Degenerate: all differences identical.
        return if mean == 0.0 { None } else { Some(0.0) };
    }
    let t = mean / (var / n as f64).sqrt();
    Some((2.0 * (1.0 - t_cdf(t.abs(), (n - 1) as f64))).min(1.0))
}

fn pairwise_tests(
    results: &ComparisonResults,
    metric: &str,
    baseline: &str,
    use_median: bool,
) -> Result<PairwiseTestResult, StatsError> {
    let base_index = results
        .workflow_index(baseline)
        .ok_or_else(|| StatsError::UnknownBaseline(baseline.to_string()))?;
    let mut cells = Vec::with_capacity(results.tasks.len());
    for ti in 0..results.tasks.len() {
        let base_scores = paired_scores(results, ti, base_index, metric);
        let base_values: Vec<f64> = base_scores.iter().map(|&(_, v)| v).collect();
        let base_stat = if use_median {
            median_of(&base_values)
        } else {
            mean_of(&base_values)
        };
        let mut row = Vec::with_capacity(results.workflows.len());
        for wi in 0..results.workflows.len() {
            let wf_scores = paired_scores(results, ti, wi, metric);
            let values: Vec<f64> = wf_scores.iter().map(|&(_, v)| v).collect();
            let stat = if use_median {
                median_of(&values)
            } else {
                mean_of(&values)
            };
            let diff = match (stat, base_stat) {
                (Some(s), Some(b)) => Some(s - b),
                _ => None,
            };
            let p_value = if wi == base_index {
                None
            } else {
                let diffs = paired_differences(&wf_scores, &base_scores);
                if use_median {
                    signed_rank_test(&diffs).p_value
                } else {
                    paired_t_p_value(&diffs)
                }
            };
            row.push(PairwiseCell {
                score: stat,
                diff,
                p_value,
            });
        }
        cells.push(row);
    }
    Ok(PairwiseTestResult {
        baseline: baseline.to_string(),
        tasks: results.tasks.iter().map(|t| t.id.clone()).collect(),
        workflows: results.workflows.iter().map(|w| w.id.clone()).collect(),
        cells,
    })
}

/// Paired t tests of every workflow against `baseline` on one metric.
pub fn paired_t(
    results: &ComparisonResults,
    metric: &str,
    baseline: &str,
) -> Result<PairwiseTestResult, StatsError> {
    ensure_metric(results, metric)?;
    pairwise_tests(results, metric, baseline, false)
}

/// Wilcoxon signed-rank tests of every workflow against `baseline`.
pub fn wilcoxon_signed_rank(
    results: &ComparisonResults,
    metric: &str,
    baseline: &str,
) -> Result<PairwiseTestResult, StatsError> {
    ensure_metric(results, metric)?;
    pairwise_tests(results, metric, baseline, true)
}

fn ensure_metric(results: &ComparisonResults, metric: &str) -> Result<(), StatsError> {
    if results.metric_names.iter().any(|m| m == metric) {
        Ok(())
    } else {
        Err(StatsError::UnknownMetric(metric.to_string()))
    }
}

/// Experiment facts echoed into every comparison report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonSetup {
    pub metric: String,
    pub alpha: f64,
    pub baseline: String,
    /// Workflows left out of the rank-based tests because some task has
    /// no valid average for them.
    pub excluded: Vec<String>,
    /// Human-readable notices (skipped tests and why).
    pub notes: Vec<String>,
}

/// The full comparison structure for one metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricComparison {
    pub setup: ComparisonSetup,
    #[serde(flatten)]
    pub ranks: Option<RankSummary>,
    #[serde(rename = "F.test")]
    pub friedman: Option<FriedmanResult>,
    #[serde(rename = "Nemenyi.test")]
    pub nemenyi: Option<NemenyiResult>,
    #[serde(rename = "BonferroniDunn.test")]
    pub bonferroni_dunn: Option<BonferroniDunnResult>,
    #[serde(rename = "t.test")]
    pub t_test: PairwiseTestResult,
    #[serde(rename = "WilcoxonSignedRank.test")]
    pub wilcoxon: PairwiseTestResult,
}

/// Paired comparisons for every metric of a results object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedComparisonsResult {
    pub metrics: Vec<MetricComparison>,
}

/// Assembles the complete per-metric comparison structure.
///
/// The default baseline is the workflow with the best (lowest) average
/// rank. Rank-based tests need at least two tasks; with fewer they are
/// skipped with a notice while the pairwise tests still run.
pub fn paired_comparisons(
    results: &ComparisonResults,
    baseline: Option<&str>,
    maxs: &crate::analysis::MaxsFlags,
    alpha: f64,
) -> Result<PairedComparisonsResult, StatsError> {
    if results.workflows.len() < 2 {
        return Err(StatsError::TooFewWorkflows(results.workflows.len()));
    }
    let mut metrics = Vec::with_capacity(results.metric_names.len());
    for metric in &results.metric_names {
        let maximize = maxs.is_max(metric);
        // Average and median scores per (workflow, task); a workflow is
        // complete when every task yields a defined average.
        let mut complete: Vec<usize> = Vec::new();
        let mut excluded: Vec<String> = Vec::new();
        let mut avg_all: Vec<Vec<Option<f64>>> = Vec::new();
        for wi in 0..results.workflows.len() {
            let averages: Vec<Option<f64>> = (0..results.tasks.len())
                .map(|ti| mean_of(&results.cell_scores(ti, wi, metric)))
                .collect();
            if averages.iter().all(|a| a.is_some()) {
                complete.push(wi);
            } else {
                excluded.push(results.workflows[wi].id.clone());
            }
            avg_all.push(averages);
        }

        let mut notes = Vec::new();
        let ranks = if complete.len() >= 2 {
            let avg_scores: Vec<Vec<f64>> = complete
                .iter()
                .map(|&wi| avg_all[wi].iter().map(|a| a.unwrap()).collect())
                .collect();
            let med_scores: Vec<Vec<f64>> = complete
                .iter()
                .map(|&wi| {
                    (0..results.tasks.len())
                        .map(|ti| {
                            median_of(&results.cell_scores(ti, wi, metric)).unwrap_or(f64::NAN)
                        })
                        .collect()
                })
                .collect();
            Some(compute_ranks(
                complete
                    .iter()
                    .map(|&wi| results.workflows[wi].id.clone())
                    .collect(),
                results.tasks.iter().map(|t| t.id.clone()).collect(),
                avg_scores,
                med_scores,
                maximize,
            )?)
        } else {
            notes.push(format!(
                "rank tests skipped: only {} workflow(s) have complete scores",
                complete.len()
            ));
            None
        };

        let baseline_id = match baseline {
            Some(id) => {
                if results.workflow_index(id).is_none() {
                    return Err(StatsError::UnknownBaseline(id.to_string()));
                }
                id.to_string()
            }
            None => match &ranks {
                Some(r) => {
                    // Best average rank; ties keep declaration order.
                    let best = r
                        .avg_ranks
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    r.workflows[best].clone()
                }
                None => results.workflows[0].id.clone(),
            },
        };

        let (friedman, nemenyi, bonferroni_dunn) = match &ranks {
            Some(r) if r.n_tasks() >= 2 => {
                let friedman = friedman_test(r, alpha);
                let nemenyi = nemenyi_test(r, alpha)?;
                let bd = if r.workflows.contains(&baseline_id) {
                    Some(bonferroni_dunn_test(r, alpha, &baseline_id)?)
                } else {
                    notes.push(format!(
                        "Bonferroni-Dunn skipped: baseline `{baseline_id}` lacks complete scores"
                    ));
                    None
                };
                (Some(friedman), Some(nemenyi), bd)
            }
            Some(_) => {
                notes.push(
                    "Friedman/Nemenyi/Bonferroni-Dunn skipped: need at least 2 tasks".to_string(),
                );
                (None, None, None)
            }
            None => (None, None, None),
        };

        let t_test = pairwise_tests(results, metric, &baseline_id, false)?;
        let wilcoxon = pairwise_tests(results, metric, &baseline_id, true)?;

        metrics.push(MetricComparison {
            setup: ComparisonSetup {
                metric: metric.clone(),
                alpha,
                baseline: baseline_id,
                excluded,
                notes,
            },
            ranks,
            friedman,
            nemenyi,
            bonferroni_dunn,
            t_test,
            wilcoxon,
        });
    }
    Ok(PairedComparisonsResult { metrics })
}
