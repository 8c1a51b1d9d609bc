//! Wilcoxon signed-rank test on paired differences.
//!
//! Zero differences are dropped; ties among the absolute differences get
//! mean ranks. Up to 25 informative pairs the two-sided p-value comes from
//! the exact conditional distribution of the positive-rank sum (dynamic
//! programming over the doubled ranks, which stay integral under mean
//! ranks); beyond that a normal approximation with tie correction and
//! continuity correction takes over.

use crate::stats::dist::normal_cdf;

/// Threshold on the number of informative pairs for the exact p-value.
pub const EXACT_LIMIT: usize = 25;

/// Outcome of one signed-rank test.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedRankOutcome {
    /// Positive-rank sum W+ over the nonzero differences.
    pub w_plus: f64,
    /// Informative (nonzero) pair count.
    pub n_used: usize,
    /// Two-sided p-value; `None` when no informative pairs remain.
    pub p_value: Option<f64>,
    pub exact: bool,
}

/// Mean ranks of the absolute differences (ties averaged), paired with
/// the sign of each difference.
fn signed_ranks(diffs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        nonzero[a]
            .abs()
            .partial_cmp(&nonzero[b].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nonzero[order[j + 1]].abs() == nonzero[order[i]].abs() {
            j += 1;
        }
        let mean_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    let signs = nonzero.iter().map(|d| d.signum()).collect();
    (ranks, signs)
}

/// Exact two-sided p-value by enumerating the conditional distribution of
/// W+ over all sign assignments. Doubling the (possibly half-integer)
/// ranks makes every achievable sum integral, so a counting DP applies.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // ways[s] = number of sign assignments with doubled W+ equal to s.
    let mut ways = vec![0.0f64; total + 1];
    ways[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            ways[s] += ways[s - r];
        }
    }
    let n_assignments = 2.0f64.powi(ranks.len() as i32);
    let w2 = (2.0 * w_plus).round() as usize;
    let p_le: f64 = ways[..=w2].iter().sum::<f64>() / n_assignments;
    let p_ge: f64 = ways[w2..].iter().sum::<f64>() / n_assignments;
    (2.0 * p_le.min(p_ge)).min(1.0)
}

/// Normal approximation with tie correction and continuity correction.
fn approx_p(ranks: &[f64], signs: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    // Tie correction: group the equal absolute values.
    let mut sorted: Vec<f64> = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if variance <= 0.0 {
        return 1.0;
    }
    let _ = signs;
    let centered = w_plus - mean;
    let correction = 0.5 * centered.signum();
    let z = (centered - correction) / variance.sqrt();
    (2.0 * (1.0 - normal_cdf(z.abs()))).min(1.0)
}

/// Runs the signed-rank test on the paired differences.
pub fn signed_rank_test(diffs: &[f64]) -> SignedRankOutcome {
    let (ranks, signs) = signed_ranks(diffs);
    let n_used = ranks.len();
    let w_plus: f64 = ranks
        .iter()
        .zip(&signs)
        .filter(|(_, s)| **s > 0.0)
        .map(|(r, _)| *r)
        .sum();
    if n_used == 0 {
        return SignedRankOutcome {
            w_plus: 0.0,
            n_used,
            p_value: None,
            exact: true,
        };
    }
    let exact = n_used <= EXACT_LIMIT;
    let p = if exact {
        exact_p(&ranks, w_plus)
    } else {
        approx_p(&ranks, &signs, w_plus)
    };
    SignedRankOutcome {
        w_plus,
        n_used,
        p_value: Some(p),
        exact,
    }
}
