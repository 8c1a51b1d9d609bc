//! Critical values for the Nemenyi test: studentized-range quantiles at
//! infinite degrees of freedom, divided by sqrt(2).
//!
//! The embedded table covers k = 2..=30 at alpha 0.05 and 0.01. It was
//! generated offline from the range distribution of k standard normals
//! (`P(W <= w) = k * integral phi(u) [Phi(u+w) - Phi(u)]^(k-1) du`) and is
//! cross-checked in tests against that same construction and against the
//! widely published k <= 10 values.

use crate::stats::dist::normal_cdf;

pub const Q_TABLE_MIN_K: usize = 2;
pub const Q_TABLE_MAX_K: usize = 30;

/// q_alpha(k) for alpha = 0.05, k = 2..=30.
const Q_05: [f64; 29] = [
    1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948320, 3.030878, 3.101730, 3.163684,
    3.218654, 3.268004, 3.312739, 3.353618, 3.391230, 3.426041, 3.458425, 3.488685, 3.517073,
    3.543799, 3.569040, 3.592946, 3.615646, 3.637252, 3.657861, 3.677556, 3.696413, 3.714498,
    3.731869, 3.748578,
];

/// q_alpha(k) for alpha = 0.01, k = 2..=30.
const Q_01: [f64; 29] = [
    2.575829, 2.913494, 3.113250, 3.254686, 3.363740, 3.452213, 3.526471, 3.590339, 3.646292,
    3.696021, 3.740733, 3.781318, 3.818451, 3.852654, 3.884343, 3.913850, 3.941446, 3.967357,
    3.991770, 4.014842, 4.036710, 4.057487, 4.077275, 4.096161, 4.114220, 4.131519, 4.148118,
    4.164069, 4.179420,
];

/// Looks up q_alpha(k); `None` for unsupported alpha levels or k outside
/// the embedded range.
pub fn nemenyi_q(k: usize, alpha: f64) -> Option<f64> {
    if !(Q_TABLE_MIN_K..=Q_TABLE_MAX_K).contains(&k) {
        return None;
    }
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_05
    } else if (alpha - 0.01).abs() < 1e-12 {
        &Q_01
    } else {
        return None;
    };
    Some(table[k - Q_TABLE_MIN_K])
}

/// CDF of the range of `k` independent standard normals, evaluated by
/// Simpson quadrature. This is the construction behind the embedded
/// table; it lives here so tests can regenerate the table independently.
pub fn normal_range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let lo = -9.0;
    let hi = 9.0;
    let n = 4000; // even
    let h = (hi - lo) / n as f64;
    let integrand = |u: f64| {
        let phi = (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
        phi * (normal_cdf(u + w) - normal_cdf(u)).powi(k as i32 - 1)
    };
    let mut sum = integrand(lo) + integrand(hi);
    for i in 1..n {
        let w_simpson = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w_simpson * integrand(lo + i as f64 * h);
    }
    k as f64 * sum * h / 3.0
}

/// Quantile of the normal-range distribution divided by sqrt(2): the
/// studentized-range construction of q_alpha(k) at infinite df.
pub fn compute_nemenyi_q(k: usize, alpha: f64) -> f64 {
    let target = 1.0 - alpha;
    let mut lo = 0.0;
    let mut hi = 12.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if normal_range_cdf(mid, k) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / std::f64::consts::SQRT_2
}
