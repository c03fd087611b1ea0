//! Discrete symmetric local time and the Tanaka and occupation identities.
//!
//! For a path `X_0, …, X_N` and level `a`,
//! `L̃_i = |X_i − a| − |X_0 − a| − Σ_{k<i} sgn(X_k − a)(X_{k+1} − X_k)` with
//! `sgn(0) = 0`. Each increment `|x + d − a| − |x − a| − sgn(x − a)·d` is
//! nonnegative by convexity.

use serde::Serialize;

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One-step increments of the local time at `a`, written case by case so
/// that roundoff cannot make them negative.
pub fn local_time_increments(x: &[f64], a: f64) -> Vec<f64> {
    x.windows(2)
        .map(|w| {
            let (u, v) = (w[0] - a, w[1] - a);
            if u > 0.0 {
                2.0 * (-v).max(0.0)
            } else if u < 0.0 {
                2.0 * v.max(0.0)
            } else {
                v.abs()
            }
        })
        .collect()
}

/// `L̃_0 = 0, L̃_1, …, L̃_N`.
pub fn local_time(x: &[f64], a: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    out.push(0.0);
    let mut acc = 0.0;
    for d in local_time_increments(x, a) {
        acc += d;
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TanakaReport {
    pub level: f64,
    pub terminal_local_time: f64,
    /// `min(0, min_k ΔL̃_k)`.
    pub max_negativity: f64,
    /// `max_i | |X_i − a| − |X_0 − a| − Σ sgn·ΔX − L̃_i |`.
    pub identity_residual: f64,
}

pub fn tanaka_check(x: &[f64], a: f64) -> TanakaReport {
    let lt = local_time(x, a);
    let inc = local_time_increments(x, a);
    let max_negativity = inc.iter().copied().fold(0.0, f64::min);
    let mut stoch = 0.0;
    let mut identity_residual = 0.0_f64;
    for i in 0..x.len() {
        if i > 0 {
            stoch += sgn(x[i - 1] - a) * (x[i] - x[i - 1]);
        }
        let r = (x[i] - a).abs() - (x[0] - a).abs() - stoch - lt[i];
        identity_residual = identity_residual.max(r.abs());
    }
    TanakaReport {
        level: a,
        terminal_local_time: *lt.last().unwrap_or(&0.0),
        max_negativity,
        identity_residual,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationReport {
    pub levels: usize,
    /// `Σ_a L̃_N(a)·g″(a)·Δa` over the midpoint grid.
    pub local_time_side: f64,
    /// `Σ_{i<N} g″(X_i)·h`.
    pub occupation_side: f64,
    pub residual: f64,
}

/// Occupation-times identity on a uniform midpoint grid of `levels` points
/// spanning the path range. The quadratic variation of a lattice step is `h`.
pub fn occupation_check(x: &[f64], h: f64, levels: usize, g2: impl Fn(f64) -> f64) -> OccupationReport {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let levels = levels.max(1);
    let da = (hi - lo) / levels as f64;
    let local_time_side: f64 = (0..levels)
        .map(|m| {
            let a = lo + (m as f64 + 0.5) * da;
            let lt = local_time(x, a);
            lt[lt.len() - 1] * g2(a) * da
        })
        .sum();
    let occupation_side: f64 = x[..x.len().saturating_sub(1)].iter().map(|&v| g2(v) * h).sum();
    OccupationReport {
        levels,
        local_time_side,
        occupation_side,
        residual: (local_time_side - occupation_side).abs(),
    }
}
