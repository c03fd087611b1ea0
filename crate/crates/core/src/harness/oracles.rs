//! Reference values computed without the solver code paths.
//!
//! Nothing here calls into `bsde`, `reflect` or `picard`; node values are
//! recomputed from `(2j − i)·√h` directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Problem;

/// Largest lattice the exhaustive stopping search accepts.
pub const STOPPING_ORACLE_MAX_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmericanPut {
    pub r: f64,
    pub sigma: f64,
    pub x0: f64,
    pub strike: f64,
    pub horizon: f64,
    pub steps: usize,
}

impl Default for AmericanPut {
    fn default() -> Self {
        Self {
            r: 0.05,
            sigma: 0.3,
            x0: 100.0,
            strike: 100.0,
            horizon: 1.0,
            steps: 200,
        }
    }
}

/// Classical backward induction `V_i = max(payoff_i, e^{−rh}·(V⁺ + V⁻)/2)` on
/// `X = x₀·exp(σW + (r − σ²/2)t)`.
pub fn american_dp_oracle(put: &AmericanPut) -> Result<f64> {
    let AmericanPut {
        r,
        sigma,
        x0,
        strike,
        horizon,
        steps,
    } = *put;
    if !(sigma > 0.0) || !(x0 > 0.0) || !(strike >= 0.0) || !(horizon > 0.0) || steps == 0 {
        return Err(Error::InvalidParameter(
            "american put needs sigma > 0, x0 > 0, strike >= 0, T > 0, N >= 1".into(),
        ));
    }
    let h = horizon / steps as f64;
    let sh = h.sqrt();
    let disc = (-r * h).exp();
    let payoff = |i: usize, j: usize| {
        let t = if i == steps { horizon } else { i as f64 * h };
        let w = (2.0 * j as f64 - i as f64) * sh;
        (strike - x0 * (sigma * w + (r - 0.5 * sigma * sigma) * t).exp()).max(0.0)
    };
    let mut v: Vec<f64> = (0..=steps).map(|j| payoff(steps, j)).collect();
    for i in (0..steps).rev() {
        v = (0..=i)
            .map(|j| payoff(i, j).max(disc * 0.5 * (v[j] + v[j + 1])))
            .collect();
    }
    Ok(v[0])
}

/// Optimal stopping value of `reward(i, t, w)` by backward induction over the
/// full (non-recombining) path tree; `reward` at `i = N` is the terminal payoff.
pub fn exhaustive_stopping_value(
    horizon: f64,
    steps: usize,
    reward: &dyn Fn(usize, f64, f64) -> f64,
) -> Result<f64> {
    if steps == 0 || steps > STOPPING_ORACLE_MAX_STEPS {
        return Err(Error::EnumerationCap {
            steps,
            cap: STOPPING_ORACLE_MAX_STEPS,
        });
    }
    let h = horizon / steps as f64;
    let sh = h.sqrt();
    // Tree nodes at depth i are indexed by the path prefix bits (bit k = up at
    // step k); values are stored per prefix, 2^i of them.
    let value_at = |i: usize, prefix: u64| {
        let ups = prefix.count_ones() as f64;
        let w = (2.0 * ups - i as f64) * sh;
        let t = if i == steps { horizon } else { i as f64 * h };
        reward(i, t, w)
    };
    let mut v: Vec<f64> = (0..1u64 << steps).map(|m| value_at(steps, m)).collect();
    for i in (0..steps).rev() {
        v = (0..1u64 << i)
            .map(|prefix| {
                let cont = 0.5 * (v[prefix as usize] + v[(prefix | (1 << i)) as usize]);
                value_at(i, prefix).max(cont)
            })
            .collect();
    }
    Ok(v[0])
}

/// Stopping oracle for a problem with `f ≡ 0`: reward `L` before `T`, `ξ` at `T`.
pub fn exhaustive_stopping_oracle(problem: &Problem) -> Result<f64> {
    let lattice = problem.lattice();
    let gen = problem.generator();
    let probes = [(0.0, 0.0, 0.0, 0.0), (0.3, 0.5, 2.0, -1.0), (0.9, -1.0, -3.0, 4.0)];
    if probes.iter().any(|&(t, w, y, z)| gen.evaluate(t, w, y, z) != 0.0) {
        return Err(Error::InvalidParameter("stopping oracle needs f = 0".into()));
    }
    let steps = lattice.steps();
    let sh = (lattice.horizon() / steps as f64).sqrt();
    let xi = problem.xi();
    let obstacle = problem.obstacle();
    exhaustive_stopping_value(lattice.horizon(), steps, &|i, t, w| {
        if i == steps {
            let j = ((w / sh + steps as f64) / 2.0).round() as usize;
            xi[j]
        } else {
            obstacle.eval(t, w)
        }
    })
}
