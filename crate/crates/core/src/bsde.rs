//! Backward Euler scheme for the non-reflected equation.
//!
//! Each step takes `ŷ = E[Y_{i+1} | node]`, the explicit control
//! `z = (Y_{i+1}(up) − Y_{i+1}(down)) / (2√h)`, and solves the scalar
//! equation `y − h·f(t_i, y, z) = ŷ`. Under the one-sided bound with
//! `h·max(μ, 0) ≤ 1/2` the left side is strictly increasing in `y` with slope
//! at least 1/2, so the root is unique.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{cond_expect_slice, BinomialLattice, LatticeProcess};
use crate::problem::{Generator, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepConfig {
    pub root_tol: f64,
    pub max_iter: usize,
    /// Refuse to run when `h·max(μ, 0) > 1/2`.
    pub step_condition: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            root_tol: 1e-13,
            max_iter: 200,
            step_condition: true,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.root_tol > 0.0) {
            return Err(Error::InvalidParameter("root_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// `(Y, Z)` with `Y` on steps `0..=N` and `Z` on steps `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPair {
    pub y: LatticeProcess,
    pub z: LatticeProcess,
}

/// Martingale-representation integrand over `[t_i, t_{i+1}]`:
/// `E[Y_{i+1}·ΔW | node] / h`, which on this lattice is the difference quotient.
pub fn z_extract(lattice: &BinomialLattice, y_next: &[f64], i: usize) -> Result<Vec<f64>> {
    if i >= lattice.steps() {
        return Err(Error::StepOutOfRange {
            step: i,
            steps: lattice.steps(),
        });
    }
    if y_next.len() != i + 2 {
        return Err(Error::LatticeMismatch);
    }
    Ok(z_slice(y_next, lattice.sqrt_h()))
}

pub(crate) fn z_slice(y_next: &[f64], sqrt_h: f64) -> Vec<f64> {
    let scale = 0.5 / sqrt_h;
    y_next.windows(2).map(|w| (w[1] - w[0]) * scale).collect()
}

/// Solves `phi(y) = target` for a strictly increasing `phi`, starting at
/// `start`. Newton steps with a finite-difference slope are accepted only
/// inside the current bracket; otherwise the bracket is bisected.
pub fn solve_increasing(
    phi: impl Fn(f64) -> f64,
    target: f64,
    start: f64,
    t: f64,
    cfg: &StepConfig,
) -> Result<f64> {
    let fail = |reason: String| Error::RootFinding { t, reason };
    let residual = |y: f64| phi(y) - target;
    let r0 = residual(start);
    if r0 == 0.0 {
        return Ok(start);
    }
    if !r0.is_finite() {
        return Err(fail(format!("non-finite residual at y = {start}")));
    }

    // Grow a bracket [lo, hi] with residual(lo) < 0 < residual(hi).
    let mut width = start.abs().max(1.0);
    let (mut lo, mut hi) = (start, start);
    let mut expansions = 0;
    loop {
        if r0 > 0.0 {
            lo = start - width;
            if residual(lo) <= 0.0 {
                break;
            }
        } else {
            hi = start + width;
            if residual(hi) >= 0.0 {
                break;
            }
        }
        width *= 2.0;
        expansions += 1;
        if expansions > 1100 || !width.is_finite() {
            return Err(fail(format!(
                "no bracket around y = {start}; generator may violate its declared mu"
            )));
        }
    }
    let r_lo = residual(lo);
    let r_hi = residual(hi);
    if r_lo == 0.0 {
        return Ok(lo);
    }
    if r_hi == 0.0 {
        return Ok(hi);
    }
    if !(r_lo < 0.0 && r_hi > 0.0) {
        return Err(fail(format!("residual not monotone on [{lo}, {hi}]")));
    }

    let mut y = start;
    let mut ry = r0;
    // Step sizes of the last two iterations; a Newton step that does not
    // halve the one before last is replaced by bisection.
    let mut dx = hi - lo;
    let mut dx_old = dx;
    for _ in 0..cfg.max_iter {
        let delta = 1e-7 * y.abs().max(1.0);
        let slope = (residual(y + delta) - ry) / delta;
        let mut cand = y - ry / slope;
        if !(cand > lo && cand < hi) || (cand - y).abs() > 0.5 * dx_old {
            cand = 0.5 * (lo + hi);
        }
        dx_old = dx;
        dx = (cand - y).abs();
        let rc = residual(cand);
        if rc == 0.0 {
            return Ok(cand);
        }
        if rc > 0.0 {
            hi = cand;
        } else {
            lo = cand;
        }
        let scale = cand.abs().max(1.0);
        let tol = cfg.root_tol * scale;
        if hi - lo <= tol {
            return Ok(cand);
        }
        if (cand - y).abs() <= tol {
            // Confirm the sign change within `tol` before accepting a short step.
            let probe = if rc > 0.0 { cand - tol } else { cand + tol };
            let rp = residual(probe);
            if (rp <= 0.0) == (rc > 0.0) {
                return Ok(cand);
            }
            if rp > 0.0 {
                hi = probe;
            } else {
                lo = probe;
            }
        }
        y = cand;
        ry = rc;
    }
    Err(fail(format!("no convergence in {} iterations", cfg.max_iter)))
}

/// The unique `y` with `y − h·f(t, w, y, z) = ŷ`.
#[allow(clippy::too_many_arguments)]
pub fn implicit_step(
    yhat: f64,
    t: f64,
    w: f64,
    z: f64,
    gen: &Generator,
    h: f64,
    cfg: &StepConfig,
) -> Result<f64> {
    solve_increasing(|y| y - h * gen.evaluate(t, w, y, z), yhat, yhat, t, cfg)
}

pub(crate) fn check_step_condition(problem: &Problem, cfg: &StepConfig) -> Result<()> {
    cfg.validate()?;
    let value = problem.lattice().h() * problem.generator().mu.max(0.0);
    if cfg.step_condition && value > 0.5 {
        return Err(Error::StepCondition { value });
    }
    Ok(())
}

/// Output of a backward sweep over steps `start..=end`; slices are indexed
/// by `i − start`.
#[derive(Debug, Clone)]
pub(crate) struct Window {
    pub start: usize,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub dk: Vec<Vec<f64>>,
}

/// Node update: `(i, j, t, w, ŷ, z) -> (Y(i,j), ΔK(i,j))`.
pub(crate) fn backward_window(
    lattice: &BinomialLattice,
    terminal: Vec<f64>,
    start: usize,
    end: usize,
    mut node: impl FnMut(usize, usize, f64, f64, f64, f64) -> Result<(f64, f64)>,
) -> Result<Window> {
    debug_assert_eq!(terminal.len(), end + 1);
    let len = end - start;
    let mut y = vec![Vec::new(); len + 1];
    let mut z = vec![Vec::new(); len];
    let mut dk = vec![Vec::new(); len];
    y[len] = terminal;
    let sqrt_h = lattice.sqrt_h();
    for i in (start..end).rev() {
        let k = i - start;
        let next = &y[k + 1];
        let yhat = cond_expect_slice(next);
        let zi = z_slice(next, sqrt_h);
        let t = lattice.time(i);
        let mut yi = Vec::with_capacity(i + 1);
        let mut ki = Vec::with_capacity(i + 1);
        for j in 0..=i {
            let (v, d) = node(i, j, t, lattice.node_value(i, j), yhat[j], zi[j])?;
            yi.push(v);
            ki.push(d);
        }
        y[k] = yi;
        z[k] = zi;
        dk[k] = ki;
    }
    Ok(Window { start, y, z, dk })
}

impl Window {
    pub(crate) fn into_processes(self) -> Result<(LatticeProcess, LatticeProcess, LatticeProcess)> {
        debug_assert_eq!(self.start, 0);
        Ok((
            LatticeProcess::from_slices(self.y)?,
            LatticeProcess::from_slices(self.z)?,
            LatticeProcess::from_slices(self.dk)?,
        ))
    }
}

/// Plain backward solve; the problem must carry the `-inf` obstacle.
pub fn solve_bsde(problem: &Problem, cfg: &StepConfig) -> Result<SolutionPair> {
    if problem.obstacle().is_finite() {
        return Err(Error::InvalidParameter(
            "solve_bsde needs the -inf obstacle; use a reflected solver".into(),
        ));
    }
    check_step_condition(problem, cfg)?;
    let lattice = problem.lattice();
    let gen = problem.generator();
    let h = lattice.h();
    let n = lattice.steps();
    let window = backward_window(lattice, problem.xi().to_vec(), 0, n, |_, _, t, w, yhat, z| {
        Ok((implicit_step(yhat, t, w, z, gen, h, cfg)?, 0.0))
    })?;
    let (y, z, _) = window.into_processes()?;
    Ok(SolutionPair { y, z })
}
