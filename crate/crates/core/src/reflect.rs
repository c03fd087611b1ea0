//! Reflected solvers.
//!
//! Both schemes share the plain backward step and differ in how the
//! obstacle acts:
//!
//! * **projected**: `ycand` solves `y − h·f(t, y, z) = ŷ`, then
//!   `Y = max(ycand, L)` and `ΔK = Y − ycand`. Complementarity
//!   `(Y − L)·ΔK = 0` holds node by node.
//! * **penalized** at level `n`: `Y` solves
//!   `y − h·f(t, y, z) − h·n·(y − L)⁻ = ŷ`, with `ΔK = n·h·(Y − L)⁻`.
//!   The penalty only adds slope, so the step is well posed for every `n ≥ 0`.
//!
//! `ΔK(i, j)` is the increment of K over `[t_i, t_{i+1}]`; K itself is path
//! dependent and is recovered with [`SolutionTriple::k_along`].

use serde::Serialize;

use crate::analysis::norms::{self, NormEntry, NormMode};
use crate::bsde::{backward_window, check_step_condition, implicit_step, solve_increasing, SolutionPair, StepConfig};
use crate::error::{Error, Result};
use crate::lattice::LatticeProcess;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SolverMode {
    Penalized { level: f64 },
    Projected,
    /// Projected solve with the generator's z-argument frozen (block index).
    ZFrozen,
    /// Glued Picard solution.
    Picard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTriple {
    pub y: LatticeProcess,
    pub z: LatticeProcess,
    /// `ΔK(i, j) = K_{t_{i+1}} − K_{t_i}` at node `(i, j)`, steps `0..N`.
    pub dk: LatticeProcess,
    pub mode: SolverMode,
    pub cfg: StepConfig,
}

impl SolutionTriple {
    /// `K_0, …, K_N` along a path (`K_0 = 0`).
    pub fn k_along(&self, nodes: &[usize]) -> Vec<f64> {
        let mut k = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        k.push(acc);
        for (i, &j) in nodes.iter().enumerate().take(self.dk.last_step() + 1) {
            acc += self.dk.get(i, j);
            k.push(acc);
        }
        k
    }

    pub fn pair(&self) -> SolutionPair {
        SolutionPair {
            y: self.y.clone(),
            z: self.z.clone(),
        }
    }

    pub fn steps(&self) -> usize {
        self.y.last_step()
    }
}

#[inline]
pub(crate) fn neg_part(x: f64) -> f64 {
    (-x).max(0.0)
}

/// Discrete reflected solution by projection onto the obstacle.
pub fn solve_projected(problem: &Problem, cfg: &StepConfig) -> Result<SolutionTriple> {
    check_step_condition(problem, cfg)?;
    let lattice = problem.lattice();
    let gen = problem.generator();
    let obstacle = problem.obstacle_values();
    let h = lattice.h();
    let n = lattice.steps();
    let window = backward_window(lattice, problem.xi().to_vec(), 0, n, |i, j, t, w, yhat, z| {
        let ycand = implicit_step(yhat, t, w, z, gen, h, cfg)?;
        Ok(project(ycand, obstacle.get(i, j)))
    })?;
    let (y, z, dk) = window.into_processes()?;
    Ok(SolutionTriple {
        y,
        z,
        dk,
        mode: SolverMode::Projected,
        cfg: *cfg,
    })
}

/// `(max(ycand, L), max(ycand, L) − ycand)`.
#[inline]
pub(crate) fn project(ycand: f64, l: f64) -> (f64, f64) {
    if ycand < l {
        (l, l - ycand)
    } else {
        (ycand, 0.0)
    }
}

/// Root of `y − h·f(t, w, y, z) − h·n·(y − L)⁻ = ŷ`.
#[allow(clippy::too_many_arguments)]
pub fn penalized_step(
    yhat: f64,
    t: f64,
    w: f64,
    z: f64,
    l: f64,
    level: f64,
    problem: &Problem,
    cfg: &StepConfig,
) -> Result<f64> {
    let h = problem.lattice().h();
    let gen = problem.generator();
    let hn = h * level;
    solve_increasing(
        |y| y - h * gen.evaluate(t, w, y, z) - hn * neg_part(y - l),
        yhat,
        yhat,
        t,
        cfg,
    )
}

/// Penalization scheme at level `n ≥ 0`.
pub fn solve_penalized(problem: &Problem, level: f64, cfg: &StepConfig) -> Result<SolutionTriple> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "penalty level must be finite and nonnegative, got {level}"
        )));
    }
    check_step_condition(problem, cfg)?;
    let lattice = problem.lattice();
    let obstacle = problem.obstacle_values();
    let h = lattice.h();
    let n = lattice.steps();
    let window = backward_window(lattice, problem.xi().to_vec(), 0, n, |i, j, t, w, yhat, z| {
        let l = obstacle.get(i, j);
        let y = penalized_step(yhat, t, w, z, l, level, problem, cfg)?;
        Ok((y, level * h * neg_part(y - l)))
    })?;
    let (y, z, dk) = window.into_processes()?;
    Ok(SolutionTriple {
        y,
        z,
        dk,
        mode: SolverMode::Penalized { level },
        cfg: *cfg,
    })
}

/// Minimality diagnostics for a triple against its obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkorokhodReport {
    /// `E[Σ_i |Y_i − L_i|·ΔK_i]`.
    pub residual: f64,
    /// `E[Σ_i (Y_i − L_i)·ΔK_i]`; zero for the projected scheme and
    /// nonpositive for penalization.
    pub pairing: f64,
    /// `max (L − Y)⁺` over all nodes.
    pub max_violation: f64,
}

pub fn skorokhod_report(triple: &SolutionTriple, problem: &Problem) -> Result<SkorokhodReport> {
    let lattice = problem.lattice();
    if triple.steps() != lattice.steps() {
        return Err(Error::LatticeMismatch);
    }
    let obstacle = problem.obstacle_values();
    let mut residual = 0.0;
    let mut pairing = 0.0;
    let mut max_violation = 0.0_f64;
    for i in 0..=lattice.steps() {
        let probs = lattice.probs(i);
        for j in 0..=i {
            let gap = triple.y.get(i, j) - obstacle.get(i, j);
            max_violation = max_violation.max(neg_part(gap));
            if i < lattice.steps() {
                let dk = triple.dk.get(i, j);
                if dk != 0.0 {
                    pairing += probs[j] * gap * dk;
                    residual += probs[j] * gap.abs() * dk;
                }
            }
        }
    }
    Ok(SkorokhodReport {
        residual,
        pairing,
        max_violation,
    })
}

/// One penalty level of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub level: f64,
    pub y0: f64,
    /// `‖Y^n − Y‖_{S^p}` against the projected reference.
    pub sp_distance: NormEntry,
    /// `‖Z^n − Z‖_{H^p}`.
    pub hp_distance: NormEntry,
    /// `‖K^n − K‖_{S^p}` (K is path dependent).
    pub k_distance: NormEntry,
    /// `E[(sup |Y^n − Y|)^β]^{1/β}` for each requested β.
    pub beta_distances: Vec<(f64, NormEntry)>,
    pub skorokhod: SkorokhodReport,
    /// `max (Y^{prev} − Y^n)⁺` against the previous level; 0 for the first.
    pub monotonicity_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub p: f64,
    pub reference_y0: f64,
    pub reference_sp_norm: NormEntry,
    pub reference_skorokhod: SkorokhodReport,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    fn column(&self, f: impl Fn(&SweepRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn sp_errors(&self) -> Vec<f64> {
        self.column(|r| r.sp_distance.value)
    }

    pub fn hp_errors(&self) -> Vec<f64> {
        self.column(|r| r.hp_distance.value)
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.column(|r| r.skorokhod.residual)
    }

    /// Largest node-wise decrease of `Y^n` between consecutive levels.
    pub fn max_monotonicity_violation(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.monotonicity_violation)
            .fold(0.0, f64::max)
    }
}

/// Norm settings for a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepNorms {
    pub p: f64,
    pub betas: Vec<f64>,
    pub mode: NormMode,
}

impl SweepNorms {
    pub fn new(p: f64) -> Self {
        Self {
            p,
            betas: Vec::new(),
            mode: NormMode::default(),
        }
    }
}

/// Penalized solves at increasing levels, each compared against the
/// projected reference.
pub fn penalization_sweep(
    problem: &Problem,
    levels: &[f64],
    cfg: &StepConfig,
    norms: &SweepNorms,
) -> Result<SweepReport> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one level".into()));
    }
    if levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("levels must be strictly increasing".into()));
    }
    let lattice = problem.lattice();
    let reference = solve_projected(problem, cfg)?;
    let reference_skorokhod = skorokhod_report(&reference, problem)?;
    let reference_sp_norm = norms::sp_norm(lattice, &reference.y, norms.p, norms.mode)?;

    let mut rows = Vec::with_capacity(levels.len());
    let mut previous: Option<SolutionTriple> = None;
    for &level in levels {
        let pen = solve_penalized(problem, level, cfg)?;
        let dy = pen.y.zip_with(&reference.y, |a, b| a - b)?;
        let dz = pen.z.zip_with(&reference.z, |a, b| a - b)?;
        let sp_distance = norms::sp_norm(lattice, &dy, norms.p, norms.mode)?;
        let hp_distance = norms::hp_norm(lattice, &dz, norms.p, norms.mode)?;
        let k_distance = norms::k_sp_distance(lattice, &pen.dk, &reference.dk, norms.p, norms.mode)?;
        let beta_distances = norms
            .betas
            .iter()
            .map(|&b| Ok((b, norms::beta_metric(lattice, &dy, b, norms.mode)?)))
            .collect::<Result<Vec<_>>>()?;
        let monotonicity_violation = match &previous {
            Some(prev) => prev
                .y
                .zip_with(&pen.y, |a, b| (a - b).max(0.0))?
                .slices()
                .iter()
                .flatten()
                .fold(0.0, |m: f64, v| m.max(*v)),
            None => 0.0,
        };
        rows.push(SweepRow {
            level,
            y0: pen.y.get(0, 0),
            sp_distance,
            hp_distance,
            k_distance,
            beta_distances,
            skorokhod: skorokhod_report(&pen, problem)?,
            monotonicity_violation,
        });
        previous = Some(pen);
    }
    Ok(SweepReport {
        p: norms.p,
        reference_y0: reference.y.get(0, 0),
        reference_sp_norm,
        reference_skorokhod,
        rows,
    })
}
