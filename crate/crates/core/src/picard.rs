//! Picard iteration over the generator's z-argument.
//!
//! [`solve_z_frozen`] solves the reflected equation with `f(t, y, V_t)` for an
//! exogenous `V`. [`picard_solve`] splits `[0, T]` into blocks of mesh `δ`
//! with `2·ĉ·λ·√δ ≤ 1`, iterates `V ← Z` on each block starting from
//! `V = 0`, and glues the blocks backward in time.

use serde::{Deserialize, Serialize};

use crate::analysis::norms::{hp_norm_window, sp_norm_window, NormEntry, NormMode};
use crate::bsde::{backward_window, check_step_condition, implicit_step, StepConfig, Window};
use crate::error::{Error, Result};
use crate::lattice::{BinomialLattice, LatticeProcess};
use crate::problem::Problem;
use crate::reflect::{project, SolutionTriple, SolverMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig {
    /// Exponent of the H^p stopping distance, `p > 1`.
    pub p: f64,
    /// Stability constant `ĉ` used for the block mesh.
    pub chat: f64,
    pub max_sweeps: usize,
    /// Stop a block once `‖Z^k − Z^{k−1}‖_{H^p} ≤ stop_tol`.
    pub stop_tol: f64,
    /// Explicit block boundaries as grid indices `0 = b₀ < … < b_k = N`.
    pub blocks: Option<Vec<usize>>,
    pub norm_mode: NormMode,
    pub step: StepConfig,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            p: 1.5,
            chat: 1.0,
            max_sweeps: 60,
            stop_tol: 1e-10,
            blocks: None,
            norm_mode: NormMode::default(),
            step: StepConfig::default(),
        }
    }
}

impl PicardConfig {
    pub fn validate(&self, problem: &Problem) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidParameter(format!("picard exponent must exceed 1, got {}", self.p)));
        }
        if !(self.chat > 0.0) || !self.chat.is_finite() {
            return Err(Error::InvalidParameter(format!("chat must be positive, got {}", self.chat)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be at least 1".into()));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidParameter("stop_tol must be positive".into()));
        }
        if let Some(h5) = &problem.generator().h5 {
            if h5.alpha * self.p >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "need alpha·p < 1, got alpha = {}, p = {}",
                    h5.alpha, self.p
                )));
            }
        }
        self.step.validate()
    }
}

/// `δ = min(T, (2·ĉ·λ)⁻²)`, or `T` when `λ = 0`.
pub fn block_mesh(horizon: f64, lambda: f64, chat: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !(chat > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need lambda >= 0 and chat > 0, got {lambda}, {chat}"
        )));
    }
    if lambda == 0.0 {
        return Ok(horizon);
    }
    Ok(horizon.min((2.0 * chat * lambda).powi(-2)))
}

/// Uniform blocks of mesh at most `δ`, snapped to grid indices.
pub fn block_schedule(lattice: &BinomialLattice, lambda: f64, chat: f64) -> Result<Vec<usize>> {
    let horizon = lattice.horizon();
    let delta = block_mesh(horizon, lambda, chat)?;
    let n = lattice.steps();
    if delta < lattice.h() * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "block mesh {delta} is below one grid step {}",
            lattice.h()
        )));
    }
    let k = ((horizon / delta) - 1e-9).ceil().max(1.0) as usize;
    if k > n {
        return Err(Error::InvalidParameter(format!("{k} blocks exceed {n} grid steps")));
    }
    let mut b: Vec<usize> = (0..=k).map(|m| ((m * n) as f64 / k as f64).round() as usize).collect();
    b.dedup();
    Ok(b)
}

fn check_schedule(blocks: &[usize], lattice: &BinomialLattice, lambda: f64, chat: f64) -> Result<()> {
    let n = lattice.steps();
    if blocks.first() != Some(&0) || blocks.last() != Some(&n) || blocks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "block boundaries must increase strictly from 0 to {n}"
        )));
    }
    let mesh = blocks.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0) as f64 * lattice.h();
    if 2.0 * chat * lambda * mesh.sqrt() > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "block mesh {mesh} violates 2·chat·lambda·sqrt(mesh) <= 1"
        )));
    }
    Ok(())
}

/// Projected backward sweep over `start..=end` with the z-argument frozen at `v`.
fn frozen_window(
    problem: &Problem,
    v: &LatticeProcess,
    terminal: Vec<f64>,
    start: usize,
    end: usize,
    cfg: &StepConfig,
) -> Result<Window> {
    let lattice = problem.lattice();
    let gen = problem.generator();
    let obstacle = problem.obstacle_values();
    let h = lattice.h();
    backward_window(lattice, terminal, start, end, |i, j, t, w, yhat, _| {
        let ycand = implicit_step(yhat, t, w, v.get(i, j), gen, h, cfg)?;
        Ok(project(ycand, obstacle.get(i, j)))
    })
}

/// Reflected solve with generator `g(t, y) = f(t, y, V_t)`.
pub fn solve_z_frozen(problem: &Problem, v: &LatticeProcess, cfg: &StepConfig) -> Result<SolutionTriple> {
    check_step_condition(problem, cfg)?;
    let n = problem.lattice().steps();
    if !v.conforms_to(problem.lattice(), n - 1) {
        return Err(Error::LatticeMismatch);
    }
    let (y, z, dk) = frozen_window(problem, v, problem.xi().to_vec(), 0, n, cfg)?.into_processes()?;
    Ok(SolutionTriple {
        y,
        z,
        dk,
        mode: SolverMode::ZFrozen,
        cfg: *cfg,
    })
}

/// One sweep of one block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub block: usize,
    pub start: usize,
    pub end: usize,
    pub sweep: usize,
    /// `‖Z^k − Z^{k−1}‖_{H^p}` on the block (`Z⁰ = 0`).
    pub hp_diff: NormEntry,
    /// `‖Y^k − Y^{k−1}‖_{S^p}` on the block (`Y⁰ = 0`).
    pub sp_diff: NormEntry,
    /// `hp_diff / previous hp_diff`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardTrace {
    pub schedule: Vec<usize>,
    pub rows: Vec<SweepRecord>,
}

impl PicardTrace {
    pub fn block_rows(&self, block: usize) -> impl Iterator<Item = &SweepRecord> {
        self.rows.iter().filter(move |r| r.block == block)
    }

    pub fn sweeps(&self, block: usize) -> usize {
        self.block_rows(block).count()
    }

    /// Largest measured ratio among sweeps numbered above `after`.
    pub fn max_ratio_after(&self, after: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.sweep > after)
            .filter_map(|r| r.ratio)
            .reduce(f64::max)
    }
}

/// Embeds window slices (indexed from `start`) into a full process on `0..=last`.
fn embed(slices: &[Vec<f64>], start: usize, last: usize) -> LatticeProcess {
    LatticeProcess::from_fn(last, |i, j| {
        if i >= start && i - start < slices.len() {
            slices[i - start][j]
        } else {
            0.0
        }
    })
}

fn window_diff(a: &[Vec<f64>], b: Option<&[Vec<f64>]>, start: usize, last: usize) -> LatticeProcess {
    match b {
        Some(b) => {
            let d: Vec<Vec<f64>> = a
                .iter()
                .zip(b)
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u - v).collect())
                .collect();
            embed(&d, start, last)
        }
        None => embed(a, start, last),
    }
}

/// Block Picard construction; returns the glued triple and its trace.
pub fn picard_solve(problem: &Problem, cfg: &PicardConfig) -> Result<(SolutionTriple, PicardTrace)> {
    cfg.validate(problem)?;
    check_step_condition(problem, &cfg.step)?;
    let lattice = problem.lattice();
    let n = lattice.steps();
    let lambda = problem.generator().lambda;
    let schedule = match &cfg.blocks {
        Some(b) => {
            check_schedule(b, lattice, lambda, cfg.chat)?;
            b.clone()
        }
        None => block_schedule(lattice, lambda, cfg.chat)?,
    };

    let mut y_slices = vec![Vec::new(); n + 1];
    let mut z_slices = vec![Vec::new(); n];
    let mut dk_slices = vec![Vec::new(); n];
    y_slices[n] = problem.xi().to_vec();
    let mut rows = Vec::new();

    for block in (0..schedule.len() - 1).rev() {
        let (start, end) = (schedule[block], schedule[block + 1]);
        let terminal = y_slices[end].clone();
        let mut v = LatticeProcess::constant(n - 1, 0.0);
        let mut prev: Option<Window> = None;
        let mut prev_diff: Option<f64> = None;
        let mut ratios = Vec::new();
        let mut done = None;
        for sweep in 1..=cfg.max_sweeps {
            let win = frozen_window(problem, &v, terminal.clone(), start, end, &cfg.step)?;
            let dz = window_diff(&win.z, prev.as_ref().map(|p| p.z.as_slice()), start, n - 1);
            let dy = window_diff(&win.y, prev.as_ref().map(|p| p.y.as_slice()), start, n);
            let hp_diff = hp_norm_window(lattice, &dz, cfg.p, start, end, cfg.norm_mode)?;
            let sp_diff = sp_norm_window(lattice, &dy, cfg.p, start, end, cfg.norm_mode)?;
            let ratio = prev_diff.filter(|d| *d > 0.0).map(|d| hp_diff.value / d);
            if let Some(r) = ratio {
                ratios.push(r);
            }
            rows.push(SweepRecord {
                block,
                start,
                end,
                sweep,
                hp_diff,
                sp_diff,
                ratio,
            });
            v = embed(&win.z, start, n - 1);
            prev_diff = Some(hp_diff.value);
            let converged = sweep > 1 && hp_diff.value <= cfg.stop_tol;
            prev = Some(win);
            if converged {
                done = prev.take();
                break;
            }
        }
        let win = done.ok_or(Error::NoContraction {
            block,
            sweeps: cfg.max_sweeps,
            ratios,
        })?;
        for (k, s) in win.y.into_iter().enumerate().take(end - start) {
            y_slices[start + k] = s;
        }
        for (k, (z, dk)) in win.z.into_iter().zip(win.dk).enumerate() {
            z_slices[start + k] = z;
            dk_slices[start + k] = dk;
        }
    }

    let triple = SolutionTriple {
        y: LatticeProcess::from_slices(y_slices)?,
        z: LatticeProcess::from_slices(z_slices)?,
        dk: LatticeProcess::from_slices(dk_slices)?,
        mode: SolverMode::Picard,
        cfg: cfg.step,
    };
    Ok((triple, PicardTrace { schedule, rows }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{scenario, Generator, Obstacle, ScenarioParams};
    use crate::reflect::solve_projected;
    use std::sync::Arc;

    fn cfg() -> StepConfig {
        StepConfig::default()
    }

    #[test]
    fn schedule_examples() {
        let l = BinomialLattice::new(1.0, 100).unwrap();
        assert_eq!(block_schedule(&l, 0.0, 1.0).unwrap(), vec![0, 100]);
        assert_eq!(block_mesh(1.0, 1.0, 1.0).unwrap(), 0.25);
        assert_eq!(block_schedule(&l, 1.0, 1.0).unwrap(), vec![0, 25, 50, 75, 100]);
        assert_eq!(block_mesh(1.0, 0.4, 1.0).unwrap(), 1.0);
        assert_eq!(block_schedule(&l, 0.4, 1.0).unwrap(), vec![0, 100]);
        let coarse = BinomialLattice::new(1.0, 4).unwrap();
        assert!(block_schedule(&coarse, 10.0, 1.0).is_err());
        assert!(block_mesh(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn frozen_zero_matches_projected_for_z_free() {
        let p = scenario("binding-obstacle", &ScenarioParams::new(), 30, 2.0).unwrap();
        let proj = solve_projected(&p, &cfg()).unwrap();
        let frozen = solve_z_frozen(&p, &LatticeProcess::constant(29, 0.0), &cfg()).unwrap();
        assert_eq!(frozen.y, proj.y);
        assert_eq!(frozen.dk, proj.dk);
        let again = solve_z_frozen(&p, &proj.z, &cfg()).unwrap();
        assert_eq!(again.y, proj.y);
    }

    #[test]
    fn frozen_linear_driver_matches_recursion() {
        let n = 100;
        let l = Arc::new(BinomialLattice::new(1.0, n).unwrap());
        let xi: Vec<f64> = (0..=n).map(|j| l.node_value(n, j)).collect();
        let gen = Generator::new(-1.0, 1.0, true, |_, _, y, z| -y + z);
        let p = Problem::new("lin", Arc::clone(&l), xi.clone(), gen, Obstacle::NegInfinity, 2.0).unwrap();
        let t = solve_z_frozen(&p, &LatticeProcess::constant(n - 1, 1.0), &cfg()).unwrap();
        // y(1 + h) = ŷ + h.
        let h = l.h();
        let mut y = xi;
        for _ in 0..n {
            y = y.windows(2).map(|w| (0.5 * (w[0] + w[1]) + h) / (1.0 + h)).collect();
        }
        assert!((t.y.get(0, 0) - y[0]).abs() <= 1e-12);
    }

    #[test]
    fn z_free_converges_after_second_sweep() {
        let p = scenario("american-put", &ScenarioParams::new(), 20, 2.0).unwrap();
        let (t, trace) = picard_solve(&p, &PicardConfig::default()).unwrap();
        assert_eq!(trace.schedule, vec![0, 20]);
        assert_eq!(trace.sweeps(0), 2);
        assert_eq!(trace.rows[1].hp_diff.value, 0.0);
        let proj = solve_projected(&p, &cfg()).unwrap();
        assert_eq!(t.y, proj.y);
    }

    #[test]
    fn contraction_and_agreement_on_nonlipschitz() {
        let p = scenario("monotone-nonlipschitz", &ScenarioParams::new(), 16, 1.5).unwrap();
        let pc = PicardConfig::default();
        let (t, trace) = picard_solve(&p, &pc).unwrap();
        let proj = solve_projected(&p, &cfg()).unwrap();
        assert!((t.y.get(0, 0) - proj.y.get(0, 0)).abs() <= 10.0 * pc.stop_tol);
        let worst = trace.max_ratio_after(2).unwrap_or(0.0);
        assert!(worst <= 0.6, "ratio {worst}");
        let first = trace.rows[0].hp_diff.value;
        if worst <= 0.5 {
            let bound = (first / pc.stop_tol).log2().ceil() as usize + 1;
            assert!(trace.sweeps(0) <= bound);
        }
    }

    #[test]
    fn blocks_glue_exactly() {
        let mut params = ScenarioParams::new();
        params.insert("lambda".into(), 1.0);
        let p = scenario("monotone-nonlipschitz", &params, 16, 1.5).unwrap();
        let (t, trace) = picard_solve(&p, &PicardConfig::default()).unwrap();
        assert_eq!(trace.schedule, vec![0, 4, 8, 12, 16]);
        // Gluing: each block restarts from the later block's initial slice.
        let proj = solve_projected(&p, &cfg()).unwrap();
        assert!(t.y.max_abs_diff(&proj.y).unwrap() <= 1e-9);
        assert!(t.dk.slices().iter().flatten().all(|&v| v >= 0.0));
        let l = p.obstacle_values();
        for i in 0..=16 {
            for j in 0..=i {
                assert!(t.y.get(i, j) >= l.get(i, j));
            }
        }
        let report = crate::reflect::skorokhod_report(&t, &p).unwrap();
        assert_eq!(report.residual, 0.0);
    }

    #[test]
    fn config_validation() {
        let p = scenario("monotone-nonlipschitz", &ScenarioParams::new(), 8, 2.0).unwrap();
        let bad_p = PicardConfig {
            p: 2.0,
            ..PicardConfig::default()
        };
        assert!(picard_solve(&p, &bad_p).is_err());
        let bad_blocks = PicardConfig {
            blocks: Some(vec![0, 5, 3, 8]),
            ..PicardConfig::default()
        };
        assert!(picard_solve(&p, &bad_blocks).is_err());
        let one_sweep = PicardConfig {
            max_sweeps: 1,
            ..PicardConfig::default()
        };
        assert!(matches!(picard_solve(&p, &one_sweep), Err(Error::NoContraction { .. })));
    }
}
