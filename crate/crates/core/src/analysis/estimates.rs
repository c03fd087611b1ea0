//! A priori estimate checkers.
//!
//! Each checker evaluates both sides of an inequality on the lattice and
//! reports `lhs / rhs`. With `Y*`, `L⁺*` the running maxima of `|Y|` and `L⁺`,
//! `I_τ = Σ_{i<τ} |f(t_i, L⁺*_i, 0)|·h`, `Q_τ = Σ_{i<τ} Z_i²·h`:
//!
//! | id | lhs | rhs |
//! |----|-----|-----|
//! | `P2.1`, `P4.2` | `E[Q_τ^{p/2} + K_τ^p]` | `E[(Y*_τ)^p + (L⁺*_τ)^p + I_τ^p]` |
//! | `P3.1` | `E[(Y*_T)^p]` | `E[|ξ|^p + (L⁺*_T)^p + I_T^p]` |
//! | `P4.3` | `E[(Y*_T)^p + Q_T^{p/2} + K_T^p]` | `E[|ξ|^p + (L⁺*_T)^p + I_T^p]` |
//! | `P5.1i` | `‖Y‖_D` | `E[|ξ| + L⁺*_T + I_T]` |
//! | `P5.1ii` | `E[(Y*_T)^β + Q_T^{β/2} + K_T^β]` | `(E[|ξ| + L⁺*_T + I_T])^β` |
//!
//! `P4.x` take penalized triples; the others take reflected ones.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::norms::{d_norm, hp_norm, hp_norm_window, sp_norm, sp_norm_window, NormMethod, NormMode};
use crate::error::{Error, Result};
use crate::lattice::{expect_over_paths, BinomialLattice, LatticeProcess, PathMode};
use crate::picard::solve_z_frozen;
use crate::problem::Problem;
use crate::reflect::{SolutionTriple, SolverMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimateId {
    #[serde(rename = "P2.1")]
    P21,
    #[serde(rename = "P3.1")]
    P31,
    #[serde(rename = "P4.2")]
    P42,
    #[serde(rename = "P4.3")]
    P43,
    #[serde(rename = "P5.1i")]
    P51i,
    #[serde(rename = "P5.1ii")]
    P51ii,
}

impl EstimateId {
    pub const ALL: [EstimateId; 6] = [
        EstimateId::P21,
        EstimateId::P31,
        EstimateId::P42,
        EstimateId::P43,
        EstimateId::P51i,
        EstimateId::P51ii,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimateId::P21 => "P2.1",
            EstimateId::P31 => "P3.1",
            EstimateId::P42 => "P4.2",
            EstimateId::P43 => "P4.3",
            EstimateId::P51i => "P5.1i",
            EstimateId::P51ii => "P5.1ii",
        }
    }

    /// Whether the estimate is stated for penalized solutions.
    pub fn penalized(self) -> bool {
        matches!(self, EstimateId::P42 | EstimateId::P43)
    }

    /// Whether the estimate takes a stopping time.
    pub fn stopped(self) -> bool {
        matches!(self, EstimateId::P21 | EstimateId::P42)
    }

    /// Whether the estimate needs a z-free generator.
    pub fn z_free(self) -> bool {
        matches!(self, EstimateId::P51i | EstimateId::P51ii)
    }

    /// Power `q` with `ratio(shifted) ≤ e^{q|a|T}·ratio(original)` when the
    /// driver term vanishes.
    pub fn shift_power(self, exponent: f64) -> f64 {
        match self {
            EstimateId::P51i => 2.0,
            _ => 2.0 * exponent,
        }
    }
}

impl fmt::Display for EstimateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimateId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown estimate id `{s}`")))
    }
}

/// Stopping rules on the lattice: `T`, or the first time `W` reaches a level
/// (capped at `T`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StoppingRule {
    Terminal,
    HitAbove { level: f64 },
    HitBelow { level: f64 },
}

impl StoppingRule {
    pub fn stop_index(&self, lattice: &BinomialLattice, nodes: &[usize]) -> usize {
        let n = lattice.steps();
        let hit = |pred: &dyn Fn(f64) -> bool| {
            (0..=n)
                .find(|&i| pred(lattice.node_value(i, nodes[i])))
                .unwrap_or(n)
        };
        match *self {
            StoppingRule::Terminal => n,
            StoppingRule::HitAbove { level } => hit(&|w| w >= level),
            StoppingRule::HitBelow { level } => hit(&|w| w <= level),
        }
    }
}

impl fmt::Display for StoppingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoppingRule::Terminal => f.write_str("T"),
            StoppingRule::HitAbove { level } => write!(f, "hit(W>={level})^T"),
            StoppingRule::HitBelow { level } => write!(f, "hit(W<={level})^T"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub id: EstimateId,
    pub scenario: String,
    pub exponent: f64,
    pub tau: StoppingRule,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub lhs_stderr: Option<f64>,
    pub rhs_stderr: Option<f64>,
    pub method: NormMethod,
}

pub(crate) fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

fn method_of(mode: PathMode) -> NormMethod {
    match mode {
        PathMode::Enumerate { .. } => NormMethod::ExactEnumeration,
        PathMode::Sampled { count, .. } => NormMethod::Sampled { count },
    }
}

/// Evaluates estimate `id` for `triple`, a solution of `problem`.
///
/// `exponent` is `p` for all ids except `P5.1ii`, where it is `β`; it is
/// ignored for `P5.1i`.
pub fn check_estimate(
    id: EstimateId,
    problem: &Problem,
    triple: &SolutionTriple,
    tau: StoppingRule,
    exponent: f64,
    mode: NormMode,
) -> Result<EstimateReport> {
    let lattice = problem.lattice();
    let n = lattice.steps();
    if !triple.y.conforms_to(lattice, n) {
        return Err(Error::LatticeMismatch);
    }
    let penalized = matches!(triple.mode, SolverMode::Penalized { .. });
    if id.penalized() != penalized {
        return Err(Error::InvalidParameter(format!(
            "{id} needs a {} solution",
            if id.penalized() { "penalized" } else { "reflected" }
        )));
    }
    if !id.stopped() && tau != StoppingRule::Terminal {
        return Err(Error::InvalidParameter(format!("{id} is stated at tau = T only")));
    }
    if id.z_free() && problem.generator().depends_on_z {
        return Err(Error::InvalidParameter(format!("{id} needs a z-free generator")));
    }
    let p = exponent;
    match id {
        EstimateId::P21 | EstimateId::P42 if !(p > 0.0) => {
            return Err(Error::InvalidParameter(format!("{id} needs p > 0")))
        }
        EstimateId::P31 | EstimateId::P43 if !(p > 1.0) => {
            return Err(Error::InvalidParameter(format!("{id} needs p > 1")))
        }
        EstimateId::P51ii if !(p > 0.0 && p < 1.0) => {
            return Err(Error::InvalidParameter(format!("{id} needs beta in (0, 1)")))
        }
        _ => {}
    }

    let h = lattice.h();
    let gen = problem.generator();
    let lplus = problem.obstacle_values().map(|l| l.max(0.0));
    let path_mode = mode.path_mode(n)?;
    // Slots: 0 Y*, 1 L⁺*, 2 I, 3 Q, 4 K, 5 |ξ|, evaluated at the stop index.
    let est = expect_over_paths(lattice, path_mode, 2, |nodes, out| {
        let stop = tau.stop_index(lattice, nodes);
        let (mut ystar, mut lstar, mut i_f, mut q, mut k) = (0.0_f64, 0.0_f64, 0.0, 0.0, 0.0);
        for (i, &j) in nodes.iter().enumerate().take(stop + 1) {
            ystar = ystar.max(triple.y.get(i, j).abs());
            lstar = lstar.max(lplus.get(i, j));
            if i < stop {
                let t = lattice.time(i);
                let w = lattice.node_value(i, j);
                i_f += gen.evaluate(t, w, lstar, 0.0).abs() * h;
                q += triple.z.get(i, j).powi(2) * h;
                k += triple.dk.get(i, j);
            }
        }
        let xi = triple.y.get(n, nodes[n]).abs();
        let (lhs, rhs) = match id {
            EstimateId::P21 | EstimateId::P42 => (
                q.powf(0.5 * p) + k.powf(p),
                ystar.powf(p) + lstar.powf(p) + i_f.powf(p),
            ),
            EstimateId::P31 => (ystar.powf(p), xi.powf(p) + lstar.powf(p) + i_f.powf(p)),
            EstimateId::P43 => (
                ystar.powf(p) + q.powf(0.5 * p) + k.powf(p),
                xi.powf(p) + lstar.powf(p) + i_f.powf(p),
            ),
            EstimateId::P51i => (0.0, xi + lstar + i_f),
            EstimateId::P51ii => (ystar.powf(p) + q.powf(0.5 * p) + k.powf(p), xi + lstar + i_f),
        };
        out[0] = lhs;
        out[1] = rhs;
    })?;
    let se = |k: usize| est.stderrs.as_ref().map(|s| s[k]);
    let (lhs, rhs, lhs_stderr, rhs_stderr) = match id {
        EstimateId::P51i => (d_norm(lattice, &triple.y)?, est.means[1], None, se(1)),
        EstimateId::P51ii => {
            let m = est.means[1];
            (
                est.means[0],
                m.powf(p),
                se(0),
                se(1).map(|s| if m > 0.0 { p * m.powf(p - 1.0) * s } else { 0.0 }),
            )
        }
        _ => (est.means[0], est.means[1], se(0), se(1)),
    };
    Ok(EstimateReport {
        id,
        scenario: problem.name.clone(),
        exponent: p,
        tau,
        lhs,
        rhs,
        ratio: ratio(lhs, rhs),
        lhs_stderr,
        rhs_stderr,
        method: method_of(path_mode),
    })
}

/// Two z-frozen solves compared against their driver gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub start: usize,
    pub end: usize,
    /// `‖(Y − Y′)1_{[t,q]}‖_{S^p} + ‖(Z − Z′)1_{[t,q]}‖_{H^p}`.
    pub lhs: f64,
    /// Full horizon: `‖∫|f(s, Y, V) − f(s, Y′, V′)| ds‖_p`.
    /// Window: `‖Y_q − Y′_q‖_p + ‖∫_t^q |f(s, Y, V) − f(s, Y, V′)| ds‖_p`.
    pub rhs: f64,
    pub ratio: f64,
    pub method: NormMethod,
}

/// Stability of the z-frozen map on steps `start..=end` (`0..=N` for the
/// whole horizon).
pub fn frozen_stability(
    problem: &Problem,
    v: &LatticeProcess,
    v_prime: &LatticeProcess,
    p: f64,
    window: Option<(usize, usize)>,
    mode: NormMode,
) -> Result<StabilityReport> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter("stability needs p > 1".into()));
    }
    let lattice = problem.lattice();
    let n = lattice.steps();
    let (start, end) = window.unwrap_or((0, n));
    if start >= end || end > n {
        return Err(Error::InvalidParameter(format!("bad window [{start}, {end}]")));
    }
    let cfg = crate::bsde::StepConfig::default();
    let a = solve_z_frozen(problem, v, &cfg)?;
    let b = solve_z_frozen(problem, v_prime, &cfg)?;
    let dy = a.y.zip_with(&b.y, |x, y| x - y)?;
    let dz = a.z.zip_with(&b.z, |x, y| x - y)?;
    let full = window.is_none();
    let (sp, hp) = if full {
        (sp_norm(lattice, &dy, p, mode)?, hp_norm(lattice, &dz, p, mode)?)
    } else {
        (
            sp_norm_window(lattice, &dy, p, start, end, mode)?,
            hp_norm_window(lattice, &dz, p, start, end, mode)?,
        )
    };
    let h = lattice.h();
    let gen = problem.generator();
    let path_mode = mode.path_mode(n)?;
    let est = expect_over_paths(lattice, path_mode, 2, |nodes, out| {
        let mut u = 0.0;
        for (i, &j) in nodes.iter().enumerate().take(end).skip(start) {
            let t = lattice.time(i);
            let w = lattice.node_value(i, j);
            let y_b = if full { b.y.get(i, j) } else { a.y.get(i, j) };
            u += (gen.evaluate(t, w, a.y.get(i, j), v.get(i, j)) - gen.evaluate(t, w, y_b, v_prime.get(i, j))).abs() * h;
        }
        out[0] = u.powf(p);
        out[1] = dy.get(end, nodes[end]).abs().powf(p);
    })?;
    let mut rhs = est.means[0].powf(1.0 / p);
    if !full {
        rhs += est.means[1].powf(1.0 / p);
    }
    let lhs = sp.value + hp.value;
    Ok(StabilityReport {
        start,
        end,
        lhs,
        rhs,
        ratio: ratio(lhs, rhs),
        method: method_of(path_mode),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsde::StepConfig;
    use crate::problem::{scenario, Generator, Obstacle, ScenarioParams};
    use crate::reflect::{solve_penalized, solve_projected};
    use std::sync::Arc;

    fn exact() -> NormMode {
        NormMode::Enumerate { cap: 20 }
    }

    #[test]
    fn zero_problem_has_zero_ratio() {
        let l = Arc::new(BinomialLattice::new(1.0, 8).unwrap());
        let p = Problem::new("zero", l, vec![0.0; 9], Generator::zero(), Obstacle::NegInfinity, 2.0).unwrap();
        let t = solve_projected(&p, &StepConfig::default()).unwrap();
        for id in [EstimateId::P21, EstimateId::P31, EstimateId::P51i, EstimateId::P51ii] {
            let e = if id == EstimateId::P51ii { 0.5 } else { 2.0 };
            let r = check_estimate(id, &p, &t, StoppingRule::Terminal, e, exact()).unwrap();
            assert_eq!((r.lhs, r.rhs, r.ratio), (0.0, 0.0, 0.0), "{id}");
        }
    }

    #[test]
    fn never_binding_p21_uses_z_only() {
        let p = scenario("never-binding", &ScenarioParams::new(), 10, 2.0).unwrap();
        let t = solve_projected(&p, &StepConfig::default()).unwrap();
        let r = check_estimate(EstimateId::P21, &p, &t, StoppingRule::Terminal, 2.0, exact()).unwrap();
        // K ≡ 0 and p = 2: lhs = Σ h·E[Z_i²].
        let z2 = hp_norm(p.lattice(), &t.z, 2.0, NormMode::default()).unwrap().value.powi(2);
        assert!((r.lhs - z2).abs() <= 1e-12);
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
    }

    #[test]
    fn hitting_rule_stops_early() {
        let l = BinomialLattice::new(1.0, 4).unwrap();
        let up = [0, 1, 2, 3, 4];
        let down = [0, 0, 0, 0, 0];
        let rule = StoppingRule::HitAbove { level: 0.9 };
        assert_eq!(rule.stop_index(&l, &up), 2);
        assert_eq!(rule.stop_index(&l, &down), 4);
        assert_eq!(StoppingRule::HitBelow { level: -0.4 }.stop_index(&l, &down), 1);
    }

    #[test]
    fn mode_and_id_checks() {
        let p = scenario("binding-obstacle", &ScenarioParams::new(), 8, 2.0).unwrap();
        let cfg = StepConfig::default();
        let proj = solve_projected(&p, &cfg).unwrap();
        let pen = solve_penalized(&p, 4.0, &cfg).unwrap();
        assert!(check_estimate(EstimateId::P42, &p, &proj, StoppingRule::Terminal, 2.0, exact()).is_err());
        assert!(check_estimate(EstimateId::P21, &p, &pen, StoppingRule::Terminal, 2.0, exact()).is_err());
        assert!(check_estimate(EstimateId::P43, &p, &pen, StoppingRule::Terminal, 2.0, exact()).is_ok());
        let hit = StoppingRule::HitAbove { level: 0.5 };
        assert!(check_estimate(EstimateId::P31, &p, &proj, hit, 2.0, exact()).is_err());
        assert!(check_estimate(EstimateId::P51ii, &p, &proj, StoppingRule::Terminal, 1.5, exact()).is_err());
        let zdep = scenario("monotone-nonlipschitz", &ScenarioParams::new(), 8, 2.0).unwrap();
        let tz = solve_projected(&zdep, &cfg).unwrap();
        assert!(check_estimate(EstimateId::P51i, &zdep, &tz, StoppingRule::Terminal, 1.0, exact()).is_err());
        assert_eq!("p4.3".parse::<EstimateId>().unwrap(), EstimateId::P43);
    }

    #[test]
    fn d_norm_side_of_p51i() {
        let p = scenario("american-put", &ScenarioParams::new(), 10, 2.0).unwrap();
        let t = solve_projected(&p, &StepConfig::default()).unwrap();
        let r = check_estimate(EstimateId::P51i, &p, &t, StoppingRule::Terminal, 1.0, exact()).unwrap();
        assert_eq!(r.lhs, d_norm(p.lattice(), &t.y).unwrap());
        assert!(r.ratio <= 2.0);
    }

    #[test]
    fn frozen_stability_is_finite() {
        let p = scenario("monotone-nonlipschitz", &ScenarioParams::new(), 12, 1.5).unwrap();
        let v = LatticeProcess::constant(11, 0.0);
        let v2 = LatticeProcess::from_fn(11, |i, j| 0.1 * (i as f64 - j as f64));
        let full = frozen_stability(&p, &v, &v2, 1.5, None, exact()).unwrap();
        assert!(full.rhs > 0.0 && full.ratio.is_finite());
        let win = frozen_stability(&p, &v, &v2, 1.5, Some((4, 8)), exact()).unwrap();
        assert!(win.ratio.is_finite());
        let same = frozen_stability(&p, &v, &v, 1.5, None, exact()).unwrap();
        assert_eq!(same.lhs, 0.0);
    }
}
