//! S^p, H^p, β-metrics and the class-D norm on the lattice.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    cond_expect_slice, expect_over_paths, AugmentedLattice, BinomialLattice, LatticeProcess, PathEstimate, PathMode,
};

/// State budget used when `Auto` tries the augmented lattice first.
pub const AUTO_STATE_BUDGET: usize = 200_000;
pub const DEFAULT_SAMPLE_COUNT: usize = 20_000;

/// How a pathwise expectation is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NormMode {
    /// Exact when affordable, otherwise a fixed-seed sample.
    Auto { count: usize, seed: u64 },
    Enumerate { cap: usize },
    Augmented,
    Sampled { count: usize, seed: u64 },
}

impl Default for NormMode {
    fn default() -> Self {
        NormMode::Auto {
            count: DEFAULT_SAMPLE_COUNT,
            seed: 0,
        }
    }
}

impl NormMode {
    /// Path-level mode for functionals without a node representation.
    pub fn path_mode(self, steps: usize) -> Result<PathMode> {
        match self {
            NormMode::Auto { count, seed } => Ok(PathMode::auto(steps, count, seed)),
            NormMode::Enumerate { cap } => Ok(PathMode::Enumerate { cap }),
            NormMode::Sampled { count, seed } => Ok(PathMode::Sampled { count, seed }),
            NormMode::Augmented => Err(Error::InvalidParameter(
                "functional has no running-max representation; augmented mode unavailable".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NormMethod {
    /// Slice-wise expectation, no path functional involved.
    Exact,
    ExactEnumeration,
    Augmented,
    Sampled { count: usize },
}

impl NormMethod {
    pub fn is_exact(&self) -> bool {
        !matches!(self, NormMethod::Sampled { .. })
    }

    fn from_path_mode(mode: PathMode) -> Self {
        match mode {
            PathMode::Enumerate { .. } => NormMethod::ExactEnumeration,
            PathMode::Sampled { count, .. } => NormMethod::Sampled { count },
        }
    }
}

impl fmt::Display for NormMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormMethod::Exact => f.write_str("exact"),
            NormMethod::ExactEnumeration => f.write_str("exact-enumeration"),
            NormMethod::Augmented => f.write_str("augmented"),
            NormMethod::Sampled { count } => write!(f, "sampled({count})"),
        }
    }
}

/// A value with its method tag; sampled values carry a standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEntry {
    pub value: f64,
    pub stderr: Option<f64>,
    pub method: NormMethod,
}

impl NormEntry {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: None,
            method: NormMethod::Exact,
        }
    }
}

/// `m^{1/p}` with a delta-method standard error.
fn root_entry(mean: f64, stderr: Option<f64>, p: f64, method: NormMethod) -> NormEntry {
    let value = mean.max(0.0).powf(1.0 / p);
    let stderr = stderr.map(|s| {
        if mean > 0.0 {
            s * value / (p * mean)
        } else {
            0.0
        }
    });
    NormEntry { value, stderr, method }
}

fn estimate_entry(est: &PathEstimate, k: usize) -> (f64, Option<f64>, NormMethod) {
    (
        est.means[k],
        est.stderrs.as_ref().map(|s| s[k]),
        NormMethod::from_path_mode(est.mode),
    )
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent must be positive, got {p}")));
    }
    Ok(())
}

fn check_window(lattice: &BinomialLattice, x: &LatticeProcess, start: usize, end: usize) -> Result<()> {
    if x.last_step() > lattice.steps() || end > x.last_step() || start > end {
        return Err(Error::InvalidParameter(format!(
            "window [{start}, {end}] invalid for a process on steps 0..={}",
            x.last_step()
        )));
    }
    Ok(())
}

/// `E[(max_i |X_i|)^p]^{1/p}` over every step the process is defined on.
pub fn sp_norm(lattice: &BinomialLattice, x: &LatticeProcess, p: f64, mode: NormMode) -> Result<NormEntry> {
    sp_norm_window(lattice, x, p, 0, x.last_step(), mode)
}

/// `E[(max_{start ≤ i ≤ end} |X_i|)^p]^{1/p}`.
pub fn sp_norm_window(
    lattice: &BinomialLattice,
    x: &LatticeProcess,
    p: f64,
    start: usize,
    end: usize,
    mode: NormMode,
) -> Result<NormEntry> {
    check_exponent(p)?;
    check_window(lattice, x, start, end)?;
    let by_augmentation = |budget: usize| -> Result<NormEntry> {
        let n = lattice.steps();
        let g = LatticeProcess::from_fn(n, |i, j| {
            if (start..=end).contains(&i) {
                x.get(i, j).abs()
            } else {
                0.0
            }
        });
        let aug = AugmentedLattice::build_with_budget(lattice, &g, None, budget)?;
        let mean = aug.expect(n, |_, m| m.powf(p));
        Ok(root_entry(mean, None, p, NormMethod::Augmented))
    };
    match mode {
        NormMode::Augmented => by_augmentation(usize::MAX),
        NormMode::Auto { .. } => match by_augmentation(AUTO_STATE_BUDGET) {
            Err(Error::StateBudget { .. }) => sp_by_paths(lattice, x, p, start, end, mode),
            other => other,
        },
        _ => sp_by_paths(lattice, x, p, start, end, mode),
    }
}

fn sp_by_paths(
    lattice: &BinomialLattice,
    x: &LatticeProcess,
    p: f64,
    start: usize,
    end: usize,
    mode: NormMode,
) -> Result<NormEntry> {
    let est = expect_over_paths(lattice, mode.path_mode(lattice.steps())?, 1, |nodes, out| {
        let m = (start..=end).map(|i| x.get(i, nodes[i]).abs()).fold(0.0, f64::max);
        out[0] = m.powf(p);
    })?;
    let (mean, se, method) = estimate_entry(&est, 0);
    Ok(root_entry(mean, se, p, method))
}

/// `E[(Σ_i Z_i²·h)^{p/2}]^{1/p}` over all steps of `z`.
pub fn hp_norm(lattice: &BinomialLattice, z: &LatticeProcess, p: f64, mode: NormMode) -> Result<NormEntry> {
    hp_norm_window(lattice, z, p, 0, z.last_step() + 1, mode)
}

/// H^p restricted to steps `start..end` (the integral over `[t_start, t_end]`).
pub fn hp_norm_window(
    lattice: &BinomialLattice,
    z: &LatticeProcess,
    p: f64,
    start: usize,
    end: usize,
    mode: NormMode,
) -> Result<NormEntry> {
    check_exponent(p)?;
    if end == start {
        return Ok(NormEntry::exact(0.0));
    }
    check_window(lattice, z, start, end - 1)?;
    let h = lattice.h();
    if p == 2.0 && mode != NormMode::Augmented {
        let mean: f64 = (start..end)
            .map(|i| h * lattice.expect_slice(&z.slice(i).iter().map(|v| v * v).collect::<Vec<_>>(), i))
            .sum();
        return Ok(root_entry(mean, None, p, NormMethod::Exact));
    }
    let est = expect_over_paths(lattice, mode.path_mode(lattice.steps())?, 1, |nodes, out| {
        let q: f64 = (start..end).map(|i| z.get(i, nodes[i]).powi(2)).sum::<f64>() * h;
        out[0] = q.powf(0.5 * p);
    })?;
    let (mean, se, method) = estimate_entry(&est, 0);
    Ok(root_entry(mean, se, p, method))
}

/// `E[(X*)^β]^{1/β}`; for `β < 1` this is the metric of the β-regime.
pub fn beta_metric(lattice: &BinomialLattice, x: &LatticeProcess, beta: f64, mode: NormMode) -> Result<NormEntry> {
    sp_norm(lattice, x, beta, mode)
}

/// S^p distance between the path-dependent processes `K = Σ ΔK`.
pub fn k_sp_distance(
    lattice: &BinomialLattice,
    dk_a: &LatticeProcess,
    dk_b: &LatticeProcess,
    p: f64,
    mode: NormMode,
) -> Result<NormEntry> {
    check_exponent(p)?;
    let diff = dk_a.zip_with(dk_b, |a, b| a - b)?;
    if diff.slices().iter().flatten().all(|&v| v == 0.0) {
        return Ok(NormEntry::exact(0.0));
    }
    let last = diff.last_step();
    let est = expect_over_paths(lattice, mode.path_mode(lattice.steps())?, 1, |nodes, out| {
        let mut acc = 0.0_f64;
        let mut m = 0.0_f64;
        for (i, &j) in nodes.iter().enumerate().take(last + 1) {
            acc += diff.get(i, j);
            m = m.max(acc.abs());
        }
        out[0] = m.powf(p);
    })?;
    let (mean, se, method) = estimate_entry(&est, 0);
    Ok(root_entry(mean, se, p, method))
}

/// `sup_σ E|Y_σ|` over lattice stopping times, via the Snell envelope of `|Y|`.
pub fn d_norm(lattice: &BinomialLattice, y: &LatticeProcess) -> Result<f64> {
    let n = lattice.steps();
    if !y.conforms_to(lattice, n) {
        return Err(Error::LatticeMismatch);
    }
    let mut s: Vec<f64> = y.slice(n).iter().map(|v| v.abs()).collect();
    for i in (0..n).rev() {
        let cont = cond_expect_slice(&s);
        s = y.slice(i).iter().zip(cont).map(|(v, c)| v.abs().max(c)).collect();
    }
    Ok(s[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::enumerate_paths;
    use approx::assert_relative_eq;

    fn lat(n: usize) -> BinomialLattice {
        BinomialLattice::new(1.0, n).unwrap()
    }

    fn w(l: &BinomialLattice) -> LatticeProcess {
        LatticeProcess::from_fn(l.steps(), |i, j| l.node_value(i, j))
    }

    #[test]
    fn constant_process_norms() {
        let l = lat(6);
        let c = LatticeProcess::constant(6, -1.5);
        for p in [0.5, 1.0, 2.0, 3.0] {
            for mode in [NormMode::default(), NormMode::Augmented, NormMode::Enumerate { cap: 20 }] {
                assert_relative_eq!(sp_norm(&l, &c, p, mode).unwrap().value, 1.5, max_relative = 1e-14);
            }
        }
        let one = LatticeProcess::constant(5, 1.0);
        for p in [1.0, 1.5, 2.0] {
            assert_relative_eq!(hp_norm(&l, &one, p, NormMode::default()).unwrap().value, 1.0, max_relative = 1e-14);
        }
        let zero = LatticeProcess::constant(5, 0.0);
        assert_eq!(hp_norm(&l, &zero, 1.5, NormMode::default()).unwrap().value, 0.0);
        assert_eq!(d_norm(&l, &c).unwrap(), 1.5);
    }

    #[test]
    fn sup_of_w_on_three_steps() {
        // Hand enumeration with √h = 1/√3: max|W| over the 8 paths is
        // 3,2,1,1,1,1,2,3 units, so E[max²] = (9+4+1+1+1+1+4+9)/8 · h.
        let l = lat(3);
        let expected = (30.0 / 8.0 / 3.0_f64).sqrt();
        for mode in [NormMode::Augmented, NormMode::Enumerate { cap: 20 }] {
            let e = sp_norm(&l, &w(&l), 2.0, mode).unwrap();
            assert_relative_eq!(e.value, expected, max_relative = 1e-14);
            assert!(e.stderr.is_none());
        }
    }

    #[test]
    fn sampled_agrees_with_enumeration() {
        let l = lat(12);
        let x = w(&l);
        let exact = sp_norm(&l, &x, 2.0, NormMode::Enumerate { cap: 20 }).unwrap();
        let s = sp_norm(&l, &x, 2.0, NormMode::Sampled { count: 40_000, seed: 3 }).unwrap();
        assert!((s.value - exact.value).abs() <= 4.0 * s.stderr.unwrap());
        let exact_h = hp_norm(&l, &x.map(|v| v), 1.5, NormMode::Enumerate { cap: 20 }).unwrap();
        let s_h = hp_norm(&l, &x, 1.5, NormMode::Sampled { count: 40_000, seed: 5 }).unwrap();
        assert!((s_h.value - exact_h.value).abs() <= 4.0 * s_h.stderr.unwrap());
    }

    #[test]
    fn hp_exact_matches_enumeration_at_two() {
        let l = lat(10);
        let z = w(&l);
        let a = hp_norm(&l, &z, 2.0, NormMode::default()).unwrap();
        assert_eq!(a.method, NormMethod::Exact);
        let b = hp_norm(&l, &z, 2.0, NormMode::Enumerate { cap: 20 }).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-12);
    }

    #[test]
    fn beta_family_is_monotone() {
        let l = lat(10);
        let x = w(&l);
        let vals: Vec<f64> = [0.25, 0.5, 0.75, 1.0, 2.0]
            .iter()
            .map(|&b| beta_metric(&l, &x, b, NormMode::default()).unwrap().value)
            .collect();
        assert!(vals.windows(2).all(|v| v[0] <= v[1]), "{vals:?}");
    }

    /// Exhaustive search over stopping rules on the path tree.
    fn best_stop(l: &BinomialLattice, y: &LatticeProcess, i: usize, j: usize) -> f64 {
        let now = y.get(i, j).abs();
        if i == l.steps() {
            return now;
        }
        let cont = 0.5 * (best_stop(l, y, i + 1, j) + best_stop(l, y, i + 1, j + 1));
        now.max(cont)
    }

    #[test]
    fn d_norm_matches_stopping_search() {
        let l = lat(8);
        let x = w(&l);
        let d = d_norm(&l, &x).unwrap();
        assert_relative_eq!(d, best_stop(&l, &x, 0, 0), max_relative = 1e-14);
        let terminal: f64 = enumerate_paths(&l, 20)
            .unwrap()
            .map(|(path, pr)| pr * x.get(8, path.nodes[8]).abs())
            .sum();
        assert!(d >= terminal * (1.0 - 1e-14));
        // |W| is a submartingale: stopping at T is optimal.
        let abs_w = x.map(f64::abs);
        assert_relative_eq!(d_norm(&l, &abs_w).unwrap(), terminal, max_relative = 1e-14);
    }

    #[test]
    fn k_distance_of_identical_increments_is_zero() {
        let l = lat(30);
        let dk = LatticeProcess::from_fn(29, |i, j| (i + j) as f64);
        assert_eq!(k_sp_distance(&l, &dk, &dk, 2.0, NormMode::default()).unwrap().value, 0.0);
    }

    #[test]
    fn k_distance_of_constant_increment() {
        let l = lat(4);
        let a = LatticeProcess::constant(3, 0.5);
        let b = LatticeProcess::constant(3, 0.0);
        let d = k_sp_distance(&l, &a, &b, 2.0, NormMode::default()).unwrap();
        assert_relative_eq!(d.value, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn windows_and_errors() {
        let l = lat(6);
        let x = w(&l);
        let full = sp_norm(&l, &x, 2.0, NormMode::Augmented).unwrap().value;
        let part = sp_norm_window(&l, &x, 2.0, 0, 3, NormMode::Augmented).unwrap().value;
        assert!(part <= full);
        assert_eq!(sp_norm_window(&l, &x, 2.0, 0, 0, NormMode::Augmented).unwrap().value, 0.0);
        assert!(sp_norm(&l, &x, 0.0, NormMode::default()).is_err());
        assert!(sp_norm_window(&l, &x, 2.0, 4, 2, NormMode::default()).is_err());
        assert!(hp_norm(&l, &x, 1.5, NormMode::Augmented).is_err());
        let big = lat(25);
        assert!(matches!(
            sp_norm(&big, &w(&big), 2.0, NormMode::Enumerate { cap: 20 }),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn auto_falls_back_to_sampling() {
        let l = lat(40);
        let x = LatticeProcess::from_fn(40, |i, j| ((i * 7 + j * 13) % 17) as f64 + 1e-3 * i as f64);
        let a = sp_norm(&l, &x, 2.0, NormMode::Auto { count: 1000, seed: 1 }).unwrap();
        assert!(a.value > 0.0);
        assert_eq!(a.stderr.is_some(), !a.method.is_exact());
    }
}
