//! Exact discrete model of a one-dimensional Brownian motion.
//!
//! The lattice is the recombining symmetric random walk with increments
//! `±√h`, each with probability 1/2. Node `(i, j)` sits at step `i` with `j`
//! up-moves, so its W-value is `(2j − i)·√h`. On this model conditional
//! expectations are two-point averages, `(ΔW)² = h` holds exactly, and every
//! adapted quantity is a node function or a functional of the path.

mod augmented;
mod paths;

pub use augmented::{check_monotone, AugState, AugmentedLattice, Monotonicity, DEFAULT_STATE_BUDGET};
pub use paths::{
    enumerate_paths, expect_over_paths, sample_paths, LatticePath, PathEstimate, PathMode,
    PathSample, DEFAULT_ENUMERATION_CAP,
};

use crate::error::{Error, Result};

/// Uniform partition of `[0, T]` into `N` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    h: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("step count must be at least 1".into()));
        }
        Ok(Self {
            horizon,
            steps,
            h: horizon / steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Grid time `t_i = i·h`; the last point is pinned to `T`.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.h
        }
    }
}

/// Recombining binomial model of W on a [`TimeGrid`].
#[derive(Debug, Clone)]
pub struct BinomialLattice {
    grid: TimeGrid,
    sqrt_h: f64,
    probs: Vec<Vec<f64>>,
}

impl BinomialLattice {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        let grid = TimeGrid::new(horizon, steps)?;
        // Pascal's rule with halving: every entry is C(i, j) / 2^i, formed from
        // sums of positive terms only.
        let mut probs = Vec::with_capacity(steps + 1);
        probs.push(vec![1.0]);
        for i in 1..=steps {
            let prev: &Vec<f64> = &probs[i - 1];
            let mut row = vec![0.0; i + 1];
            row[0] = prev[0] * 0.5;
            row[i] = prev[i - 1] * 0.5;
            for j in 1..i {
                row[j] = (prev[j - 1] + prev[j]) * 0.5;
            }
            probs.push(row);
        }
        Ok(Self {
            grid,
            sqrt_h: grid.h().sqrt(),
            probs,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.grid.steps
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn sqrt_h(&self) -> f64 {
        self.sqrt_h
    }

    pub fn time(&self, i: usize) -> f64 {
        self.grid.time(i)
    }

    /// W-value at node `(i, j)`.
    pub fn node_value(&self, i: usize, j: usize) -> f64 {
        (2.0 * j as f64 - i as f64) * self.sqrt_h
    }

    /// Probability of reaching node `(i, j)` from the root.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.probs[i][j]
    }

    pub fn probs(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    /// `E[X_{i+1} | F_{t_i}]` for a slice living on step `i + 1`.
    pub fn cond_expect(&self, next: &[f64], i: usize) -> Result<Vec<f64>> {
        if i >= self.steps() {
            return Err(Error::StepOutOfRange {
                step: i,
                steps: self.steps(),
            });
        }
        if next.len() != i + 2 {
            return Err(Error::LatticeMismatch);
        }
        Ok(cond_expect_slice(next))
    }

    /// Expectation of a node function at step `i`.
    pub fn expect_slice(&self, values: &[f64], i: usize) -> f64 {
        debug_assert_eq!(values.len(), i + 1);
        values
            .iter()
            .zip(&self.probs[i])
            .map(|(v, p)| v * p)
            .sum()
    }

    /// Same horizon and step count.
    pub fn same_shape(&self, other: &BinomialLattice) -> bool {
        self.grid == other.grid
    }
}

/// Two-point average `(next[j + 1] + next[j]) / 2` for every node of the
/// earlier slice.
pub(crate) fn cond_expect_slice(next: &[f64]) -> Vec<f64> {
    next.windows(2).map(|w| 0.5 * (w[1] + w[0])).collect()
}

/// A real value per lattice node for steps `0..=last_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeProcess {
    slices: Vec<Vec<f64>>,
}

impl LatticeProcess {
    /// Tabulates `f(i, j)` on steps `0..=last_step`.
    pub fn from_fn(last_step: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let slices = (0..=last_step)
            .map(|i| (0..=i).map(|j| f(i, j)).collect())
            .collect();
        Self { slices }
    }

    pub fn constant(last_step: usize, c: f64) -> Self {
        Self::from_fn(last_step, |_, _| c)
    }

    /// Builds from explicit slices; slice `i` must have `i + 1` entries.
    pub fn from_slices(slices: Vec<Vec<f64>>) -> Result<Self> {
        for (i, s) in slices.iter().enumerate() {
            if s.len() != i + 1 {
                return Err(Error::InvalidParameter(format!(
                    "slice {i} has {} values, expected {}",
                    s.len(),
                    i + 1
                )));
            }
        }
        if slices.is_empty() {
            return Err(Error::InvalidParameter("process needs at least one slice".into()));
        }
        Ok(Self { slices })
    }

    pub fn last_step(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slices[i][j]
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        &self.slices[i]
    }

    pub fn slices(&self) -> &[Vec<f64>] {
        &self.slices
    }

    pub(crate) fn slice_mut(&mut self, i: usize) -> &mut Vec<f64> {
        &mut self.slices[i]
    }

    /// Node-wise `f(self, other)` over the common steps.
    pub fn zip_with(&self, other: &LatticeProcess, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.last_step() != other.last_step() {
            return Err(Error::LatticeMismatch);
        }
        let slices = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            .collect();
        Ok(Self { slices })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            slices: self
                .slices
                .iter()
                .map(|s| s.iter().map(|v| f(*v)).collect())
                .collect(),
        }
    }

    /// Largest `|self − other|` over all nodes.
    pub fn max_abs_diff(&self, other: &LatticeProcess) -> Result<f64> {
        let d = self.zip_with(other, |a, b| (a - b).abs())?;
        Ok(d.slices
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(*v)))
    }

    /// True when the process has exactly one value per node of `lattice` on
    /// steps `0..=last_step`.
    pub fn conforms_to(&self, lattice: &BinomialLattice, last_step: usize) -> bool {
        self.last_step() == last_step && last_step <= lattice.steps()
    }

    /// Values along a path given as node indices per step.
    pub fn along<'a>(&'a self, nodes: &'a [usize]) -> impl Iterator<Item = f64> + 'a {
        self.slices
            .iter()
            .zip(nodes)
            .map(|(s, &j)| s[j])
    }
}
