use serde::{Deserialize, Serialize};

use super::{BinomialLattice, LatticeProcess};
use crate::error::{Error, Result};

/// Default cap on the number of `(node, running max)` states per step.
pub const DEFAULT_STATE_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotonicity {
    Nondecreasing,
    Nonincreasing,
}

impl Monotonicity {
    fn name(self) -> &'static str {
        match self {
            Monotonicity::Nondecreasing => "nondecreasing in the node value",
            Monotonicity::Nonincreasing => "nonincreasing in the node value",
        }
    }
}

/// One joint state: node index, running maximum of the functional so far,
/// and its probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugState {
    pub node: usize,
    pub max: f64,
    pub prob: f64,
}

/// Joint law of `(W-node, sup_{k ≤ i} G(k, j_k))` at every step.
///
/// States are merged on exact equality of the running maximum, so the law is
/// exact for any node functional. A monotone, time-homogeneous `G` keeps the
/// count at O(i²) per step.
#[derive(Debug, Clone)]
pub struct AugmentedLattice {
    states: Vec<Vec<AugState>>,
}

impl AugmentedLattice {
    pub fn build(
        lattice: &BinomialLattice,
        g: &LatticeProcess,
        declared: Option<Monotonicity>,
    ) -> Result<Self> {
        Self::build_with_budget(lattice, g, declared, DEFAULT_STATE_BUDGET)
    }

    pub fn build_with_budget(
        lattice: &BinomialLattice,
        g: &LatticeProcess,
        declared: Option<Monotonicity>,
        budget: usize,
    ) -> Result<Self> {
        let steps = lattice.steps();
        if g.last_step() != steps {
            return Err(Error::LatticeMismatch);
        }
        if let Some(m) = declared {
            check_monotone(g, m)?;
        }
        let mut states = Vec::with_capacity(steps + 1);
        states.push(vec![AugState {
            node: 0,
            max: g.get(0, 0),
            prob: 1.0,
        }]);
        for i in 0..steps {
            let next_g = g.slice(i + 1);
            let mut cand: Vec<AugState> = Vec::with_capacity(states[i].len() * 2);
            for s in &states[i] {
                for node in [s.node, s.node + 1] {
                    cand.push(AugState {
                        node,
                        max: s.max.max(next_g[node]),
                        prob: 0.5 * s.prob,
                    });
                }
            }
            // Stable sort keeps source order within equal keys, so merged
            // probabilities are summed in a fixed order.
            cand.sort_by(|a, b| a.node.cmp(&b.node).then(a.max.total_cmp(&b.max)));
            let mut merged: Vec<AugState> = Vec::with_capacity(cand.len());
            for c in cand {
                match merged.last_mut() {
                    Some(last) if last.node == c.node && last.max == c.max => last.prob += c.prob,
                    _ => merged.push(c),
                }
            }
            if merged.len() > budget {
                return Err(Error::StateBudget {
                    states: merged.len(),
                    step: i + 1,
                });
            }
            states.push(merged);
        }
        Ok(Self { states })
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn states(&self, i: usize) -> &[AugState] {
        &self.states[i]
    }

    pub fn state_count(&self, i: usize) -> usize {
        self.states[i].len()
    }

    /// Marginal law of the W-node at step `i`.
    pub fn node_marginal(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; i + 1];
        for s in &self.states[i] {
            out[s.node] += s.prob;
        }
        out
    }

    /// Law of the running maximum at step `i`, sorted by value.
    pub fn max_distribution(&self, i: usize) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self.states[i].iter().map(|s| (s.max, s.prob)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (v, p) in pairs {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => out.push((v, p)),
            }
        }
        out
    }

    /// `E[φ(node, running max)]` at step `i`.
    pub fn expect(&self, i: usize, phi: impl Fn(usize, f64) -> f64) -> f64 {
        self.states[i].iter().map(|s| s.prob * phi(s.node, s.max)).sum()
    }
}

/// Checks a declared monotonicity in the node index at every step.
pub fn check_monotone(g: &LatticeProcess, m: Monotonicity) -> Result<()> {
    for (i, slice) in g.slices().iter().enumerate() {
        for j in 0..slice.len().saturating_sub(1) {
            let ok = match m {
                Monotonicity::Nondecreasing => slice[j] <= slice[j + 1],
                Monotonicity::Nonincreasing => slice[j] >= slice[j + 1],
            };
            if !ok {
                return Err(Error::NonMonotone {
                    declared: m.name(),
                    step: i,
                    node: j,
                    next: j + 1,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_paths, DEFAULT_ENUMERATION_CAP};

    fn w_process(l: &BinomialLattice) -> LatticeProcess {
        LatticeProcess::from_fn(l.steps(), |i, j| l.node_value(i, j))
    }

    #[test]
    fn one_step_running_max_of_w() {
        let l = BinomialLattice::new(1.0, 1).unwrap();
        let aug = AugmentedLattice::build(&l, &w_process(&l), Some(Monotonicity::Nondecreasing)).unwrap();
        assert_eq!(aug.max_distribution(1), vec![(0.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn two_step_running_max_of_w() {
        let l = BinomialLattice::new(1.0, 2).unwrap();
        let s = l.sqrt_h();
        let aug = AugmentedLattice::build(&l, &w_process(&l), Some(Monotonicity::Nondecreasing)).unwrap();
        // Paths: dd -> 0, du -> 0, ud -> s, uu -> 2s.
        assert_eq!(
            aug.max_distribution(2),
            vec![(0.0, 0.5), (s, 0.25), (2.0 * s, 0.25)]
        );
        assert_eq!(aug.node_marginal(2), l.probs(2).to_vec());
    }

    #[test]
    fn constant_functional_has_single_max_state() {
        let l = BinomialLattice::new(1.0, 6).unwrap();
        let g = LatticeProcess::constant(6, 3.0);
        let aug = AugmentedLattice::build(&l, &g, Some(Monotonicity::Nondecreasing)).unwrap();
        for i in 0..=6 {
            assert_eq!(aug.max_distribution(i), vec![(3.0, 1.0)]);
            assert_eq!(aug.state_count(i), i + 1);
        }
    }

    #[test]
    fn declared_monotonicity_is_probed() {
        let l = BinomialLattice::new(1.0, 4).unwrap();
        let g = LatticeProcess::from_fn(4, |i, j| l.node_value(i, j).abs());
        let err = AugmentedLattice::build(&l, &g, Some(Monotonicity::Nondecreasing)).unwrap_err();
        assert!(matches!(err, Error::NonMonotone { .. }));
        assert!(AugmentedLattice::build(&l, &g, None).is_ok());
    }

    #[test]
    fn state_budget_is_enforced() {
        let l = BinomialLattice::new(1.0, 8).unwrap();
        let err = AugmentedLattice::build_with_budget(&l, &w_process(&l), None, 5).unwrap_err();
        assert!(matches!(err, Error::StateBudget { .. }));
    }

    #[test]
    fn matches_enumeration_for_running_max() {
        for n in [3usize, 7, 12] {
            let l = BinomialLattice::new(1.0, n).unwrap();
            let g = LatticeProcess::from_fn(n, |i, j| l.node_value(i, j).abs());
            let aug = AugmentedLattice::build(&l, &g, None).unwrap();
            let mut exact: Vec<(f64, f64)> = Vec::new();
            for (path, p) in enumerate_paths(&l, DEFAULT_ENUMERATION_CAP).unwrap() {
                let m = g.along(&path.nodes).fold(f64::NEG_INFINITY, f64::max);
                exact.push((m, p));
            }
            exact.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut merged: Vec<(f64, f64)> = Vec::new();
            for (v, p) in exact {
                match merged.last_mut() {
                    Some(last) if last.0 == v => last.1 += p,
                    _ => merged.push((v, p)),
                }
            }
            // Dyadic probabilities: both sides are exact.
            assert_eq!(aug.max_distribution(n), merged, "N = {n}");
        }
    }
}
