use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BinomialLattice;
use crate::error::{Error, Result};

/// Largest step count for which all `2^N` paths are enumerated.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// One lattice path: the node index `j` at each step `0..=N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticePath {
    pub nodes: Vec<usize>,
}

impl LatticePath {
    /// Path whose `k`-th move is up iff bit `k` of `mask` is set.
    pub fn from_mask(mask: u64, steps: usize) -> Self {
        let mut nodes = Vec::with_capacity(steps + 1);
        fill_nodes_from_mask(mask, steps, &mut nodes);
        Self { nodes }
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    /// W-values along the path.
    pub fn w_values(&self, lattice: &BinomialLattice) -> Vec<f64> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, &j)| lattice.node_value(i, j))
            .collect()
    }
}

fn fill_nodes_from_mask(mask: u64, steps: usize, nodes: &mut Vec<usize>) {
    nodes.clear();
    nodes.push(0);
    let mut j = 0;
    for k in 0..steps {
        j += ((mask >> k) & 1) as usize;
        nodes.push(j);
    }
}

/// How path functionals are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PathMode {
    /// All `2^N` paths with probability `2^-N` each.
    Enumerate { cap: usize },
    /// `count` i.i.d. paths drawn from a ChaCha stream seeded with `seed`.
    Sampled { count: usize, seed: u64 },
}

impl PathMode {
    pub fn enumerate() -> Self {
        PathMode::Enumerate {
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    /// Enumeration when the lattice is small enough, otherwise a fixed-seed
    /// sample.
    pub fn auto(steps: usize, count: usize, seed: u64) -> Self {
        if steps <= DEFAULT_ENUMERATION_CAP {
            Self::enumerate()
        } else {
            PathMode::Sampled { count, seed }
        }
    }
}

/// Iterator over every path of an `N`-step lattice.
pub struct PathEnumerator {
    steps: usize,
    next: u64,
    end: u64,
}

impl Iterator for PathEnumerator {
    type Item = (LatticePath, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next == self.end {
            return None;
        }
        let mask = self.next;
        self.next += 1;
        let prob = 0.5_f64.powi(self.steps as i32);
        Some((LatticePath::from_mask(mask, self.steps), prob))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

/// All `2^N` paths with their (equal) probabilities.
pub fn enumerate_paths(lattice: &BinomialLattice, cap: usize) -> Result<PathEnumerator> {
    let steps = lattice.steps();
    check_cap(steps, cap)?;
    Ok(PathEnumerator {
        steps,
        next: 0,
        end: 1u64 << steps,
    })
}

fn check_cap(steps: usize, cap: usize) -> Result<()> {
    if steps > cap || steps > 62 {
        return Err(Error::EnumerationCap { steps, cap });
    }
    Ok(())
}

/// A reproducible i.i.d. sample of lattice paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub paths: Vec<LatticePath>,
    pub seed: u64,
}

pub fn sample_paths(lattice: &BinomialLattice, count: usize, seed: u64) -> Result<PathSample> {
    if count == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = lattice.steps();
    let paths = (0..count)
        .map(|_| {
            let mut nodes = Vec::with_capacity(steps + 1);
            nodes.push(0);
            let mut j = 0;
            let mut bits = 0u64;
            for k in 0..steps {
                if k % 64 == 0 {
                    bits = rng.gen();
                }
                j += (bits & 1) as usize;
                bits >>= 1;
                nodes.push(j);
            }
            LatticePath { nodes }
        })
        .collect();
    Ok(PathSample { paths, seed })
}

/// Means of several path functionals, with standard errors when sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEstimate {
    pub means: Vec<f64>,
    /// `None` for exact enumeration.
    pub stderrs: Option<Vec<f64>>,
    pub mode: PathMode,
}

/// Averages a vector-valued path functional. `f` receives the node indices
/// of one path and writes `width` values into the output buffer.
pub fn expect_over_paths(
    lattice: &BinomialLattice,
    mode: PathMode,
    width: usize,
    mut f: impl FnMut(&[usize], &mut [f64]),
) -> Result<PathEstimate> {
    let mut out = vec![0.0; width];
    match mode {
        PathMode::Enumerate { cap } => {
            let steps = lattice.steps();
            check_cap(steps, cap)?;
            let mut sums = vec![0.0; width];
            let mut nodes = Vec::with_capacity(steps + 1);
            for mask in 0..(1u64 << steps) {
                fill_nodes_from_mask(mask, steps, &mut nodes);
                f(&nodes, &mut out);
                for (s, v) in sums.iter_mut().zip(&out) {
                    *s += v;
                }
            }
            let weight = 0.5_f64.powi(steps as i32);
            Ok(PathEstimate {
                means: sums.into_iter().map(|s| s * weight).collect(),
                stderrs: None,
                mode,
            })
        }
        PathMode::Sampled { count, seed } => {
            let sample = sample_paths(lattice, count, seed)?;
            // Welford accumulation per component.
            let mut mean = vec![0.0; width];
            let mut m2 = vec![0.0; width];
            for (k, path) in sample.paths.iter().enumerate() {
                f(&path.nodes, &mut out);
                let n = (k + 1) as f64;
                for c in 0..width {
                    let delta = out[c] - mean[c];
                    mean[c] += delta / n;
                    m2[c] += delta * (out[c] - mean[c]);
                }
            }
            let n = count as f64;
            let stderrs = m2
                .iter()
                .map(|m| {
                    if count > 1 {
                        (m / (n - 1.0) / n).sqrt()
                    } else {
                        f64::INFINITY
                    }
                })
                .collect();
            Ok(PathEstimate {
                means: mean,
                stderrs: Some(stderrs),
                mode,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_has_two_paths() {
        let l = BinomialLattice::new(1.0, 1).unwrap();
        let paths: Vec<_> = enumerate_paths(&l, 20).unwrap().collect();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|(_, p)| *p == 0.5));
    }

    #[test]
    fn three_steps_eight_paths() {
        let l = BinomialLattice::new(1.0, 3).unwrap();
        let paths: Vec<_> = enumerate_paths(&l, 20).unwrap().collect();
        assert_eq!(paths.len(), 8);
        let total: f64 = paths.iter().map(|(_, p)| p).sum();
        assert_eq!(total, 1.0);
        assert!(paths.iter().all(|(_, p)| *p == 0.125));
        // Every path is a valid walk.
        for (path, _) in &paths {
            for w in path.nodes.windows(2) {
                assert!(w[1] == w[0] || w[1] == w[0] + 1);
            }
        }
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let l = BinomialLattice::new(1.0, 21).unwrap();
        assert!(matches!(
            enumerate_paths(&l, DEFAULT_ENUMERATION_CAP),
            Err(Error::EnumerationCap { .. })
        ));
        assert!(expect_over_paths(&l, PathMode::enumerate(), 1, |_, _| {}).is_err());
    }

    #[test]
    fn enumeration_reproduces_node_marginals() {
        let l = BinomialLattice::new(1.0, 9).unwrap();
        let est = expect_over_paths(&l, PathMode::enumerate(), 10, |nodes, out| {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[nodes[9]] = 1.0;
        })
        .unwrap();
        for j in 0..=9 {
            assert_eq!(est.means[j], l.prob(9, j));
        }
        assert!(est.stderrs.is_none());
    }

    #[test]
    fn sampling_is_deterministic() {
        let l = BinomialLattice::new(1.0, 70).unwrap();
        let a = sample_paths(&l, 50, 7).unwrap();
        let b = sample_paths(&l, 50, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_paths(&l, 50, 8).unwrap();
        assert_ne!(a, c);
        assert!(sample_paths(&l, 0, 7).is_err());
    }

    #[test]
    fn sampled_terminal_mean_is_centered() {
        let l = BinomialLattice::new(1.0, 20).unwrap();
        let est = expect_over_paths(
            &l,
            PathMode::Sampled {
                count: 100_000,
                seed: 11,
            },
            1,
            |nodes, out| out[0] = l.node_value(20, nodes[20]),
        )
        .unwrap();
        let se = est.stderrs.unwrap()[0];
        assert!(est.means[0].abs() <= 4.0 * se, "{} vs {}", est.means[0], se);
    }
}
