//! Problem data: terminal value, generator with declared constants, obstacle.

mod generator;
pub mod scenario;
mod validate;

use std::fmt;
use std::sync::Arc;

pub use generator::{DriverFn, Generator, GrowthHints, H5Params, NodeFn};
pub use scenario::{scenario, ScenarioParams, CATALOG};
pub use validate::{
    validate_assumptions, AssumptionEntry, AssumptionReport, ProbeConfig, ProbeStatus, Witness,
};

use crate::error::{Error, Result};
use crate::lattice::{check_monotone, AugmentedLattice, BinomialLattice, LatticeProcess, Monotonicity};

/// Lower barrier for Y.
#[derive(Clone)]
pub enum Obstacle {
    /// No reflection; the reflected solvers reduce to the plain BSDE.
    NegInfinity,
    Constant(f64),
    Node {
        func: Arc<NodeFn>,
        monotone: Option<Monotonicity>,
    },
}

impl fmt::Debug for Obstacle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obstacle::NegInfinity => write!(f, "NegInfinity"),
            Obstacle::Constant(c) => write!(f, "Constant({c})"),
            Obstacle::Node { monotone, .. } => f
                .debug_struct("Node")
                .field("monotone", monotone)
                .finish_non_exhaustive(),
        }
    }
}

impl Obstacle {
    pub fn node(
        monotone: Option<Monotonicity>,
        func: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Obstacle::Node {
            func: Arc::new(func),
            monotone,
        }
    }

    pub fn eval(&self, t: f64, w: f64) -> f64 {
        match self {
            Obstacle::NegInfinity => f64::NEG_INFINITY,
            Obstacle::Constant(c) => *c,
            Obstacle::Node { func, .. } => func(t, w),
        }
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, Obstacle::NegInfinity)
    }

    fn scaled(&self, a: f64) -> Self {
        match self {
            Obstacle::NegInfinity => Obstacle::NegInfinity,
            Obstacle::Constant(c) => {
                let c = *c;
                Obstacle::Node {
                    func: Arc::new(move |t, _| (a * t).exp() * c),
                    monotone: None,
                }
            }
            Obstacle::Node { func, monotone } => {
                let inner = Arc::clone(func);
                Obstacle::Node {
                    func: Arc::new(move |t, w| (a * t).exp() * inner(t, w)),
                    monotone: *monotone,
                }
            }
        }
    }

    fn offset(&self, delta: f64) -> Self {
        match self {
            Obstacle::NegInfinity => Obstacle::NegInfinity,
            Obstacle::Constant(c) => Obstacle::Constant(c + delta),
            Obstacle::Node { func, monotone } => {
                let inner = Arc::clone(func);
                Obstacle::Node {
                    func: Arc::new(move |t, w| inner(t, w) + delta),
                    monotone: *monotone,
                }
            }
        }
    }
}

/// Data `(ξ, f, L)` on a fixed lattice, plus the integrability exponent `p`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    lattice: Arc<BinomialLattice>,
    xi: Vec<f64>,
    generator: Generator,
    obstacle: Obstacle,
    obstacle_values: LatticeProcess,
    p: f64,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        lattice: Arc<BinomialLattice>,
        xi: Vec<f64>,
        generator: Generator,
        obstacle: Obstacle,
        p: f64,
    ) -> Result<Self> {
        let n = lattice.steps();
        if xi.len() != n + 1 {
            return Err(Error::InvalidParameter(format!(
                "terminal value has {} entries, lattice has {} terminal nodes",
                xi.len(),
                n + 1
            )));
        }
        if !(1.0..=2.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p must lie in [1, 2], got {p}")));
        }
        if !(generator.lambda >= 0.0) {
            return Err(Error::InvalidParameter("lambda must be nonnegative".into()));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("terminal value must be finite".into()));
        }
        let obstacle_values =
            LatticeProcess::from_fn(n, |i, j| obstacle.eval(lattice.time(i), lattice.node_value(i, j)));
        if let Obstacle::Node { monotone: Some(m), .. } = &obstacle {
            check_monotone(&obstacle_values, *m)?;
        }
        for (j, (&x, &l)) in xi.iter().zip(obstacle_values.slice(n)).enumerate() {
            if l > x + 1e-12 * (1.0 + x.abs()) {
                return Err(Error::ObstacleAboveTerminal {
                    node: j,
                    xi: x,
                    obstacle: l,
                });
            }
        }
        Ok(Self {
            name: name.into(),
            lattice,
            xi,
            generator,
            obstacle,
            obstacle_values,
            p,
        })
    }

    pub fn lattice(&self) -> &BinomialLattice {
        &self.lattice
    }

    pub fn lattice_arc(&self) -> Arc<BinomialLattice> {
        Arc::clone(&self.lattice)
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn obstacle(&self) -> &Obstacle {
        &self.obstacle
    }

    /// The obstacle tabulated on every node; `-inf` for the sentinel.
    pub fn obstacle_values(&self) -> &LatticeProcess {
        &self.obstacle_values
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Problem::new(
            self.name.clone(),
            self.lattice_arc(),
            self.xi.clone(),
            self.generator.clone(),
            self.obstacle.clone(),
            p,
        )
    }

    pub fn with_generator(&self, generator: Generator) -> Result<Self> {
        Problem::new(
            self.name.clone(),
            self.lattice_arc(),
            self.xi.clone(),
            generator,
            self.obstacle.clone(),
            self.p,
        )
    }

    /// Same data without reflection.
    pub fn without_obstacle(&self) -> Self {
        let n = self.lattice.steps();
        Self {
            obstacle: Obstacle::NegInfinity,
            obstacle_values: LatticeProcess::constant(n, f64::NEG_INFINITY),
            ..self.clone()
        }
    }

    /// Shifted data `ξ + dξ`, `f + df`, `L + dL`. The terminal value is
    /// raised to the new obstacle where needed, so nonnegative offsets give
    /// ordered data.
    pub fn perturbed(&self, xi_offset: f64, driver_offset: f64, obstacle_offset: f64) -> Result<Self> {
        let obstacle = self.obstacle.offset(obstacle_offset);
        let n = self.lattice.steps();
        let t = self.lattice.horizon();
        let xi = self
            .xi
            .iter()
            .enumerate()
            .map(|(j, x)| (x + xi_offset).max(obstacle.eval(t, self.lattice.node_value(n, j))))
            .collect();
        Problem::new(
            self.name.clone(),
            self.lattice_arc(),
            xi,
            self.generator.offset(driver_offset),
            obstacle,
            self.p,
        )
    }

    /// Exponential change of variables `Ỹ_t = e^{at} Y_t`.
    ///
    /// The transformed generator is `f̃(t,y,z) = e^{at} f(t, e^{-at}y, e^{-at}z) − a·y`,
    /// whose monotonicity constant is `μ − a`; `ξ̃ = e^{aT}ξ` and `L̃_t = e^{at}L_t`.
    pub fn exp_shift(&self, a: f64) -> Result<Self> {
        if a == 0.0 {
            return Ok(self.clone());
        }
        let inner = self.generator.func();
        let g = &self.generator;
        let horizon = self.lattice.horizon();
        let growth_factor = (a.abs() * horizon).exp();
        let mut shifted = Generator::new(g.mu - a, g.lambda, g.depends_on_z, move |t, w, y, z| {
            let e = (a * t).exp();
            e * inner(t, w, y / e, z / e) - a * y
        });
        shifted.h5 = g.h5.as_ref().map(|h5| H5Params {
            gamma: h5.gamma * growth_factor.powf(1.0 + h5.alpha),
            alpha: h5.alpha,
            g: Arc::clone(&h5.g),
        });
        shifted.growth.lipschitz_y = g.growth.lipschitz_y.map(|c| c + a.abs());
        let scale_t = (a * horizon).exp();
        Problem::new(
            format!("{}~shift({a})", self.name),
            self.lattice_arc(),
            self.xi.iter().map(|x| scale_t * x).collect(),
            shifted,
            self.obstacle.scaled(a),
            self.p,
        )
    }

    /// Multiplies a process by `e^{-at_i}` to undo [`Problem::exp_shift`].
    pub fn unshift(&self, a: f64, shifted: &LatticeProcess) -> LatticeProcess {
        let mut out = shifted.clone();
        for i in 0..=shifted.last_step() {
            let e = (-a * self.lattice.time(i)).exp();
            out.slice_mut(i).iter_mut().for_each(|v| *v *= e);
        }
        out
    }

    /// Tabulates `expr(t, w)` on every node.
    pub fn lift_to_lattice(&self, expr: impl Fn(f64, f64) -> f64) -> LatticeProcess {
        let l = &self.lattice;
        LatticeProcess::from_fn(l.steps(), |i, j| expr(l.time(i), l.node_value(i, j)))
    }

    /// Joint law of the node and the running maximum of `expr(t, w)`.
    pub fn lift_running_max(
        &self,
        expr: impl Fn(f64, f64) -> f64,
        monotone: Option<Monotonicity>,
    ) -> Result<AugmentedLattice> {
        AugmentedLattice::build(&self.lattice, &self.lift_to_lattice(expr), monotone)
    }

    /// W-value tabulated on every node.
    pub fn w_process(&self) -> LatticeProcess {
        self.lift_to_lattice(|_, w| w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_paths, DEFAULT_ENUMERATION_CAP};

    fn lattice(n: usize) -> Arc<BinomialLattice> {
        Arc::new(BinomialLattice::new(1.0, n).unwrap())
    }

    #[test]
    fn rejects_obstacle_above_terminal() {
        let l = lattice(4);
        let err = Problem::new("x", l, vec![0.0; 5], Generator::zero(), Obstacle::Constant(1.0), 2.0)
            .unwrap_err();
        assert!(matches!(err, Error::ObstacleAboveTerminal { node: 0, .. }));
    }

    #[test]
    fn rejects_bad_shapes_and_exponents() {
        let l = lattice(4);
        assert!(Problem::new("x", l.clone(), vec![0.0; 4], Generator::zero(), Obstacle::NegInfinity, 2.0).is_err());
        assert!(Problem::new("x", l.clone(), vec![0.0; 5], Generator::zero(), Obstacle::NegInfinity, 2.5).is_err());
        assert!(Problem::new("x", l, vec![0.0; 5], Generator::zero(), Obstacle::NegInfinity, 0.5).is_err());
    }

    #[test]
    fn declared_obstacle_monotonicity_is_probed() {
        let l = lattice(4);
        let err = Problem::new(
            "x",
            l,
            vec![10.0; 5],
            Generator::zero(),
            Obstacle::node(Some(Monotonicity::Nondecreasing), |_, w: f64| w.abs()),
            2.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonMonotone { .. }));
    }

    #[test]
    fn zero_shift_is_identity() {
        let l = lattice(4);
        let p = Problem::new("x", l, vec![1.0; 5], Generator::linear(-0.5, 0.2, 1.0), Obstacle::Constant(0.5), 2.0)
            .unwrap();
        let s = p.exp_shift(0.0).unwrap();
        assert_eq!(s.xi(), p.xi());
        assert_eq!(s.generator().evaluate(0.3, 0.1, 2.0, 1.0), p.generator().evaluate(0.3, 0.1, 2.0, 1.0));
    }

    #[test]
    fn shift_by_mu_removes_linear_drift() {
        let mu = 0.7;
        let l = lattice(4);
        let p = Problem::new("x", l, vec![1.0; 5], Generator::linear(mu, 0.0, 0.0), Obstacle::NegInfinity, 2.0)
            .unwrap();
        let s = p.exp_shift(mu).unwrap();
        assert!((s.generator().mu).abs() < 1e-15);
        for &(t, y) in &[(0.0, 1.0), (0.5, -3.0), (1.0, 7.5)] {
            assert!(s.generator().evaluate(t, 0.0, y, 0.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_round_trip_reproduces_generator() {
        let l = lattice(4);
        let g = Generator::new(0.0, 0.3, true, |t, w, y, z| -y * y * y + 0.3 * z + t * w);
        let p = Problem::new("x", l, vec![1.0; 5], g, Obstacle::NegInfinity, 2.0).unwrap();
        for a in [-1.3, 0.4, 2.0] {
            let back = p.exp_shift(a).unwrap().exp_shift(-a).unwrap();
            for &(t, w, y, z) in &[(0.1, 0.2, 0.5, -1.0), (0.9, -1.0, 2.0, 3.0), (0.5, 0.0, -1.5, 0.25)] {
                let d = back.generator().evaluate(t, w, y, z) - p.generator().evaluate(t, w, y, z);
                assert!(d.abs() <= 1e-12, "a = {a}: {d}");
            }
        }
    }

    #[test]
    fn perturbation_keeps_terminal_above_obstacle() {
        let l = lattice(3);
        let p = Problem::new("x", l, vec![0.0; 4], Generator::zero(), Obstacle::Constant(0.0), 2.0).unwrap();
        let q = p.perturbed(0.0, 0.0, 0.1).unwrap();
        assert!(q.xi().iter().all(|&x| x == 0.1));
    }

    #[test]
    fn lifted_running_max_matches_enumeration() {
        let l = lattice(10);
        let p = Problem::new("x", l.clone(), vec![0.0; 11], Generator::zero(), Obstacle::NegInfinity, 2.0).unwrap();
        let aug = p.lift_running_max(|_, w| w.abs(), None).unwrap();
        let g = p.lift_to_lattice(|_, w| w.abs());
        let mut exact = vec![0.0; 11];
        for (path, prob) in enumerate_paths(&l, DEFAULT_ENUMERATION_CAP).unwrap() {
            let mut m = f64::NEG_INFINITY;
            for (i, v) in g.along(&path.nodes).enumerate() {
                m = m.max(v);
                exact[i] += prob * m;
            }
        }
        for (i, e) in exact.iter().enumerate() {
            let a = aug.expect(i, |_, m| m);
            assert!((a - e).abs() <= 1e-14, "step {i}: {a} vs {e}");
        }
        let ones = p.lift_to_lattice(|_, _| 1.0);
        assert!(ones.slices().iter().flatten().all(|&v| v == 1.0));
    }
}
