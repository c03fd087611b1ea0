use std::fmt;
use std::sync::Arc;

/// `f(t, w, y, z)`: time, W-node value, then the solution arguments.
pub type DriverFn = dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync;

/// A function of `(t, w)` only.
pub type NodeFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Sublinear z-growth bound `|f(t,y,z) − f(t,y,0)| ≤ γ(g_t + |y| + |z|)^α`.
#[derive(Clone)]
pub struct H5Params {
    pub gamma: f64,
    pub alpha: f64,
    pub g: Arc<NodeFn>,
}

impl fmt::Debug for H5Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("H5Params")
            .field("gamma", &self.gamma)
            .field("alpha", &self.alpha)
            .finish_non_exhaustive()
    }
}

/// Optional growth declarations checked as validator variants.
#[derive(Clone, Default)]
pub struct GrowthHints {
    /// `|f(t,y,z)| ≤ |f(t,0,z)| + φ(|y|)` with φ increasing.
    pub phi: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    /// Lipschitz constant in y.
    pub lipschitz_y: Option<f64>,
}

impl fmt::Debug for GrowthHints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrowthHints")
            .field("phi", &self.phi.as_ref().map(|_| "<fn>"))
            .field("lipschitz_y", &self.lipschitz_y)
            .finish()
    }
}

/// Generator together with its declared structural constants.
#[derive(Clone)]
pub struct Generator {
    func: Arc<DriverFn>,
    /// One-sided monotonicity constant in y.
    pub mu: f64,
    /// Lipschitz constant in z.
    pub lambda: f64,
    pub depends_on_z: bool,
    pub h5: Option<H5Params>,
    pub growth: GrowthHints,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Generator")
            .field("mu", &self.mu)
            .field("lambda", &self.lambda)
            .field("depends_on_z", &self.depends_on_z)
            .field("h5", &self.h5)
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl Generator {
    pub fn new(
        mu: f64,
        lambda: f64,
        depends_on_z: bool,
        func: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            func: Arc::new(func),
            mu,
            lambda,
            depends_on_z,
            h5: None,
            growth: GrowthHints::default(),
        }
    }

    /// `f ≡ 0`.
    pub fn zero() -> Self {
        Self::new(0.0, 0.0, false, |_, _, _, _| 0.0)
    }

    /// `f(t, y, z) = a·y + b·z + c`.
    pub fn linear(a: f64, b: f64, c: f64) -> Self {
        let mut g = Self::new(a, b.abs(), b != 0.0, move |_, _, y, z| a * y + b * z + c);
        g.growth.lipschitz_y = Some(a.abs());
        g
    }

    pub fn with_h5(mut self, h5: H5Params) -> Self {
        self.h5 = Some(h5);
        self
    }

    pub fn with_growth(mut self, growth: GrowthHints) -> Self {
        self.growth = growth;
        self
    }

    #[inline]
    pub fn evaluate(&self, t: f64, w: f64, y: f64, z: f64) -> f64 {
        (self.func)(t, w, y, z)
    }

    pub fn func(&self) -> Arc<DriverFn> {
        Arc::clone(&self.func)
    }

    /// `f + offset`; constants are unchanged.
    pub fn offset(&self, offset: f64) -> Self {
        let inner = Arc::clone(&self.func);
        Self {
            func: Arc::new(move |t, w, y, z| inner(t, w, y, z) + offset),
            ..self.clone()
        }
    }

    /// Generator with the z-argument replaced by an exogenous value supplied
    /// per call; used by the z-frozen solver.
    pub fn with_func(&self, func: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            func: Arc::new(func),
            ..self.clone()
        }
    }
}
