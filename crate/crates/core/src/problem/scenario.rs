//! Named problem catalog used by the CLI and the test suites.
//!
//! | name | generator | obstacle | terminal value |
//! |------|-----------|----------|----------------|
//! | `martingale` | `0` | none | `W_T²` |
//! | `ode-cubic` | `−y³` | none | `c` |
//! | `never-binding` | `0` | `c` | `c + W_T²` |
//! | `binding-obstacle` | `0` | `(1 − t/T)(ℓ₀ + κ·W_t)` | `0` |
//! | `american-put` | `−r̂·y` | `(K − X_t)⁺` | `(K − X_T)⁺` |
//! | `monotone-nonlipschitz` | `−y³ + λz` | `|W_t|` | `|W_T|` |
//!
//! For the put, `X_t = x₀·exp(σW_t + (r − σ²/2)t)` node-wise and
//! `r̂ = (e^{rh} − 1)/h`, so the implicit step `y(1 + h·r̂) = E[Y_{i+1}]`
//! discounts by exactly `e^{−rh}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Generator, GrowthHints, H5Params, Obstacle, Problem};
use crate::error::{Error, Result};
use crate::lattice::{BinomialLattice, Monotonicity};

pub const CATALOG: [&str; 6] = [
    "martingale",
    "ode-cubic",
    "never-binding",
    "binding-obstacle",
    "american-put",
    "monotone-nonlipschitz",
];

/// `key = value` overrides; unknown keys are rejected per scenario.
pub type ScenarioParams = BTreeMap<String, f64>;

fn defaults(name: &str) -> Option<&'static [(&'static str, f64)]> {
    Some(match name {
        "martingale" => &[("T", 1.0)],
        "ode-cubic" => &[("T", 1.0), ("c", 1.0)],
        "never-binding" => &[("T", 1.0), ("c", 0.5)],
        "binding-obstacle" => &[("T", 1.0), ("l0", 1.0), ("kappa", 1.0)],
        "american-put" => &[
            ("T", 1.0),
            ("r", 0.05),
            ("sigma", 0.3),
            ("x0", 100.0),
            ("strike", 100.0),
        ],
        "monotone-nonlipschitz" => &[("T", 1.0), ("lambda", 0.2)],
        _ => return None,
    })
}

/// Parameter names and defaults for a catalog entry.
pub fn scenario_defaults(name: &str) -> Result<Vec<(&'static str, f64)>> {
    defaults(name)
        .map(|d| d.to_vec())
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

fn resolve(name: &str, params: &ScenarioParams) -> Result<BTreeMap<&'static str, f64>> {
    let defs = defaults(name).ok_or_else(|| Error::UnknownScenario(name.to_string()))?;
    let mut out: BTreeMap<&'static str, f64> = defs.iter().copied().collect();
    for (k, v) in params {
        let key = defs
            .iter()
            .find(|(d, _)| d == k)
            .map(|(d, _)| *d)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("scenario `{name}` has no parameter `{k}`"))
            })?;
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("parameter `{k}` must be finite")));
        }
        out.insert(key, *v);
    }
    Ok(out)
}

fn cubic_growth() -> GrowthHints {
    GrowthHints {
        phi: Some(Arc::new(|r: f64| r * r * r)),
        lipschitz_y: None,
    }
}

/// Instantiates a catalog problem on an `N`-step lattice.
pub fn scenario(name: &str, params: &ScenarioParams, steps: usize, p: f64) -> Result<Problem> {
    let v = resolve(name, params)?;
    let horizon = v["T"];
    let lattice = Arc::new(BinomialLattice::new(horizon, steps)?);
    let n = lattice.steps();
    let terminal_w: Vec<f64> = (0..=n).map(|j| lattice.node_value(n, j)).collect();

    let (generator, obstacle, xi) = match name {
        "martingale" => (
            Generator::zero(),
            Obstacle::NegInfinity,
            terminal_w.iter().map(|w| w * w).collect(),
        ),
        "ode-cubic" => {
            let c = v["c"];
            let g = Generator::new(0.0, 0.0, false, |_, _, y, _| -y * y * y).with_growth(cubic_growth());
            (g, Obstacle::NegInfinity, vec![c; n + 1])
        }
        "never-binding" => {
            let c = v["c"];
            (
                Generator::zero(),
                Obstacle::Constant(c),
                terminal_w.iter().map(|w| c + w * w).collect(),
            )
        }
        "binding-obstacle" => {
            let (l0, kappa) = (v["l0"], v["kappa"]);
            let monotone = if kappa >= 0.0 {
                Monotonicity::Nondecreasing
            } else {
                Monotonicity::Nonincreasing
            };
            let obstacle = Obstacle::node(Some(monotone), move |t, w| {
                (1.0 - t / horizon).max(0.0) * (l0 + kappa * w)
            });
            (Generator::zero(), obstacle, vec![0.0; n + 1])
        }
        "american-put" => {
            let (r, sigma, x0, strike) = (v["r"], v["sigma"], v["x0"], v["strike"]);
            if !(sigma > 0.0) || !(x0 > 0.0) || strike < 0.0 {
                return Err(Error::InvalidParameter(
                    "american-put needs sigma > 0, x0 > 0, strike >= 0".into(),
                ));
            }
            let h = lattice.h();
            let rate = (r * h).exp_m1() / h;
            let mut g = Generator::new(-rate, 0.0, false, move |_, _, y, _| -rate * y);
            g.growth.lipschitz_y = Some(rate.abs());
            let payoff = move |t: f64, w: f64| {
                let x = x0 * (sigma * w + (r - 0.5 * sigma * sigma) * t).exp();
                (strike - x).max(0.0)
            };
            let xi = terminal_w.iter().map(|&w| payoff(horizon, w)).collect();
            (g, Obstacle::node(Some(Monotonicity::Nonincreasing), payoff), xi)
        }
        "monotone-nonlipschitz" => {
            let lambda = v["lambda"];
            if lambda < 0.0 {
                return Err(Error::InvalidParameter("lambda must be nonnegative".into()));
            }
            let g = Generator::new(0.0, lambda, lambda != 0.0, move |_, _, y, z| -y * y * y + lambda * z)
                .with_growth(cubic_growth())
                .with_h5(H5Params {
                    gamma: 1.0,
                    alpha: 0.5,
                    g: Arc::new(|_, _| 0.0),
                });
            (
                g,
                Obstacle::node(None, |_, w: f64| w.abs()),
                terminal_w.iter().map(|w| w.abs()).collect(),
            )
        }
        _ => unreachable!("resolved above"),
    };
    Problem::new(name, lattice, xi, generator, obstacle, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_entries_build() {
        for name in CATALOG {
            let p = scenario(name, &ScenarioParams::new(), 16, 2.0).unwrap();
            assert_eq!(p.name, name);
            assert_eq!(p.xi().len(), 17);
        }
    }

    #[test]
    fn unknown_names_and_keys_are_rejected() {
        assert!(matches!(
            scenario("nope", &ScenarioParams::new(), 4, 2.0),
            Err(Error::UnknownScenario(_))
        ));
        let mut params = ScenarioParams::new();
        params.insert("bogus".into(), 1.0);
        assert!(matches!(
            scenario("martingale", &params, 4, 2.0),
            Err(Error::InvalidParameter(_))
        ));
        let mut bad = ScenarioParams::new();
        bad.insert("sigma".into(), 0.0);
        assert!(scenario("american-put", &bad, 4, 2.0).is_err());
    }

    #[test]
    fn martingale_data() {
        let p = scenario("martingale", &ScenarioParams::new(), 4, 2.0).unwrap();
        assert!(!p.obstacle().is_finite());
        assert_eq!(p.generator().evaluate(0.2, 0.1, 3.0, 4.0), 0.0);
        let l = p.lattice();
        for (j, x) in p.xi().iter().enumerate() {
            assert_eq!(*x, l.node_value(4, j).powi(2));
        }
    }

    #[test]
    fn ode_cubic_data() {
        let mut params = ScenarioParams::new();
        params.insert("c".into(), 2.0);
        let p = scenario("ode-cubic", &params, 4, 2.0).unwrap();
        assert_eq!(p.generator().evaluate(0.0, 0.0, 2.0, 5.0), -8.0);
        assert!(p.xi().iter().all(|&x| x == 2.0));
    }

    #[test]
    fn american_put_discount_is_exact() {
        let p = scenario("american-put", &ScenarioParams::new(), 200, 2.0).unwrap();
        let h = p.lattice().h();
        let slope = 1.0 - h * p.generator().evaluate(0.0, 0.0, 1.0, 0.0);
        assert!((slope - (0.05 * h).exp()).abs() <= 1e-15);
        assert!(p.generator().mu <= 0.0);
    }
}
