//! Probe-based diagnostics for the structural assumptions on `(ξ, f, L)`.
//!
//! Pointwise conditions (Lipschitz in z, one-sided monotonicity in y, the
//! sublinear z-growth bound, the growth-condition variants) are sampled at
//! random `(node, y, z)` probes. Integrability conditions are finite on a
//! lattice; their magnitudes are computed and recorded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Problem;
use crate::lattice::{expect_over_paths, AugmentedLattice, PathMode};

#[derive(Debug, Clone, Copy)]
pub struct ProbeConfig {
    pub probes: usize,
    /// Half-width of the `(y, z)` probe box.
    pub radius: f64,
    pub tol: f64,
    pub seed: u64,
    /// Mode for pathwise magnitudes when N exceeds the enumeration cap.
    pub sample_count: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            probes: 1000,
            radius: 10.0,
            tol: 1e-9,
            seed: 0,
            sample_count: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeStatus {
    Pass,
    Fail,
    /// Holds automatically on a finite lattice; magnitude recorded.
    Trivial,
    NotDeclared,
}

/// A probe point where an inequality failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub w: f64,
    pub y: f64,
    pub y2: f64,
    pub z: f64,
    pub z2: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionEntry {
    pub id: &'static str,
    pub status: ProbeStatus,
    pub magnitude: Option<f64>,
    pub witness: Option<Witness>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn get(&self, id: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn status(&self, id: &str) -> Option<ProbeStatus> {
        self.get(id).map(|e| e.status)
    }

    /// No declared condition failed its probes.
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.status != ProbeStatus::Fail)
    }
}

struct Probe {
    t: f64,
    w: f64,
    y: f64,
    y2: f64,
    z: f64,
    z2: f64,
}

fn draw_probes(problem: &Problem, cfg: &ProbeConfig) -> Vec<Probe> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l = problem.lattice();
    let r = cfg.radius;
    (0..cfg.probes)
        .map(|_| {
            let i = rng.gen_range(0..=l.steps());
            let j = rng.gen_range(0..=i);
            Probe {
                t: l.time(i),
                w: l.node_value(i, j),
                y: rng.gen_range(-r..=r),
                y2: rng.gen_range(-r..=r),
                z: rng.gen_range(-r..=r),
                z2: rng.gen_range(-r..=r),
            }
        })
        .collect()
}

/// Runs every check against `(lhs ≤ rhs + tol)` on all probes and returns
/// the first violation.
fn first_violation(probes: &[Probe], tol: f64, check: impl Fn(&Probe) -> (f64, f64)) -> Option<Witness> {
    probes.iter().find_map(|p| {
        let (lhs, rhs) = check(p);
        (lhs > rhs + tol || lhs.is_nan()).then_some(Witness {
            t: p.t,
            w: p.w,
            y: p.y,
            y2: p.y2,
            z: p.z,
            z2: p.z2,
            lhs,
            rhs,
        })
    })
}

fn probed(id: &'static str, witness: Option<Witness>, note: impl Into<String>) -> AssumptionEntry {
    AssumptionEntry {
        id,
        status: if witness.is_some() {
            ProbeStatus::Fail
        } else {
            ProbeStatus::Pass
        },
        magnitude: None,
        witness,
        note: note.into(),
    }
}

fn magnitude(id: &'static str, status: ProbeStatus, value: f64, note: impl Into<String>) -> AssumptionEntry {
    AssumptionEntry {
        id,
        status,
        magnitude: Some(value),
        witness: None,
        note: note.into(),
    }
}

/// Deterministic (given `cfg.seed`) diagnostic report for a problem.
pub fn validate_assumptions(problem: &Problem, cfg: &ProbeConfig) -> AssumptionReport {
    let f = problem.generator();
    let lat = problem.lattice();
    let n = lat.steps();
    let h = lat.h();
    let p = problem.p();
    let probes = draw_probes(problem, cfg);
    let tol = cfg.tol;
    let mut entries = Vec::new();

    let h1 = first_violation(&probes, tol, |q| {
        let d = (f.evaluate(q.t, q.w, q.y, q.z) - f.evaluate(q.t, q.w, q.y, q.z2)).abs();
        (d, f.lambda * (q.z - q.z2).abs())
    });
    entries.push(probed("H1", h1, format!("lambda = {}", f.lambda)));

    let h2 = first_violation(&probes, tol, |q| {
        let dy = q.y - q.y2;
        let lhs = dy * (f.evaluate(q.t, q.w, q.y, q.z) - f.evaluate(q.t, q.w, q.y2, q.z));
        (lhs, f.mu * dy * dy)
    });
    entries.push(probed("H2", h2, format!("mu = {}", f.mu)));

    if !f.depends_on_z {
        let zfree = first_violation(&probes, tol, |q| {
            ((f.evaluate(q.t, q.w, q.y, q.z) - f.evaluate(q.t, q.w, q.y, q.z2)).abs(), 0.0)
        });
        entries.push(probed("z-free", zfree, "declared independent of z"));
    }

    let e_xi_p: f64 = lat.expect_slice(&problem.xi().iter().map(|x| x.abs().powf(p)).collect::<Vec<_>>(), n);
    entries.push(magnitude("H3a", ProbeStatus::Trivial, e_xi_p, "E|xi|^p"));

    // Continuity in y: a tiny perturbation moves f by a tiny amount.
    let eps = 1e-9;
    let h3b = first_violation(&probes, 0.0, |q| {
        let d = (f.evaluate(q.t, q.w, q.y + eps, q.z) - f.evaluate(q.t, q.w, q.y, q.z)).abs();
        (d, 1e-4)
    });
    entries.push(probed("H3b", h3b, "|f(y + 1e-9) - f(y)| <= 1e-4"));

    let mode = PathMode::auto(n, cfg.sample_count, cfg.seed);
    let lplus = obstacle_plus(problem);
    let pathwise = expect_over_paths(lat, mode, 2, |nodes, out| {
        let mut int0 = 0.0;
        let mut int_l = 0.0;
        let mut m = 0.0_f64;
        for (i, &j) in nodes.iter().enumerate().take(n) {
            let t = lat.time(i);
            let w = lat.node_value(i, j);
            m = m.max(lplus.get(i, j));
            int0 += h * f.evaluate(t, w, 0.0, 0.0).abs();
            int_l += h * f.evaluate(t, w, m, 0.0).abs();
        }
        out[0] = int0.powf(p);
        out[1] = int_l.powf(p);
    });
    let (h3c, h4b) = match &pathwise {
        Ok(est) => (est.means[0], est.means[1]),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let method = if matches!(mode, PathMode::Enumerate { .. }) {
        "enumerated"
    } else {
        "sampled"
    };
    entries.push(magnitude("H3c", ProbeStatus::Trivial, h3c, format!("E(int |f(s,0,0)| ds)^p, {method}")));

    // sup_{|y| <= R} |f(s,y,0) - f(s,0,0)| integrated in time, maximized over nodes.
    let mut h3d = 0.0;
    for i in 0..n {
        let t = lat.time(i);
        let mut sup = 0.0_f64;
        for j in 0..=i {
            let w = lat.node_value(i, j);
            let f0 = f.evaluate(t, w, 0.0, 0.0);
            for k in 0..=40 {
                let y = -cfg.radius + 2.0 * cfg.radius * k as f64 / 40.0;
                sup = sup.max((f.evaluate(t, w, y, 0.0) - f0).abs());
            }
        }
        h3d += h * sup;
    }
    entries.push(magnitude(
        "H3d",
        ProbeStatus::Trivial,
        h3d,
        format!("int sup_(|y|<={}) |f(s,y,0) - f(s,0,0)| ds, worst node", cfg.radius),
    ));

    let h4a = AugmentedLattice::build(lat, &lplus, None)
        .map(|aug| aug.expect(n, |_, m| m.powf(p)))
        .unwrap_or(f64::NAN);
    entries.push(magnitude("H4a", ProbeStatus::Trivial, h4a, "E(L_T^{+,*})^p, augmented"));
    entries.push(magnitude(
        "H4b",
        ProbeStatus::Trivial,
        h4b,
        format!("E(int |f(s, L^{{+,*}}_s, 0)| ds)^p, {method}"),
    ));

    match &f.h5 {
        Some(h5) => {
            let w = first_violation(&probes, tol, |q| {
                let lhs = (f.evaluate(q.t, q.w, q.y, q.z) - f.evaluate(q.t, q.w, q.y, 0.0)).abs();
                let g = (h5.g)(q.t, q.w);
                (lhs, h5.gamma * (g + q.y.abs() + q.z.abs()).powf(h5.alpha))
            });
            let mut e = probed("H5", w, format!("gamma = {}, alpha = {}", h5.gamma, h5.alpha));
            if !(h5.alpha > 0.0 && h5.alpha < 1.0) || h5.gamma < 0.0 {
                e.status = ProbeStatus::Fail;
                e.note.push_str("; alpha must lie in (0, 1) and gamma >= 0");
            }
            if h5.alpha * p >= 1.0 {
                e.note.push_str(&format!("; alpha * p = {} >= 1", h5.alpha * p));
            }
            entries.push(e);
        }
        None => entries.push(AssumptionEntry {
            id: "H5",
            status: ProbeStatus::NotDeclared,
            magnitude: None,
            witness: None,
            note: String::new(),
        }),
    }

    match &f.growth.phi {
        Some(phi) => {
            let w = first_violation(&probes, tol, |q| {
                let lhs = f.evaluate(q.t, q.w, q.y, q.z).abs();
                (lhs, f.evaluate(q.t, q.w, 0.0, q.z).abs() + phi(q.y.abs()))
            });
            entries.push(probed("growth-phi", w, "|f(t,y,z)| <= |f(t,0,z)| + phi(|y|)"));
        }
        None => entries.push(AssumptionEntry {
            id: "growth-phi",
            status: ProbeStatus::NotDeclared,
            magnitude: None,
            witness: None,
            note: String::new(),
        }),
    }

    match f.growth.lipschitz_y {
        Some(c) => {
            let w = first_violation(&probes, tol, |q| {
                let lhs = (f.evaluate(q.t, q.w, q.y, q.z) - f.evaluate(q.t, q.w, q.y2, q.z)).abs();
                (lhs, c * (q.y - q.y2).abs())
            });
            entries.push(probed("lipschitz-y", w, format!("C = {c}")));
        }
        None => entries.push(AssumptionEntry {
            id: "lipschitz-y",
            status: ProbeStatus::NotDeclared,
            magnitude: None,
            witness: None,
            note: String::new(),
        }),
    }

    AssumptionReport { entries }
}

/// `L⁺` tabulated on the lattice (`0` where the obstacle is the sentinel).
pub(crate) fn obstacle_plus(problem: &Problem) -> crate::lattice::LatticeProcess {
    problem.obstacle_values().map(|l| l.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BinomialLattice;
    use crate::problem::{scenario, Generator, Obstacle, ScenarioParams, CATALOG};
    use std::sync::Arc;

    fn with_generator(g: Generator) -> Problem {
        let l = Arc::new(BinomialLattice::new(1.0, 8).unwrap());
        Problem::new("probe", l, vec![0.0; 9], g, Obstacle::NegInfinity, 2.0).unwrap()
    }

    #[test]
    fn decreasing_cubic_is_monotone() {
        let p = with_generator(Generator::new(0.0, 0.0, false, |_, _, y, _| -y * y * y));
        let r = validate_assumptions(&p, &ProbeConfig::default());
        assert_eq!(r.status("H2"), Some(ProbeStatus::Pass));
    }

    #[test]
    fn square_fails_one_sided_bound_with_witness() {
        let p = with_generator(Generator::new(0.0, 0.0, false, |_, _, y, _| y * y));
        let r = validate_assumptions(&p, &ProbeConfig::default());
        let e = r.get("H2").unwrap();
        assert_eq!(e.status, ProbeStatus::Fail);
        let w = e.witness.unwrap();
        assert!(w.lhs > w.rhs);
        assert!((w.y - w.y2) * (w.y * w.y - w.y2 * w.y2) > 0.0);
    }

    #[test]
    fn linear_in_z_passes_lipschitz() {
        let p = with_generator(Generator::new(0.0, 0.7, true, |_, _, _, z| 0.7 * z));
        let r = validate_assumptions(&p, &ProbeConfig::default());
        assert_eq!(r.status("H1"), Some(ProbeStatus::Pass));
        let tight = with_generator(Generator::new(0.0, 0.5, true, |_, _, _, z| 0.7 * z));
        let r = validate_assumptions(&tight, &ProbeConfig::default());
        assert_eq!(r.status("H1"), Some(ProbeStatus::Fail));
    }

    #[test]
    fn undeclared_z_dependence_is_caught() {
        let p = with_generator(Generator::new(0.0, 1.0, false, |_, _, _, z| z));
        let r = validate_assumptions(&p, &ProbeConfig::default());
        assert_eq!(r.status("z-free"), Some(ProbeStatus::Fail));
    }

    #[test]
    fn report_is_deterministic() {
        let p = scenario("american-put", &ScenarioParams::new(), 10, 2.0).unwrap();
        let cfg = ProbeConfig { seed: 3, ..Default::default() };
        assert_eq!(validate_assumptions(&p, &cfg), validate_assumptions(&p, &cfg));
    }

    #[test]
    fn catalog_declarations_pass() {
        for name in CATALOG {
            let p = scenario(name, &ScenarioParams::new(), 10, 1.5).unwrap();
            let r = validate_assumptions(&p, &ProbeConfig::default());
            assert!(r.all_pass(), "{name}: {:?}", r.entries.iter().filter(|e| e.status == ProbeStatus::Fail).collect::<Vec<_>>());
            assert!(r.get("H3d").unwrap().magnitude.unwrap().is_finite());
        }
    }
}
