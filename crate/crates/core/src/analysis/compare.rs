//! Node-wise ordering checks between two solutions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::reflect::SolutionTriple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `Y_A ≤ Y_B` at every node.
    YLe,
    /// `ΔK_A ≥ ΔK_B` at every node.
    DkGe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViolationReport {
    pub relation: Relation,
    /// Largest amount by which the relation fails (0 if it holds).
    pub max_violation: f64,
    /// Node attaining `max_violation`, if positive.
    pub worst: Option<(usize, usize)>,
}

pub fn compare_solutions(a: &SolutionTriple, b: &SolutionTriple, relation: Relation) -> Result<ViolationReport> {
    let (lo, hi) = match relation {
        Relation::YLe => (&a.y, &b.y),
        Relation::DkGe => (&b.dk, &a.dk),
    };
    if lo.last_step() != hi.last_step() {
        return Err(Error::LatticeMismatch);
    }
    let mut max_violation = 0.0;
    let mut worst = None;
    for (i, (sl, sh)) in lo.slices().iter().zip(hi.slices()).enumerate() {
        for (j, (l, h)) in sl.iter().zip(sh).enumerate() {
            let v = l - h;
            if v > max_violation {
                max_violation = v;
                worst = Some((i, j));
            }
        }
    }
    Ok(ViolationReport {
        relation,
        max_violation,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsde::StepConfig;
    use crate::problem::{scenario, ScenarioParams};
    use crate::reflect::solve_projected;

    #[test]
    fn identical_triples() {
        let p = scenario("american-put", &ScenarioParams::new(), 20, 2.0).unwrap();
        let t = solve_projected(&p, &StepConfig::default()).unwrap();
        for rel in [Relation::YLe, Relation::DkGe] {
            let r = compare_solutions(&t, &t, rel).unwrap();
            assert_eq!(r.max_violation, 0.0);
            assert!(r.worst.is_none());
        }
    }

    #[test]
    fn shifted_terminal_orders_solutions() {
        let p = scenario("american-put", &ScenarioParams::new(), 50, 2.0).unwrap();
        let q = p.perturbed(1.0, 0.0, 0.0).unwrap();
        let cfg = StepConfig::default();
        let (a, b) = (solve_projected(&p, &cfg).unwrap(), solve_projected(&q, &cfg).unwrap());
        assert!(compare_solutions(&a, &b, Relation::YLe).unwrap().max_violation <= 1e-12);
        assert!(compare_solutions(&a, &b, Relation::DkGe).unwrap().max_violation <= 1e-12);
        let rev = compare_solutions(&b, &a, Relation::YLe).unwrap();
        assert!(rev.max_violation > 0.0 && rev.worst.is_some());
    }

    #[test]
    fn raised_obstacle_orders_solutions() {
        let p = scenario("binding-obstacle", &ScenarioParams::new(), 40, 2.0).unwrap();
        let q = p.perturbed(0.0, 0.0, 0.1).unwrap();
        let cfg = StepConfig::default();
        let (a, b) = (solve_projected(&p, &cfg).unwrap(), solve_projected(&q, &cfg).unwrap());
        assert!(compare_solutions(&a, &b, Relation::YLe).unwrap().max_violation <= 1e-12);
    }
}
