//! Penalty-level and lattice-refinement studies.

use serde::Serialize;

use super::config::RunConfig;
use super::output::{ResultRow, RowSink};
use crate::error::Result;
use crate::problem::scenario;
use crate::reflect::{penalization_sweep, solve_projected, SweepNorms};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<ResultRow>,
    pub verdicts: Vec<Verdict>,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Levels sweep at `cfg.steps` (when `levels` is nonempty) and projected
/// `Y₀` self-convergence over `cfg.refine`. Verdicts need at least two
/// levels, or three lattice sizes.
pub fn convergence_study(cfg: &RunConfig, run_id: &str) -> Result<StudyReport> {
    let mut sink = RowSink::new(run_id, cfg.scenario.clone(), cfg.steps);
    let mut verdicts = Vec::new();

    if !cfg.levels.is_empty() {
        let problem = scenario(&cfg.scenario, &cfg.params, cfg.steps, cfg.p)?;
        let norms = SweepNorms {
            p: cfg.p,
            betas: cfg.betas.clone(),
            mode: cfg.norm_mode(),
        };
        let rep = penalization_sweep(&problem, &cfg.levels, &cfg.step, &norms)?;
        sink.exact("reference_y0", rep.reference_y0);
        sink.entry("reference_sp_norm", &rep.reference_sp_norm);
        sink.exact("reference_skorokhod_residual", rep.reference_skorokhod.residual);
        for (k, row) in rep.rows.iter().enumerate() {
            let level = row.level;
            sink.exact("y0", row.y0).at_level(level).at_sweep(k);
            sink.entry("sp_error", &row.sp_distance).at_level(level).at_sweep(k);
            sink.entry("hp_error", &row.hp_distance).at_level(level).at_sweep(k);
            sink.entry("k_error", &row.k_distance).at_level(level).at_sweep(k);
            sink.exact("skorokhod_residual", row.skorokhod.residual).at_level(level).at_sweep(k);
            sink.exact("monotonicity_violation", row.monotonicity_violation)
                .at_level(level)
                .at_sweep(k);
            for (beta, e) in &row.beta_distances {
                sink.entry(&format!("beta_error[{beta}]"), e).at_level(level).at_sweep(k);
            }
        }
        if rep.rows.len() >= 2 {
            verdicts.push(Verdict {
                name: "sp-error-decreasing".into(),
                holds: strictly_decreasing(&rep.sp_errors()),
            });
            verdicts.push(Verdict {
                name: "hp-error-decreasing".into(),
                holds: strictly_decreasing(&rep.hp_errors()),
            });
            verdicts.push(Verdict {
                name: "residual-decreasing".into(),
                holds: strictly_decreasing(&rep.residuals()),
            });
            verdicts.push(Verdict {
                name: "penalized-monotone".into(),
                holds: rep.max_monotonicity_violation() <= 1e-12,
            });
        }
    }

    if !cfg.refine.is_empty() {
        let mut y0 = Vec::with_capacity(cfg.refine.len());
        for &n in &cfg.refine {
            let problem = scenario(&cfg.scenario, &cfg.params, n, cfg.p)?;
            let v = solve_projected(&problem, &cfg.step)?.y.get(0, 0);
            y0.push(v);
            sink.exact("refine_y0", v).with_note(format!("N={n}"));
        }
        let finest = *y0.last().expect("nonempty");
        let mut successive = Vec::new();
        for (k, (&n, &v)) in cfg.refine.iter().zip(&y0).enumerate() {
            sink.exact("refine_error_vs_finest", (v - finest).abs()).with_note(format!("N={n}"));
            if k > 0 {
                let d = (v - y0[k - 1]).abs();
                successive.push(d);
                sink.exact("refine_successive_diff", d).with_note(format!("N={n}"));
            }
        }
        if successive.len() >= 2 {
            verdicts.push(Verdict {
                name: "refine-successive-decreasing".into(),
                holds: strictly_decreasing(&successive),
            });
        }
    }

    for v in &verdicts {
        sink.exact(&format!("verdict:{}", v.name), if v.holds { 1.0 } else { 0.0 });
    }
    Ok(StudyReport {
        rows: sink.rows,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_has_no_verdict() {
        let cfg = RunConfig {
            scenario: "american-put".into(),
            levels: vec![],
            refine: vec![25],
            ..RunConfig::default()
        };
        let rep = convergence_study(&cfg, "t").unwrap();
        assert!(rep.verdicts.is_empty());
        assert_eq!(rep.rows.iter().filter(|r| r.quantity == "refine_y0").count(), 1);
    }

    #[test]
    fn put_self_convergence() {
        let cfg = RunConfig {
            scenario: "american-put".into(),
            levels: vec![],
            refine: vec![25, 50, 100, 200],
            ..RunConfig::default()
        };
        let rep = convergence_study(&cfg, "t").unwrap();
        assert_eq!(rep.verdicts.len(), 1);
        assert!(rep.verdicts[0].holds, "{:?}", rep.rows);
    }

    #[test]
    fn levels_sweep_verdicts() {
        let cfg = RunConfig {
            scenario: "binding-obstacle".into(),
            steps: 20,
            levels: vec![1.0, 4.0, 16.0, 64.0],
            ..RunConfig::default()
        };
        let rep = convergence_study(&cfg, "t").unwrap();
        assert!(rep.verdicts.iter().all(|v| v.holds), "{:?}", rep.verdicts);
    }
}
