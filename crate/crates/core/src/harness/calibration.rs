//! Catalog-wide estimate sweep and the checked-in fixture constants.
//!
//! `C_emp` for an estimate is the largest ratio seen across the sweep times
//! [`SAFETY_FACTOR`], rounded up to two significant digits. The fixture file
//! records the sweep settings next to the constants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::oracles::AmericanPut;
use crate::analysis::{check_estimate, EstimateId, EstimateReport, NormMode, StoppingRule};
use crate::bsde::StepConfig;
use crate::error::{Error, Result};
use crate::problem::{scenario, ScenarioParams, CATALOG};
use crate::reflect::{solve_penalized, solve_projected};

pub const SAFETY_FACTOR: f64 = 2.0;

const CALIBRATION_TOML: &str = include_str!("../../fixtures/calibration.toml");
const ORACLES_TOML: &str = include_str!("../../fixtures/oracles.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub steps: usize,
    pub p: f64,
    pub betas: Vec<f64>,
    pub levels: Vec<f64>,
    pub hit_levels: Vec<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            steps: 12,
            p: 2.0,
            betas: vec![0.25, 0.5, 0.75],
            levels: vec![1.0, 4.0, 16.0, 64.0, 256.0, 1024.0],
            hit_levels: vec![0.5, -0.5],
        }
    }
}

impl SweepSettings {
    /// `τ = T` plus first hitting times of each level.
    pub fn stopping_rules(&self) -> Vec<StoppingRule> {
        let mut rules = vec![StoppingRule::Terminal];
        for &l in &self.hit_levels {
            rules.push(if l >= 0.0 {
                StoppingRule::HitAbove { level: l }
            } else {
                StoppingRule::HitBelow { level: l }
            });
        }
        rules
    }
}

/// One evaluated estimate; `level` is set for penalized triples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub report: EstimateReport,
    pub level: Option<f64>,
}

/// All applicable estimates for one problem.
pub fn estimate_entries(
    problem: &crate::problem::Problem,
    settings: &SweepSettings,
    ids: &[EstimateId],
    mode: NormMode,
    cfg: &StepConfig,
) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::new();
    let rules = settings.stopping_rules();
    let z_free = !problem.generator().depends_on_z;
    let projected = solve_projected(problem, cfg)?;
    for &id in ids.iter().filter(|id| !id.penalized()) {
        if id.z_free() && !z_free {
            continue;
        }
        let taus: &[StoppingRule] = if id.stopped() { &rules } else { &rules[..1] };
        let exps: Vec<f64> = match id {
            EstimateId::P51ii => settings.betas.clone(),
            EstimateId::P51i => vec![1.0],
            _ => vec![settings.p],
        };
        for &tau in taus {
            for &e in &exps {
                out.push(SweepEntry {
                    report: check_estimate(id, problem, &projected, tau, e, mode)?,
                    level: None,
                });
            }
        }
    }
    if ids.iter().any(|id| id.penalized()) {
        for &level in &settings.levels {
            let pen = solve_penalized(problem, level, cfg)?;
            for &id in ids.iter().filter(|id| id.penalized()) {
                let taus: &[StoppingRule] = if id.stopped() { &rules } else { &rules[..1] };
                for &tau in taus {
                    out.push(SweepEntry {
                        report: check_estimate(id, problem, &pen, tau, settings.p, mode)?,
                        level: Some(level),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Estimate sweep over the whole catalog with default scenario parameters.
pub fn catalog_sweep(settings: &SweepSettings, mode: NormMode) -> Result<Vec<SweepEntry>> {
    let cfg = StepConfig::default();
    let mut out = Vec::new();
    for name in CATALOG {
        let problem = scenario(name, &ScenarioParams::new(), settings.steps, settings.p)?;
        out.extend(estimate_entries(&problem, settings, &EstimateId::ALL, mode, &cfg)?);
    }
    Ok(out)
}

/// Rounds up to two significant digits.
fn round_up_2sig(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let e = x.log10().floor() as i32 - 1;
    if e < 0 {
        let s = 10f64.powi(-e);
        (x * s).ceil() / s
    } else {
        let s = 10f64.powi(e);
        (x / s).ceil() * s
    }
}

/// `C_emp` per estimate from a sweep.
pub fn calibrate(entries: &[SweepEntry]) -> BTreeMap<EstimateId, f64> {
    let mut worst: BTreeMap<EstimateId, f64> = BTreeMap::new();
    for e in entries {
        let w = worst.entry(e.report.id).or_insert(0.0);
        *w = w.max(e.report.ratio);
    }
    worst.into_iter().map(|(id, r)| (id, round_up_2sig(SAFETY_FACTOR * r))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub sweep: SweepSettings,
    pub safety_factor: f64,
    pub constants: BTreeMap<EstimateId, f64>,
}

impl Calibration {
    pub fn constant(&self, id: EstimateId) -> Result<f64> {
        self.constants
            .get(&id)
            .copied()
            .ok_or_else(|| Error::Config(format!("no calibrated constant for {id}")))
    }
}

/// Constants checked in under `fixtures/calibration.toml`.
pub fn fixture_calibration() -> Result<Calibration> {
    toml::from_str(CALIBRATION_TOML).map_err(|e| Error::Config(format!("calibration fixture: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnedPut {
    pub put: AmericanPut,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFixtures {
    pub american_put: PinnedPut,
    pub binding_obstacle_n10: f64,
}

/// Regression values checked in under `fixtures/oracles.toml`.
pub fn fixture_oracles() -> Result<OracleFixtures> {
    toml::from_str(ORACLES_TOML).map_err(|e| Error::Config(format!("oracle fixture: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::oracles::{american_dp_oracle, exhaustive_stopping_oracle};

    #[test]
    fn rounding() {
        assert_eq!(round_up_2sig(0.0), 0.0);
        assert_eq!(round_up_2sig(1.234), 1.3);
        assert_eq!(round_up_2sig(0.6), 0.6);
        assert!((round_up_2sig(0.0456) - 0.046).abs() < 1e-12);
        assert!((round_up_2sig(27.0) - 27.0).abs() < 1e-12);
    }

    #[test]
    fn fixtures_parse_and_match_oracles() {
        let cal = fixture_calibration().unwrap();
        assert_eq!(cal.constants.len(), EstimateId::ALL.len());
        assert_eq!(cal.safety_factor, SAFETY_FACTOR);
        let o = fixture_oracles().unwrap();
        assert_eq!(american_dp_oracle(&o.american_put.put).unwrap(), o.american_put.value);
        let p = scenario("binding-obstacle", &ScenarioParams::new(), 10, 2.0).unwrap();
        assert_eq!(exhaustive_stopping_oracle(&p).unwrap(), o.binding_obstacle_n10);
    }
}
