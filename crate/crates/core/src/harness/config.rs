//! Run configuration (TOML).
//!
//! Every field is optional and unknown keys are rejected. Example:
//!
//! ```toml
//! scenario = "american-put"
//! steps = 200
//! p = 2.0
//! mode = "projected"
//! levels = [1.0, 4.0, 16.0, 64.0]
//!
//! [params]
//! sigma = 0.25
//!
//! [picard]
//! chat = 1.0
//! stop_tol = 1e-10
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{EstimateId, NormMode};
use crate::bsde::StepConfig;
use crate::error::{Error, Result};
use crate::picard::PicardConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    Projected,
    Penalized,
    Bsde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    AmericanDp,
    Stopping,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Offsets {
    pub xi: f64,
    pub driver: f64,
    pub obstacle: f64,
}

impl Default for Offsets {
    fn default() -> Self {
        Self {
            xi: 1.0,
            driver: 0.0,
            obstacle: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TanakaConfig {
    pub paths: usize,
    /// Local-time grid sizes for the occupation study.
    pub grid_levels: Vec<usize>,
}

impl Default for TanakaConfig {
    fn default() -> Self {
        Self {
            paths: 100,
            grid_levels: vec![25, 50, 100, 200, 400],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub params: BTreeMap<String, f64>,
    pub steps: usize,
    pub p: f64,
    pub seed: u64,
    /// Path sample size when a pathwise quantity cannot be enumerated.
    pub sample_count: usize,
    pub mode: SolveMode,
    /// Penalty level for `mode = "penalized"`.
    pub level: f64,
    pub levels: Vec<f64>,
    pub betas: Vec<f64>,
    /// Lattice sizes for a refinement study.
    pub refine: Vec<usize>,
    pub estimates: Vec<EstimateId>,
    pub step: StepConfig,
    pub picard: PicardConfig,
    pub offsets: Offsets,
    pub tanaka: TanakaConfig,
    pub oracle: OracleKind,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "martingale".into(),
            params: BTreeMap::new(),
            steps: 100,
            p: 2.0,
            seed: 0,
            sample_count: 20_000,
            mode: SolveMode::Projected,
            level: 100.0,
            levels: vec![1.0, 4.0, 16.0, 64.0, 256.0],
            betas: Vec::new(),
            refine: Vec::new(),
            estimates: EstimateId::ALL.to_vec(),
            step: StepConfig::default(),
            picard: PicardConfig::default(),
            offsets: Offsets::default(),
            tanaka: TanakaConfig::default(),
            oracle: OracleKind::AmericanDp,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn norm_mode(&self) -> NormMode {
        NormMode::Auto {
            count: self.sample_count,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.sample_count == 0 {
            return Err(Error::Config("sample_count must be at least 1".into()));
        }
        if self.betas.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::Config("betas must be positive".into()));
        }
        self.step.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Normalized text form: every field written in declaration order.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = RunConfig {
            scenario: "american-put".into(),
            steps: 40,
            betas: vec![0.25, 0.5],
            ..RunConfig::default()
        };
        cfg.params.insert("sigma".into(), 0.25);
        cfg.picard.blocks = Some(vec![0, 20, 40]);
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml("scenario = \"martingale\"\nstepz = 3\n").unwrap_err();
        assert!(err.to_string().contains("stepz"), "{err}");
        let nested = RunConfig::from_toml("[picard]\nchatt = 1.0\n").unwrap_err();
        assert!(nested.to_string().contains("chatt"), "{nested}");
    }

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
        assert!(RunConfig::from_toml("steps = 0").is_err());
    }
}
