//! Norms, a priori estimate checks, comparison and local-time diagnostics.

pub mod compare;
pub mod estimates;
pub mod norms;
pub mod tanaka;

pub use compare::{compare_solutions, Relation, ViolationReport};
pub use estimates::{check_estimate, frozen_stability, EstimateId, EstimateReport, StabilityReport, StoppingRule};
pub use norms::{
    beta_metric, d_norm, hp_norm, hp_norm_window, k_sp_distance, sp_norm, sp_norm_window, NormEntry, NormMethod,
    NormMode,
};
pub use tanaka::{local_time, local_time_increments, occupation_check, tanaka_check, OccupationReport, TanakaReport};
