//! CLI, configuration, oracles, studies and CSV output.

pub mod calibration;
pub mod cli;
pub mod config;
pub mod convergence;
pub mod oracles;
pub mod output;

pub use calibration::{
    calibrate, catalog_sweep, fixture_calibration, fixture_oracles, Calibration, SweepEntry, SweepSettings,
};
pub use config::{read_config, RunConfig, SolveMode};
pub use convergence::{convergence_study, StudyReport, Verdict};
pub use oracles::{american_dp_oracle, exhaustive_stopping_oracle, exhaustive_stopping_value, AmericanPut};
pub use output::{write_csv, write_csv_to, ResultRow, RowSink};
