use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step {step} out of range (lattice has {steps} steps)")]
    StepOutOfRange { step: usize, steps: usize },

    #[error("path enumeration needs 2^{steps} paths, above the cap of 2^{cap}")]
    EnumerationCap { steps: usize, cap: usize },

    #[error("functional declared {declared} is not: step {step}, nodes {node} and {next}")]
    NonMonotone {
        declared: &'static str,
        step: usize,
        node: usize,
        next: usize,
    },

    #[error("augmented lattice exceeded its state budget ({states} states at step {step})")]
    StateBudget { states: usize, step: usize },

    #[error("terminal value below obstacle at node {node}: xi = {xi}, L_T = {obstacle}")]
    ObstacleAboveTerminal { node: usize, xi: f64, obstacle: f64 },

    #[error("step condition violated: h * max(mu, 0) = {value} > 1/2")]
    StepCondition { value: f64 },

    #[error("implicit step failed at t = {t}: {reason}")]
    RootFinding { t: f64, reason: String },

    #[error("picard iteration did not reach tolerance on block {block} after {sweeps} sweeps (ratios {ratios:?})")]
    NoContraction {
        block: usize,
        sweeps: usize,
        ratios: Vec<f64>,
    },

    #[error("processes live on different lattices")]
    LatticeMismatch,

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for bad input, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RootFinding { .. } | Error::NoContraction { .. } | Error::StateBudget { .. } => 3,
            _ => 2,
        }
    }
}
