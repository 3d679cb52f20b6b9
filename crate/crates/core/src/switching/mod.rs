//! Backward dynamic programming over regimes, policy extraction and
//! out-of-sample evaluation, plus a lattice oracle for one-dimensional
//! instances.

mod instances;
mod maxlayer;
mod oracle;
mod problem;
mod simulate;
mod solver;
mod terminal;

pub use instances::{LinearRegimes, ToyInstance};
pub use maxlayer::{fast_max_layer, reference_max_layer, Maximizer};
pub use oracle::{brute_force_value, gauss_hermite, InstanceLimits, OracleConfig, OracleValue};
pub use problem::{unravel, validate, CostStructure, RegimeSet, SwitchingProblem};
pub use simulate::{
    deterministic_schedule, simulate_policy, GainDistribution, Policy, SimulationConfig,
};
pub use solver::{
    backward_induction, AuditLayer, MaxMethod, PolicySurface, SolverConfig, StepDiagnostics,
    TruncationRule,
};
pub use terminal::{terminal_layer, TerminalRule};

use crate::localbasis::RegressionError;
use crate::pathgen::PathError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SwitchingError {
    #[error("invalid regime set: {0}")]
    InvalidRegimes(String),
    #[error("invalid costs: {0}")]
    InvalidCosts(String),
    #[error("terminal value is not finite at path {path}, regime {regime}")]
    TerminalValueError { path: usize, regime: usize },
    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),
    #[error("instance too large for the lattice oracle: {0}")]
    InstanceTooLarge(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("regression failed at step {step}, regime {regime}: {source}")]
    Regression {
        step: usize,
        regime: usize,
        #[source]
        source: RegressionError,
    },
}
