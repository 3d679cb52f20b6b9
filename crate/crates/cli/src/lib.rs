//! Experiment driver: reads a run configuration, solves the switching
//! problem, simulates the optimal, mean-deterministic and do-nothing
//! strategies on fresh paths, and writes a JSON report plus CSV tables.

pub mod config;
pub mod report;
pub mod run;
pub mod tables;

pub use config::{ProblemKind, RunConfig, RNG_KEY_ENV};
pub use report::RunReport;
pub use run::{oracle_table, run, RunOptions, RunOutcome};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Switching(#[from] optswitch::SwitchingError),
    #[error(transparent)]
    Path(#[from] optswitch::PathError),
    #[error(transparent)]
    Power(#[from] optswitch::power::PowerError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("failed to start the worker pool: {0}")]
    Workers(#[from] rayon::ThreadPoolBuildError),
    #[error("{count} invariant violation(s); first: {first}")]
    Invariant { count: usize, first: String },
}
