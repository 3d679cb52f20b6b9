//! Euler path generation with bit-reproducible backward replay.
//!
//! A forward sweep advances `M` paths from `x0` to the horizon and keeps only
//! the terminal states plus a few full snapshots. The backward sweep then
//! walks the grid from `N` down to `0`, regenerating each step's Gaussian
//! draws from a counter-based generator and inverting the Euler map, so the
//! resident path storage is `O(M·d·(1 + |checkpoints|))` instead of
//! `O(M·N·d)`.

mod diffusion;
mod engine;
mod grid;
mod noise;
mod snapshot;
mod states;

pub use diffusion::{
    euler_step, inverse_euler_step, ArithmeticBrownian, Diffusion, GeneralDiffusion,
    GeometricBrownian, LinearGaussian, OrnsteinUhlenbeck,
};
pub use engine::{
    forward_sweep, forward_visit, PathEnsemble, RngCursor, SeedCheckpoint, StorageMode,
    StorageStats, SweepConfig, DEFAULT_BLOCK,
};
pub use grid::{TimeGrid, DEFAULT_CHECKPOINTS};
pub use noise::{CounterNoise, NoiseSource, RngKey, SeedStack};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_HEADER_LEN, SNAPSHOT_MAGIC};
pub use states::StateMatrix;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("non-finite state at step {step}{}", path.map(|p| format!(", path {p}")).unwrap_or_default())]
    NumericalOverflow { step: usize, path: Option<usize> },
    #[error("inverse Euler step is singular: {0}")]
    SingularInverse(String),
    #[error("unsupported diffusion: {0}")]
    UnsupportedSpec(String),
    #[error("step size rejected: {0}")]
    StepSizeGuard(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid RNG key: {0}")]
    InvalidKey(String),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
