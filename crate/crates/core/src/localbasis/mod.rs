//! Localization, hypercube partitions and truncated local least squares.

mod domain;
mod partition;
mod regression;

pub use domain::{brownian_radius, localize, LocalizationDomain, LocalizationRule};
pub use partition::{build_partition, build_partition_in, Cell, Partition, PartitionMode};
pub use regression::{regress, Basis, LocalFrame, RegressionEstimate, TruncationBounds};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegressionError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("regression target is not finite at path {index}")]
    NonFiniteTarget { index: usize },
    #[error("truncation bounds [{lo}, {hi}] are not an interval")]
    InvalidBounds { lo: f64, hi: f64 },
}

/// Smallest empirical cell probability of `partition`.
pub fn min_cell_probability_bound(partition: &Partition) -> f64 {
    partition.min_cell_probability()
}

/// Lower bound `ε·δ̲^d / (4t)^d` on the probability that a standard Brownian
/// motion at time `t` falls in any cell of edge at least `δ̲` inside the box
/// of radius [`brownian_radius`].
pub fn brownian_cell_probability_floor(t: f64, epsilon: f64, min_edge: f64, dim: usize) -> f64 {
    epsilon * min_edge.powi(dim as i32) / (4.0 * t).powi(dim as i32)
}
