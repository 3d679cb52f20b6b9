//! Regression Monte Carlo for non-stationary optimal multiple switching.
//!
//! The crate is organised bottom-up:
//!
//! * [`pathgen`] simulates Euler paths, records checkpoints and replays the
//!   ensemble backward in time through the inverse Euler map, so the full
//!   trajectory matrix never has to be stored.
//! * [`localbasis`] localizes the state cloud, partitions it into hypercubes
//!   and computes truncated local least-squares conditional expectations.
//! * [`switching`] runs the backward dynamic programme over regimes, extracts
//!   decision rules, simulates policies out of sample and provides a lattice
//!   oracle for small one-dimensional instances.
//! * [`power`] instantiates the method on a structural electricity generation
//!   investment model (demand, availabilities, cointegrated fuel prices,
//!   merit-order spot price with scarcity premium).

pub mod localbasis;
pub mod numerics;
pub mod pathgen;
pub mod power;
pub mod switching;

pub use localbasis::{Basis, LocalizationRule, PartitionMode};
pub use pathgen::{
    CounterNoise, Diffusion, NoiseSource, PathEnsemble, PathError, RngKey, StateMatrix,
    StorageMode, SweepConfig, TimeGrid,
};
pub use switching::{
    backward_induction, simulate_policy, PolicySurface, RegimeSet, SolverConfig, SwitchingError,
    SwitchingProblem,
};
