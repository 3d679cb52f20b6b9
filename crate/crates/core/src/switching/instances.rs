use super::problem::{CostStructure, RegimeSet, SwitchingProblem};
use crate::pathgen::{ArithmeticBrownian, Diffusion, OrnsteinUhlenbeck, PathError, TimeGrid};
use std::sync::Arc;

/// Regimes with affine profit rates `e^{−ρt}(a_i + b_i·x₀)` in the first
/// state coordinate and costs `e^{−ρt}(fixed + proportional·|j − i|)`.
///
/// With `irreversible`, only switches to a higher index are admissible and
/// the costs are declared separable.
#[derive(Debug, Clone)]
pub struct LinearRegimes {
    pub regimes: RegimeSet,
    pub rho: f64,
    pub offsets: Vec<f64>,
    pub slopes: Vec<f64>,
    pub fixed: f64,
    pub proportional: f64,
    pub irreversible: bool,
    /// Terminal value `e^{−ρT}·terminal_slopes[i]·x₀`.
    pub terminal_slopes: Vec<f64>,
}

impl LinearRegimes {
    pub fn new(offsets: Vec<f64>, slopes: Vec<f64>, fixed: f64, rho: f64) -> Self {
        let q = offsets.len();
        assert_eq!(q, slopes.len(), "one slope per regime");
        Self {
            regimes: RegimeSet::indexed(q, false).expect("at least one regime"),
            rho,
            offsets,
            slopes,
            fixed,
            proportional: 0.0,
            irreversible: false,
            terminal_slopes: vec![0.0; q],
        }
    }

    pub fn irreversible(mut self, proportional: f64) -> Self {
        self.irreversible = true;
        self.proportional = proportional;
        self.regimes = RegimeSet::indexed(self.offsets.len(), true).expect("at least one regime");
        self
    }

    pub fn with_fixed_cost(mut self, fixed: f64) -> Self {
        self.fixed = fixed;
        self
    }

    pub fn with_terminal_slopes(mut self, slopes: Vec<f64>) -> Self {
        self.terminal_slopes = slopes;
        self
    }
}

impl SwitchingProblem for LinearRegimes {
    fn regimes(&self) -> &RegimeSet {
        &self.regimes
    }

    fn discount_rate(&self) -> f64 {
        self.rho
    }

    fn profit(&self, t: f64, x: &[f64], regime: usize) -> f64 {
        (-self.rho * t).exp() * (self.offsets[regime] + self.slopes[regime] * x[0])
    }

    fn profits(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let disc = (-self.rho * t).exp();
        for (i, o) in out.iter_mut().enumerate() {
            *o = disc * (self.offsets[i] + self.slopes[i] * x[0]);
        }
    }

    fn cost(&self, t: f64, from: usize, to: usize) -> f64 {
        if from == to {
            0.0
        } else if self.irreversible && to < from {
            f64::INFINITY
        } else {
            (-self.rho * t).exp() * (self.fixed + self.proportional * from.abs_diff(to) as f64)
        }
    }

    fn terminal(&self, t: f64, x: &[f64], regime: usize) -> f64 {
        (-self.rho * t).exp() * self.terminal_slopes[regime] * x[0]
    }

    fn cost_structure(&self, t: f64) -> CostStructure {
        if !self.irreversible {
            return CostStructure::General;
        }
        let disc = (-self.rho * t).exp();
        let q = self.offsets.len();
        CostStructure::Separable {
            k1: (0..q)
                .map(|i| disc * (self.fixed - self.proportional * i as f64))
                .collect(),
            k2: (0..q)
                .map(|j| disc * self.proportional * j as f64)
                .collect(),
        }
    }
}

/// A diffusion, grid and switching problem bundled together.
#[derive(Clone)]
pub struct ToyInstance {
    pub spec: Arc<dyn Diffusion>,
    pub grid: TimeGrid,
    pub problem: LinearRegimes,
}

impl std::fmt::Debug for ToyInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToyInstance")
            .field("grid", &self.grid)
            .field("problem", &self.problem)
            .finish()
    }
}

impl ToyInstance {
    /// OU state (α = 1, μ = 0, β = 1, x₀ = 0) on `[0, 1]` with 10 steps,
    /// regimes "off" (profit 0) and "on" (profit `x`), switching cost 0.05
    /// both ways, ρ = 0.5.
    pub fn ou_test() -> Self {
        Self::ou_with(1.0, 10).expect("valid grid")
    }

    /// The OU test problem over horizon `horizon` with `steps` steps.
    pub fn ou_with(horizon: f64, steps: usize) -> Result<Self, PathError> {
        Ok(Self {
            spec: Arc::new(OrnsteinUhlenbeck::scalar(0.0, 1.0, 0.0, 1.0)),
            grid: TimeGrid::new(horizon, steps)?,
            problem: LinearRegimes::new(vec![0.0, 0.0], vec![0.0, 1.0], 0.05, 0.5),
        })
    }

    /// Standard Brownian motion on `[0, 1]` with 10 steps and the
    /// regimes of [`Self::ou_test`].
    pub fn brownian_test() -> Self {
        Self {
            spec: Arc::new(ArithmeticBrownian::scalar(0.0, 0.0, 1.0)),
            grid: TimeGrid::new(1.0, 10).expect("valid grid"),
            problem: LinearRegimes::new(vec![0.0, 0.0], vec![0.0, 1.0], 0.05, 0.5),
        }
    }
}
