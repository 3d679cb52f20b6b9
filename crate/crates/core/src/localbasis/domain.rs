use crate::numerics::quantile_select;
use crate::pathgen::StateMatrix;
use serde::{Deserialize, Serialize};

/// How the clamp box of a step is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LocalizationRule {
    /// No clamping.
    #[default]
    None,
    /// Per-coordinate empirical quantiles at levels `ε/(2d)` and `1 − ε/(2d)`
    /// of the training states.
    Empirical { epsilon: f64 },
    /// Symmetric box `center ± scale·C(t, ε)` from the closed-form radius
    /// for a Brownian motion with volatility `scale`.
    Brownian {
        epsilon: f64,
        center: Vec<f64>,
        scale: f64,
    },
}

impl LocalizationRule {
    pub fn epsilon(&self) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Empirical { epsilon } | Self::Brownian { epsilon, .. } => *epsilon,
        }
    }

    /// Clamp box for the states observed at time `t`.
    pub fn domain(&self, t: f64, states: &StateMatrix) -> LocalizationDomain {
        let d = states.dim();
        match self {
            Self::None => LocalizationDomain::unbounded(d),
            Self::Empirical { epsilon } => {
                let level = (epsilon / (2.0 * d as f64)).clamp(0.0, 0.5);
                let mut lo = Vec::with_capacity(d);
                let mut hi = Vec::with_capacity(d);
                for j in 0..d {
                    let mut col = states.column(j);
                    lo.push(quantile_select(&mut col, level));
                    hi.push(quantile_select(&mut col, 1.0 - level));
                }
                LocalizationDomain {
                    lo,
                    hi,
                    epsilon: *epsilon,
                }
            }
            Self::Brownian {
                epsilon,
                center,
                scale,
            } => {
                let r = scale * brownian_radius(t, *epsilon, d);
                LocalizationDomain {
                    lo: center.iter().map(|c| c - r).collect(),
                    hi: center.iter().map(|c| c + r).collect(),
                    epsilon: *epsilon,
                }
            }
        }
    }
}

/// Radius `C(t, ε) = √(t·ln(8t / (π ε^{2/d})))` of the clamp box for a
/// standard `d`-dimensional Brownian motion, chosen so that
/// `E|W_t − clamp(W_t)| ≤ ε`. Zero when the logarithm is non-positive
/// (then `E|W_t| ≤ ε` already).
pub fn brownian_radius(t: f64, epsilon: f64, dim: usize) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let arg = 8.0 * t / (std::f64::consts::PI * epsilon.powf(2.0 / dim as f64));
    if arg <= 1.0 {
        0.0
    } else {
        (t * arg.ln()).sqrt()
    }
}

/// Axis-aligned clamp box at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub epsilon: f64,
}

impl LocalizationDomain {
    pub fn unbounded(dim: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
            epsilon: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    #[inline]
    pub fn clamp(&self, j: usize, v: f64) -> f64 {
        v.max(self.lo[j]).min(self.hi[j])
    }

    pub fn clamp_into(&self, x: &[f64], out: &mut [f64]) {
        for j in 0..x.len() {
            out[j] = self.clamp(j, x[j]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(j, &v)| v >= self.lo[j] && v <= self.hi[j])
    }

    /// Fraction of coordinates that fall outside the box.
    pub fn clamped_fraction(&self, states: &StateMatrix) -> f64 {
        let total = states.rows() * states.dim();
        if total == 0 {
            return 0.0;
        }
        let outside = states
            .iter_rows()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(j, &v)| v < self.lo[*j] || v > self.hi[*j])
                    .count()
            })
            .sum::<usize>();
        outside as f64 / total as f64
    }
}

/// Clamp every row of `states` into `domain`.
pub fn localize(states: &StateMatrix, domain: &LocalizationDomain) -> StateMatrix {
    let mut out = states.clone();
    let d = states.dim();
    for row in out.as_mut_slice().chunks_exact_mut(d.max(1)) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = domain.clamp(j, *v);
        }
    }
    out
}
