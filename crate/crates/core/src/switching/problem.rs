use super::SwitchingError;
use serde::{Deserialize, Serialize};

/// Finite regime set with an optional total order (listing order) used by
/// irreversible problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSet {
    regimes: Vec<Vec<f64>>,
    ordered: bool,
}

impl RegimeSet {
    pub fn new(regimes: Vec<Vec<f64>>, ordered: bool) -> Result<Self, SwitchingError> {
        if regimes.is_empty() {
            return Err(SwitchingError::InvalidRegimes(
                "at least one regime is required".into(),
            ));
        }
        let width = regimes[0].len();
        if regimes.iter().any(|r| r.len() != width) {
            return Err(SwitchingError::InvalidRegimes(
                "regimes must share one dimension".into(),
            ));
        }
        for (a, ra) in regimes.iter().enumerate() {
            for (b, rb) in regimes.iter().enumerate().skip(a + 1) {
                if ra == rb {
                    return Err(SwitchingError::InvalidRegimes(format!(
                        "regimes {a} and {b} are identical"
                    )));
                }
            }
        }
        if regimes.len() > u16::MAX as usize {
            return Err(SwitchingError::InvalidRegimes("too many regimes".into()));
        }
        Ok(Self { regimes, ordered })
    }

    /// Regimes `0, 1, …, q−1` labelled by their index.
    pub fn indexed(q: usize, ordered: bool) -> Result<Self, SwitchingError> {
        Self::new((0..q).map(|i| vec![i as f64]).collect(), ordered)
    }

    /// Product grid `{0..shape[0]} × … × {0..shape[d′−1]}` in row-major
    /// order, scaled by `mesh` and shifted by `origin`.
    pub fn grid(shape: &[usize], origin: &[f64], mesh: f64) -> Result<Self, SwitchingError> {
        let q: usize = shape.iter().product();
        let mut regimes = Vec::with_capacity(q);
        for flat in 0..q {
            let idx = unravel(flat, shape);
            regimes.push(
                idx.iter()
                    .zip(origin)
                    .map(|(&k, o)| o + k as f64 * mesh)
                    .collect(),
            );
        }
        Self::new(regimes, true)
    }

    pub fn len(&self) -> usize {
        self.regimes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regimes.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.regimes[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.regimes.iter().map(Vec::as_slice)
    }

    pub fn is_ordered(&self) -> bool {
        self.ordered
    }
}

/// Row-major multi-index of `flat` on a grid of `shape`.
pub fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for c in (0..shape.len()).rev() {
        idx[c] = flat % shape[c];
        flat /= shape[c];
    }
    idx
}

/// Structure of the switching costs at one date, used to pick the
/// maximisation routine. Values are already discounted.
#[derive(Debug, Clone, PartialEq)]
pub enum CostStructure {
    /// Only `cost(t, i, j)` is available.
    General,
    /// Switches only go up the regime order and `k(i, j) = k1[i] + k2[j]`
    /// for `j > i`.
    Separable { k1: Vec<f64>, k2: Vec<f64> },
    /// Product-grid regimes (row-major over `shape`), each component can
    /// only increase, and raising component `c` by `n` steps costs
    /// `fixed[c] + n·proportional[c]`. Costs add over components, plus
    /// `base` once per switch.
    Grid {
        shape: Vec<usize>,
        fixed: Vec<f64>,
        proportional: Vec<f64>,
        base: f64,
    },
}

/// Discounted optimal multiple switching problem.
///
/// `profit` and `cost` include the discount factor `e^{−ρt}`; inadmissible
/// switches have infinite cost.
pub trait SwitchingProblem: Send + Sync {
    fn regimes(&self) -> &RegimeSet;

    fn discount_rate(&self) -> f64;

    /// Discounted profit rate, per year.
    fn profit(&self, t: f64, x: &[f64], regime: usize) -> f64;

    /// Profit rates of all regimes at one state.
    fn profits(&self, t: f64, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.profit(t, x, i);
        }
    }

    /// Discounted cost of switching from `from` to `to` at `t`.
    fn cost(&self, t: f64, from: usize, to: usize) -> f64;

    /// Terminal value `g(T, x, i)`; zero unless overridden.
    fn terminal(&self, _t: f64, _x: &[f64], _regime: usize) -> f64 {
        0.0
    }

    fn cost_structure(&self, _t: f64) -> CostStructure {
        CostStructure::General
    }
}

/// Check the cost assumptions at `t = 0` and `t = horizon`: zero diagonal,
/// every admissible switch at least `κ > 0`, strict triangle inequality on
/// every triple whose two-leg route is admissible, and `ρ > 0`.
///
/// Returns the smallest off-diagonal cost `κ` seen.
pub fn validate<P: SwitchingProblem + ?Sized>(
    problem: &P,
    horizon: f64,
) -> Result<f64, SwitchingError> {
    let rho = problem.discount_rate();
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(SwitchingError::InvalidCosts(format!(
            "discount rate must be positive, got {rho}"
        )));
    }
    let q = problem.regimes().len();
    let mut kappa = f64::INFINITY;
    for &t in &[0.0, horizon] {
        let k: Vec<f64> = (0..q * q)
            .map(|ij| problem.cost(t, ij / q, ij % q))
            .collect();
        for i in 0..q {
            if k[i * q + i] != 0.0 {
                return Err(SwitchingError::InvalidCosts(format!(
                    "diagonal cost k({t}, {i}, {i}) = {} must be zero",
                    k[i * q + i]
                )));
            }
            for j in 0..q {
                let c = k[i * q + j];
                if i == j {
                    continue;
                }
                if c.is_nan() || c <= 0.0 {
                    return Err(SwitchingError::InvalidCosts(format!(
                        "every switch needs a positive fixed cost: k({t}, {i}, {j}) = {c}"
                    )));
                }
                kappa = kappa.min(c);
            }
        }
        for i in 0..q {
            for j in 0..q {
                if j == i || !k[i * q + j].is_finite() {
                    continue;
                }
                for l in 0..q {
                    if l == i || l == j {
                        continue;
                    }
                    let two_legs = k[i * q + j] + k[j * q + l];
                    if two_legs.is_finite() && !(k[i * q + l] < two_legs) {
                        return Err(SwitchingError::InvalidCosts(format!(
                            "triangle inequality fails for ({i}, {j}, {l}) at t = {t}: \
                             {} >= {} + {}",
                            k[i * q + l],
                            k[i * q + j],
                            k[j * q + l]
                        )));
                    }
                }
            }
        }
    }
    Ok(kappa)
}
