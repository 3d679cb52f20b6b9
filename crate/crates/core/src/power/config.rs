//! Model configuration. Every field has an illustrative default; the numbers
//! that come from the published case study are the initial fuel costs
//! (40 and 80 €/MWh), fuel volatilities (5 % and 15 %), initial fleet
//! (67 and 33 GW), proportional build costs (0.24 and 2.00 bn€/GW) and the
//! initial demand of 70 GW. Everything else is a documented placeholder.

use super::PowerError;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Largest number of technologies handled by the stack routines.
pub const MAX_TECHNOLOGIES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    /// Discount rate ρ, 1/year.
    pub rho: f64,
    pub objective: Objective,
    pub demand: DemandConfig,
    pub availability: AvailabilityConfig,
    pub fuel: FuelConfig,
    pub fleet: FleetConfig,
    pub costs: CostConfig,
    pub market: MarketConfig,
}

/// Whose cash flows the investor maximises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Operating profit of the whole installed fleet.
    #[default]
    Fleet,
    /// Operating profit of the capacity added on top of the initial fleet
    /// only. New plants are dispatched before the older plants of the same
    /// technology; the price still reflects the whole fleet.
    NewCapacity,
}

/// `D_t = d1 + d2·cos(2π(t − d3)) + f_week(t) + Z⁰_t` with
/// `dZ⁰ = −α Z⁰ dt + β dW`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandConfig {
    /// GW.
    pub d1: f64,
    /// GW.
    pub d2: f64,
    /// Years.
    pub d3: f64,
    /// Weekly profile in GW, one value per half day starting Monday 00:00.
    pub week_profile: Vec<f64>,
    /// 1/year.
    pub alpha: f64,
    /// GW/√year.
    pub beta: f64,
}

/// `A_t^i = a_min + (1 − a_min)·Φ(c1 + c2·cos(2π(t − c3)) + Z^i_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AvailabilityConfig {
    pub a_min: f64,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub c3: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Prices `S = (S⁰, S¹, …, S^{d′})`, index 0 being CO₂, simulated through
/// their logarithms `L = log S`:
/// `dL = (Ξ(L − log S₀) − ½σ²) dt + diag(σ) dW`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuelConfig {
    /// €/t for CO₂, €/MWh-thermal-equivalent for fuels.
    pub initial: Vec<f64>,
    /// Lognormal volatilities, 1/√year.
    pub sigma: Vec<f64>,
    /// t/MWh.
    pub emission_rates: Vec<f64>,
    /// Dimensionless; fuel prices are quoted per MWh of output, hence 1.
    pub heat_rates: Vec<f64>,
    /// Reversion speed of the log spread between fuels 1 and 2, 1/year.
    pub coint_kappa: f64,
    /// Full `(d′+1) × (d′+1)` drift matrix overriding `coint_kappa`.
    pub xi: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetConfig {
    /// Installed capacity at `t = 0`, GW.
    pub initial: Vec<f64>,
    /// Regime grid spacing, GW.
    pub mesh: f64,
    /// Maximum number of mesh steps added to each technology.
    pub max_steps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostConfig {
    /// Charge per build decision, whatever is built, €.
    pub kappa_decision: f64,
    /// €, per technology built at a decision date.
    pub kappa_fixed_plus: Vec<f64>,
    /// €/GW.
    pub kappa_prop_plus: Vec<f64>,
    /// €, per technology dismantled at a decision date.
    pub kappa_fixed_minus: Vec<f64>,
    /// €/GW.
    pub kappa_prop_minus: Vec<f64>,
    /// €/(GW·year) of installed capacity.
    pub maintenance: Vec<f64>,
    pub dismantling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketConfig {
    /// Price cap M_max, €/MWh.
    pub price_cap: f64,
    /// Knitting parameter `a = knit_scale·(x₂ − x₁)·(y₂ − y₁)`.
    pub knit_scale: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            rho: 0.08,
            objective: Objective::Fleet,
            demand: DemandConfig::default(),
            availability: AvailabilityConfig::default(),
            fuel: FuelConfig::default(),
            fleet: FleetConfig::default(),
            costs: CostConfig::default(),
            market: MarketConfig::default(),
        }
    }
}

impl Default for DemandConfig {
    fn default() -> Self {
        let mut week_profile = vec![3.0; 10];
        week_profile.extend([0.0; 4]);
        Self {
            d1: 60.0,
            d2: 7.0,
            d3: 0.0,
            week_profile,
            alpha: 20.0,
            beta: 19.0,
        }
    }
}

impl Default for AvailabilityConfig {
    fn default() -> Self {
        Self {
            a_min: 0.01,
            c1: vec![1.28, 1.28],
            c2: vec![0.3, 0.3],
            c3: vec![0.0, 0.0],
            alpha: vec![10.0, 10.0],
            beta: vec![1.34, 1.34],
        }
    }
}

impl Default for FuelConfig {
    fn default() -> Self {
        Self {
            initial: vec![15.0, 34.0, 71.0],
            sigma: vec![0.30, 0.05, 0.15],
            emission_rates: vec![0.4, 0.6],
            heat_rates: vec![1.0, 1.0],
            coint_kappa: 0.3,
            xi: None,
        }
    }
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            initial: vec![67.0, 33.0],
            mesh: 1.0,
            max_steps: vec![30, 30],
        }
    }
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            kappa_decision: 1e6,
            kappa_fixed_plus: vec![1e7, 1e7],
            kappa_prop_plus: vec![0.24e9, 2.0e9],
            kappa_fixed_minus: vec![0.0, 0.0],
            kappa_prop_minus: vec![0.0, 0.0],
            maintenance: vec![0.0, 0.0],
            dismantling: false,
        }
    }
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            price_cap: 3000.0,
            knit_scale: 1e-3,
        }
    }
}

fn err(path: &str, message: impl Into<String>) -> PowerError {
    PowerError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

fn check_len(path: &str, v: &[f64], n: usize) -> Result<(), PowerError> {
    if v.len() != n {
        return Err(err(path, format!("expected {n} entries, got {}", v.len())));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(err(path, format!("entries must be finite, got {x}")));
    }
    Ok(())
}

fn check_nonneg(path: &str, v: &[f64]) -> Result<(), PowerError> {
    match v.iter().find(|&&x| x < 0.0) {
        Some(x) => Err(err(path, format!("entries must be nonnegative, got {x}"))),
        None => Ok(()),
    }
}

impl PowerConfig {
    /// Number of technologies `d′`.
    pub fn technologies(&self) -> usize {
        self.fleet.initial.len()
    }

    /// Drift matrix Ξ acting on log prices: the configured override, or
    /// rank-one reversion of the spread `L² − L¹` between the first two
    /// fuels at rate `coint_kappa`, split evenly between the two legs.
    pub fn xi_matrix(&self) -> DMatrix<f64> {
        let n = self.fuel.initial.len();
        if let Some(rows) = &self.fuel.xi {
            return DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        }
        let mut xi = DMatrix::zeros(n, n);
        if n >= 3 {
            // Spread direction w between fuels 1 and 2 only: Ξ = −(κ/2)·w·wᵀ.
            let k = 0.5 * self.fuel.coint_kappa;
            xi[(1, 1)] = -k;
            xi[(1, 2)] = k;
            xi[(2, 1)] = k;
            xi[(2, 2)] = -k;
        }
        xi
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        let d = self.technologies();
        if d == 0 || d > MAX_TECHNOLOGIES {
            return Err(err(
                "fleet.initial",
                format!("between 1 and {MAX_TECHNOLOGIES} technologies, got {d}"),
            ));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(err(
                "rho",
                format!("discount rate must be positive, got {}", self.rho),
            ));
        }

        let dm = &self.demand;
        for (name, v) in [
            ("demand.d1", dm.d1),
            ("demand.d2", dm.d2),
            ("demand.d3", dm.d3),
        ] {
            if !v.is_finite() {
                return Err(err(name, "must be finite"));
            }
        }
        if dm.week_profile.is_empty() {
            return Err(err(
                "demand.week_profile",
                "needs at least one half-day value",
            ));
        }
        check_len(
            "demand.week_profile",
            &dm.week_profile,
            dm.week_profile.len(),
        )?;
        if !(dm.alpha >= 0.0 && dm.alpha.is_finite()) {
            return Err(err("demand.alpha", "must be nonnegative"));
        }
        if !(dm.beta >= 0.0 && dm.beta.is_finite()) {
            return Err(err("demand.beta", "must be nonnegative"));
        }

        let av = &self.availability;
        if !(av.a_min > 0.0 && av.a_min < 1.0) {
            return Err(err(
                "availability.a_min",
                format!("must lie in (0, 1), got {}", av.a_min),
            ));
        }
        check_len("availability.c1", &av.c1, d)?;
        check_len("availability.c2", &av.c2, d)?;
        check_len("availability.c3", &av.c3, d)?;
        check_len("availability.alpha", &av.alpha, d)?;
        check_len("availability.beta", &av.beta, d)?;
        check_nonneg("availability.alpha", &av.alpha)?;
        check_nonneg("availability.beta", &av.beta)?;

        let fu = &self.fuel;
        check_len("fuel.initial", &fu.initial, d + 1)?;
        if let Some(x) = fu.initial.iter().find(|&&x| x <= 0.0) {
            return Err(err(
                "fuel.initial",
                format!("prices must be positive, got {x}"),
            ));
        }
        check_len("fuel.sigma", &fu.sigma, d + 1)?;
        check_nonneg("fuel.sigma", &fu.sigma)?;
        check_len("fuel.emission_rates", &fu.emission_rates, d)?;
        check_nonneg("fuel.emission_rates", &fu.emission_rates)?;
        check_len("fuel.heat_rates", &fu.heat_rates, d)?;
        check_nonneg("fuel.heat_rates", &fu.heat_rates)?;
        if !(fu.coint_kappa >= 0.0 && fu.coint_kappa.is_finite()) {
            return Err(err("fuel.coint_kappa", "must be nonnegative"));
        }
        if let Some(rows) = &fu.xi {
            if rows.len() != d + 1 || rows.iter().any(|r| r.len() != d + 1) {
                return Err(err("fuel.xi", format!("must be a {0} × {0} matrix", d + 1)));
            }
            if rows.iter().flatten().any(|x| !x.is_finite()) {
                return Err(err("fuel.xi", "entries must be finite"));
            }
        }
        let rank = self.xi_matrix().rank(1e-12);
        if d >= 2 && !(1..d).contains(&rank) {
            return Err(err(
                "fuel.xi",
                format!("rank must lie in [1, {}), got {rank}", d),
            ));
        }
        if d == 1 && rank != 0 {
            return Err(err(
                "fuel.xi",
                format!("rank must be below 1 with a single technology, got {rank}"),
            ));
        }

        let fl = &self.fleet;
        check_len("fleet.initial", &fl.initial, d)?;
        check_nonneg("fleet.initial", &fl.initial)?;
        if !(fl.mesh > 0.0 && fl.mesh.is_finite()) {
            return Err(err(
                "fleet.mesh",
                format!("must be positive, got {}", fl.mesh),
            ));
        }
        if fl.max_steps.len() != d {
            return Err(err(
                "fleet.max_steps",
                format!("expected {d} entries, got {}", fl.max_steps.len()),
            ));
        }
        let q: usize = fl.max_steps.iter().map(|s| s + 1).product();
        if q > u16::MAX as usize {
            return Err(err(
                "fleet.max_steps",
                format!("regime grid has {q} points, at most {} allowed", u16::MAX),
            ));
        }

        let co = &self.costs;
        if !(co.kappa_decision >= 0.0 && co.kappa_decision.is_finite()) {
            return Err(err("costs.kappa_decision", "must be nonnegative"));
        }
        if d >= 2 && co.kappa_decision <= 0.0 {
            return Err(err(
                "costs.kappa_decision",
                "must be positive with several technologies, otherwise building two technologies \
                 at once costs exactly as much as building them one after the other",
            ));
        }
        check_len("costs.kappa_fixed_plus", &co.kappa_fixed_plus, d)?;
        check_len("costs.kappa_prop_plus", &co.kappa_prop_plus, d)?;
        check_len("costs.kappa_fixed_minus", &co.kappa_fixed_minus, d)?;
        check_len("costs.kappa_prop_minus", &co.kappa_prop_minus, d)?;
        check_len("costs.maintenance", &co.maintenance, d)?;
        check_nonneg("costs.kappa_prop_plus", &co.kappa_prop_plus)?;
        check_nonneg("costs.kappa_prop_minus", &co.kappa_prop_minus)?;
        check_nonneg("costs.maintenance", &co.maintenance)?;
        if let Some(x) = co.kappa_fixed_plus.iter().find(|&&x| x <= 0.0) {
            return Err(err(
                "costs.kappa_fixed_plus",
                format!("building costs must be positive, got {x}"),
            ));
        }
        if co.dismantling {
            if let Some(x) = co.kappa_fixed_minus.iter().find(|&&x| x <= 0.0) {
                return Err(err(
                    "costs.kappa_fixed_minus",
                    format!(
                        "dismantling costs must be positive when dismantling is enabled, got {x}"
                    ),
                ));
            }
        }

        let mk = &self.market;
        let s0 = super::market::marginal_costs(&fu.initial, &fu.emission_rates, &fu.heat_rates);
        let top = s0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(mk.price_cap > top && mk.price_cap.is_finite()) {
            return Err(err(
                "market.price_cap",
                format!("must exceed the initial marginal costs (max {top})"),
            ));
        }
        if !(mk.knit_scale > 0.0 && mk.knit_scale.is_finite()) {
            return Err(err("market.knit_scale", "must be positive"));
        }
        Ok(())
    }
}
