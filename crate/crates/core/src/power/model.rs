use super::config::{Objective, PowerConfig, MAX_TECHNOLOGIES};
use super::market::{dispatch_into, marginal_costs, spot_price, MWH_PER_GW_YEAR};
use super::PowerError;
use crate::numerics::normal_cdf;
use crate::pathgen::LinearGaussian;
use crate::switching::{unravel, CostStructure, RegimeSet, SwitchingProblem};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Half days per year in the weekly-profile clock.
const HALF_DAYS_PER_YEAR: f64 = 730.0;

/// Exogenous market variables at one `(t, x)`, technologies in their
/// configured order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSlice {
    /// GW.
    pub demand: f64,
    pub availability: Vec<f64>,
    /// `S = (CO₂, fuel 1, …)`.
    pub prices: Vec<f64>,
    /// €/MWh.
    pub marginal_costs: Vec<f64>,
    pub merit_order: Vec<usize>,
}

/// Price and dispatch of one fleet at one slice, in merit order.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetOutcome {
    /// Demand `D` of the slice, GW.
    pub demand: f64,
    pub price: f64,
    pub capacities: Vec<f64>,
    pub costs: Vec<f64>,
    pub outputs: Vec<f64>,
    pub total_output: f64,
    /// Undiscounted operating profit of the whole fleet, €/year.
    pub profit_rate: f64,
    /// Undiscounted rate of the configured objective, €/year.
    pub objective_rate: f64,
}

/// Fixed-size copy of a slice for the per-regime hot loop.
struct Stack {
    n: usize,
    demand: f64,
    order: [usize; MAX_TECHNOLOGIES],
    avail: [f64; MAX_TECHNOLOGIES],
    costs: [f64; MAX_TECHNOLOGIES],
}

/// The generation investment problem: state
/// `x = (Z⁰, Z¹, …, Z^{d′}, log S⁰, …, log S^{d′})`, regimes the installed
/// fleet on a grid above the initial fleet.
#[derive(Debug, Clone)]
pub struct PowerModel {
    config: PowerConfig,
    regimes: RegimeSet,
    shape: Vec<usize>,
    /// Mesh-step multi-index of every regime, `q × d′` flat.
    steps: Vec<usize>,
}

/// Validate `config` and assemble the state diffusion and the switching
/// problem.
pub fn build_problem(
    config: &PowerConfig,
) -> Result<(Arc<LinearGaussian>, PowerModel), PowerError> {
    config.validate()?;
    let model = PowerModel::new(config.clone())?;
    Ok((Arc::new(model.diffusion()), model))
}

impl PowerModel {
    fn new(config: PowerConfig) -> Result<Self, PowerError> {
        let shape: Vec<usize> = config.fleet.max_steps.iter().map(|s| s + 1).collect();
        let regimes =
            RegimeSet::grid(&shape, &config.fleet.initial, config.fleet.mesh).map_err(|e| {
                PowerError::Config {
                    path: "fleet".into(),
                    message: e.to_string(),
                }
            })?;
        let steps = (0..regimes.len())
            .flat_map(|f| unravel(f, &shape))
            .collect();
        Ok(Self {
            config,
            regimes,
            shape,
            steps,
        })
    }

    pub fn config(&self) -> &PowerConfig {
        &self.config
    }

    pub fn technologies(&self) -> usize {
        self.shape.len()
    }

    /// Regime grid shape, `max_steps + 1` per technology.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// State dimension `2d′ + 2`: demand, `d′` availabilities and `d′ + 1`
    /// log prices.
    pub fn state_dim(&self) -> usize {
        2 * self.technologies() + 2
    }

    /// Linear Gaussian state dynamics: independent OU factors for demand and
    /// availabilities, cointegrated log prices.
    pub fn diffusion(&self) -> LinearGaussian {
        let c = &self.config;
        let d = self.technologies();
        let n = self.state_dim();
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n * n];
        let mut drift = vec![0.0; n];
        let mut x0 = vec![0.0; n];
        a[0] = -c.demand.alpha;
        b[0] = c.demand.beta;
        for i in 0..d {
            let k = 1 + i;
            a[k * n + k] = -c.availability.alpha[i];
            b[k * n + k] = c.availability.beta[i];
        }
        let xi = c.xi_matrix();
        let log0: Vec<f64> = c.fuel.initial.iter().map(|s| s.ln()).collect();
        let off = 1 + d;
        for i in 0..=d {
            let row = off + i;
            x0[row] = log0[i];
            let mut level = 0.0;
            for j in 0..=d {
                a[row * n + off + j] = xi[(i, j)];
                level += xi[(i, j)] * log0[j];
            }
            let s = c.fuel.sigma[i];
            drift[row] = -level - 0.5 * s * s;
            b[row * n + row] = s;
        }
        LinearGaussian::new(x0, a, drift, b)
    }

    /// Deterministic demand component `f₀(t)`, GW.
    pub fn seasonal_demand(&self, t: f64) -> f64 {
        let dm = &self.config.demand;
        let len = dm.week_profile.len();
        let half_day =
            ((t * HALF_DAYS_PER_YEAR + 1e-9).floor() as i64).rem_euclid(len as i64) as usize;
        dm.d1 + dm.d2 * (TAU * (t - dm.d3)).cos() + dm.week_profile[half_day]
    }

    fn stack(&self, t: f64, x: &[f64]) -> Stack {
        let c = &self.config;
        let n = self.technologies();
        let off = 1 + n;
        let mut st = Stack {
            n,
            demand: self.seasonal_demand(t) + x[0],
            order: [0; MAX_TECHNOLOGIES],
            avail: [0.0; MAX_TECHNOLOGIES],
            costs: [0.0; MAX_TECHNOLOGIES],
        };
        let co2 = x[off].exp();
        let mut raw = [0.0; MAX_TECHNOLOGIES];
        for i in 0..n {
            let av = &c.availability;
            let f = av.c1[i] + av.c2[i] * (TAU * (t - av.c3[i])).cos();
            st.avail[i] = av.a_min + (1.0 - av.a_min) * normal_cdf(f + x[1 + i]);
            raw[i] = c.fuel.emission_rates[i] * co2 + c.fuel.heat_rates[i] * x[off + 1 + i].exp();
        }
        // Stable insertion sort: ties keep the technology order.
        for i in 0..n {
            let mut k = i;
            while k > 0 && raw[st.order[k - 1]] > raw[i] {
                st.order[k] = st.order[k - 1];
                k -= 1;
            }
            st.order[k] = i;
        }
        for k in 0..n {
            st.costs[k] = raw[st.order[k]];
        }
        st
    }

    /// Undiscounted objective rate (€/year) of fleet `fleet` (GW,
    /// technology order) on a prepared stack.
    #[inline]
    fn rate(&self, st: &Stack, fleet: impl Fn(usize) -> f64) -> f64 {
        let n = st.n;
        let c = &self.config;
        let mut caps = [0.0; MAX_TECHNOLOGIES];
        let mut maint = [0.0; MAX_TECHNOLOGIES];
        for k in 0..n {
            let tech = st.order[k];
            let installed = fleet(tech);
            caps[k] = installed * st.avail[tech];
            maint[k] = c.costs.maintenance[tech] * installed;
        }
        let mk = &c.market;
        let price = spot_price(
            st.demand,
            &caps[..n],
            &st.costs[..n],
            mk.price_cap,
            mk.knit_scale,
        );
        let mut outputs = [0.0; MAX_TECHNOLOGIES];
        let mut profits = [0.0; MAX_TECHNOLOGIES];
        let (_, total) = dispatch_into(
            st.demand,
            &caps[..n],
            &st.costs[..n],
            price,
            &maint[..n],
            &mut outputs[..n],
            &mut profits[..n],
        );
        match c.objective {
            Objective::Fleet => total,
            Objective::NewCapacity => {
                let mut acc = 0.0;
                for k in 0..n {
                    let tech = st.order[k];
                    let added = fleet(tech) - c.fleet.initial[tech];
                    let out = (added * st.avail[tech]).min(outputs[k]);
                    acc += out * (price - st.costs[k]).max(0.0) * MWH_PER_GW_YEAR
                        - c.costs.maintenance[tech] * added;
                }
                acc
            }
        }
    }

    /// Exogenous variables at `(t, x)`.
    pub fn slice(&self, t: f64, x: &[f64]) -> MarketSlice {
        let n = self.technologies();
        let st = self.stack(t, x);
        let off = 1 + n;
        let prices: Vec<f64> = x[off..off + n + 1].iter().map(|l| l.exp()).collect();
        MarketSlice {
            demand: st.demand,
            availability: st.avail[..n].to_vec(),
            marginal_costs: marginal_costs(
                &prices,
                &self.config.fuel.emission_rates,
                &self.config.fuel.heat_rates,
            ),
            prices,
            merit_order: st.order[..n].to_vec(),
        }
    }

    /// Spot price and dispatch of regime `regime` at `(t, x)`.
    pub fn outcome(&self, t: f64, x: &[f64], regime: usize) -> FleetOutcome {
        let n = self.technologies();
        let st = self.stack(t, x);
        let fleet = self.regimes.get(regime);
        let caps: Vec<f64> = (0..n)
            .map(|k| fleet[st.order[k]] * st.avail[st.order[k]])
            .collect();
        let maint: Vec<f64> = (0..n)
            .map(|k| self.config.costs.maintenance[st.order[k]] * fleet[st.order[k]])
            .collect();
        let mk = &self.config.market;
        let price = spot_price(
            st.demand,
            &caps,
            &st.costs[..n],
            mk.price_cap,
            mk.knit_scale,
        );
        let mut outputs = vec![0.0; n];
        let mut profits = vec![0.0; n];
        let (total_output, profit_rate) = dispatch_into(
            st.demand,
            &caps,
            &st.costs[..n],
            price,
            &maint,
            &mut outputs,
            &mut profits,
        );
        let objective_rate = self.rate(&st, |tech| fleet[tech]);
        FleetOutcome {
            demand: st.demand,
            price,
            capacities: caps,
            costs: st.costs[..n].to_vec(),
            outputs,
            total_output,
            profit_rate,
            objective_rate,
        }
    }

    /// Spot price only, for diagnostics.
    pub fn price(&self, t: f64, x: &[f64], regime: usize) -> f64 {
        self.outcome(t, x, regime).price
    }

    fn discount(&self, t: f64) -> f64 {
        (-self.config.rho * t).exp()
    }
}

impl SwitchingProblem for PowerModel {
    fn regimes(&self) -> &RegimeSet {
        &self.regimes
    }

    fn discount_rate(&self) -> f64 {
        self.config.rho
    }

    fn profit(&self, t: f64, x: &[f64], regime: usize) -> f64 {
        let st = self.stack(t, x);
        let fleet = self.regimes.get(regime);
        self.discount(t) * self.rate(&st, |tech| fleet[tech])
    }

    fn profits(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let st = self.stack(t, x);
        let disc = self.discount(t);
        for (r, o) in out.iter_mut().enumerate() {
            let fleet = self.regimes.get(r);
            *o = disc * self.rate(&st, |tech| fleet[tech]);
        }
    }

    fn cost(&self, t: f64, from: usize, to: usize) -> f64 {
        if from == to {
            return 0.0;
        }
        let co = &self.config.costs;
        let d = self.technologies();
        let mesh = self.config.fleet.mesh;
        let (a, b) = (
            &self.steps[from * d..(from + 1) * d],
            &self.steps[to * d..(to + 1) * d],
        );
        let mut total = co.kappa_decision;
        for c in 0..d {
            if b[c] > a[c] {
                total +=
                    co.kappa_fixed_plus[c] + (b[c] - a[c]) as f64 * mesh * co.kappa_prop_plus[c];
            } else if b[c] < a[c] {
                if !co.dismantling {
                    return f64::INFINITY;
                }
                total +=
                    co.kappa_fixed_minus[c] + (a[c] - b[c]) as f64 * mesh * co.kappa_prop_minus[c];
            }
        }
        self.discount(t) * total
    }

    fn cost_structure(&self, t: f64) -> CostStructure {
        let co = &self.config.costs;
        if co.dismantling {
            return CostStructure::General;
        }
        let disc = self.discount(t);
        let mesh = self.config.fleet.mesh;
        CostStructure::Grid {
            shape: self.shape.clone(),
            fixed: co.kappa_fixed_plus.iter().map(|f| disc * f).collect(),
            proportional: co.kappa_prop_plus.iter().map(|p| disc * p * mesh).collect(),
            base: disc * co.kappa_decision,
        }
    }
}
