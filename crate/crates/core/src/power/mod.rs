//! Structural electricity generation investment model.
//!
//! An investor owning the whole fleet of `d′` technologies decides, at
//! discrete dates, how much capacity of each technology to add. Demand is a
//! seasonal profile plus an OU deviation; availabilities are normal-CDF
//! transforms of seasonal OU factors; fuel and CO₂ prices are cointegrated
//! geometric Brownian motions. The spot price follows the merit order,
//! knitted hyperbolically between consecutive marginal costs and towards the
//! price cap once the last technology is marginal. All monetary amounts are
//! in euros, capacities in GW and prices in €/MWh.

mod config;
mod market;
mod model;

pub use config::{
    AvailabilityConfig, CostConfig, DemandConfig, FleetConfig, FuelConfig, MarketConfig, Objective,
    PowerConfig, MAX_TECHNOLOGIES,
};
pub use market::{
    dispatch_into, dispatch_profit, knit, knit_parameter, marginal_costs, merit_order, spot_price,
    Dispatch, MWH_PER_GW_YEAR,
};
pub use model::{build_problem, FleetOutcome, MarketSlice, PowerModel};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("knitting needs y2 > y1, got y1 = {y1}, y2 = {y2}")]
    DegenerateKnit { y1: f64, y2: f64 },
}
