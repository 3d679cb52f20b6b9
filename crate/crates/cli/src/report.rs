use crate::config::RunConfig;
use serde::Serialize;

/// Machine-readable summary of one run. Serialized with a fixed field order
/// and containing no timings, so identical inputs give identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub problem: String,
    pub rng_key: String,
    /// Unit of every value and gain in this report.
    pub value_unit: String,
    pub grid: GridReport,
    pub solver: SolverReport,
    pub storage: StorageReport,
    pub strategies: Vec<StrategyReport>,
    pub ordering: Vec<OrderingCheck>,
    pub market: Option<MarketReport>,
    pub localization_audit: Option<Vec<AuditRow>>,
    pub tables: Vec<String>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridReport {
    pub horizon_years: f64,
    pub steps: usize,
    pub step_size_years: f64,
    pub decision_steps: usize,
    pub checkpoints: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub paths: usize,
    pub cells: usize,
    pub regimes: usize,
    pub start_regime: usize,
    pub value_start: f64,
    pub standard_error_start: f64,
    /// `v̂(t₀, x₀, i)` for every starting regime `i`.
    pub values_t0: Vec<f64>,
    pub standard_errors_t0: Vec<f64>,
    pub actions_t0: Vec<u16>,
    pub min_cell_probability: f64,
    pub max_clamped_fraction: f64,
}

/// Path storage counters of the backward sweep, in stored `f64` values and
/// bytes.
#[derive(Debug, Clone, Serialize)]
pub struct StorageReport {
    pub peak_path_values: usize,
    pub peak_path_bytes: usize,
    pub full_storage_values: usize,
    pub snapshots: usize,
    pub cursor_bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyReport {
    pub name: String,
    pub paths: usize,
    pub mean_gain: f64,
    pub standard_error: f64,
    /// Entry `s`: paths that switched exactly `s` times.
    pub switch_histogram: Vec<usize>,
    /// Average regime coordinates after each decision date.
    pub mean_regime_path: Vec<Vec<f64>>,
    pub decision_times_years: Vec<f64>,
    /// Target regime of each decision date, for schedule strategies.
    pub schedule: Option<Vec<usize>>,
    pub yearly_price: Option<Vec<YearlyPrice>>,
    /// Rank correlation of terminal base-load capacity against the terminal
    /// peak-fuel price; `null` when either is constant.
    pub base_capacity_vs_peak_fuel_spearman: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct YearlyPrice {
    pub year: usize,
    pub median_eur_per_mwh: f64,
    pub q25_eur_per_mwh: f64,
    pub q75_eur_per_mwh: f64,
    pub iqr_eur_per_mwh: f64,
}

/// `value(better) ≥ value(worse) − 3·√(se_b² + se_w²)`.
#[derive(Debug, Clone, Serialize)]
pub struct OrderingCheck {
    pub better: String,
    pub worse: String,
    pub difference: f64,
    pub combined_standard_error: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarketReport {
    pub price_cap_eur_per_mwh: f64,
    pub initial_marginal_costs_eur_per_mwh: Vec<f64>,
    pub slices_checked: usize,
    pub price_bound_violations: usize,
    pub coverage_violations: usize,
    pub fleet_decreases: usize,
    /// The two largest local maxima of the year-0 128-bin price density of
    /// the optimal strategy, by mass.
    pub year0_modes: Vec<PriceMode>,
    pub year0_bimodal_near_initial_costs: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PriceMode {
    pub bin: usize,
    pub centre_eur_per_mwh: f64,
    pub mass: f64,
}

/// Brownian clamp audit at one step.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub step: usize,
    pub time_years: f64,
    pub radius: f64,
    pub mean_clamp_distance: f64,
    pub standard_error: f64,
    pub epsilon: f64,
    pub distance_within_epsilon: bool,
    pub min_cell_probability: Option<f64>,
    pub probability_floor: Option<f64>,
    pub floor_respected: Option<bool>,
}
