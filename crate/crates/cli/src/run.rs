use crate::config::{Checkpoints, LocalizationKind, ProblemKind, RunConfig};
use crate::report::*;
use crate::tables::{self, FleetRow, PriceHistograms};
use crate::CliError;
use optswitch::localbasis::{brownian_cell_probability_floor, brownian_radius, LocalizationRule};
use optswitch::numerics::{mean_and_se, spearman};
use optswitch::pathgen::{
    Diffusion, PathEnsemble, RngKey, StateMatrix, SweepConfig, TimeGrid, DEFAULT_CHECKPOINTS,
};
use optswitch::power::{build_problem, marginal_costs, merit_order, PowerModel};
use optswitch::switching::{
    backward_induction, brute_force_value, deterministic_schedule, simulate_policy, validate,
    GainDistribution, InstanceLimits, OracleConfig, Policy, RegimeSet, SimulationConfig,
    SolverConfig, SwitchingProblem, ToyInstance, TruncationRule,
};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; the rayon default when absent.
    pub workers: Option<usize>,
    /// Overrides `output.dir`.
    pub out: Option<PathBuf>,
    /// Fail the run when a market or fleet invariant is violated.
    pub assert_invariants: bool,
}

/// Wall-clock and process counters, kept out of the report so that the
/// report stays byte-reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub workers: usize,
    pub forward_seconds: f64,
    pub backward_seconds: f64,
    pub simulation_seconds: f64,
    pub total_seconds: f64,
    pub peak_resident_kib: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub report_json: String,
    pub timings: Timings,
    pub out_dir: PathBuf,
}

enum Instance {
    Power(Arc<optswitch::pathgen::LinearGaussian>, PowerModel),
    Toy(ToyInstance),
}

impl Instance {
    fn build(cfg: &RunConfig) -> Result<Self, CliError> {
        Ok(match cfg.problem {
            ProblemKind::Power => {
                let (spec, model) = build_problem(&cfg.power_config())?;
                Self::Power(spec, model)
            }
            ProblemKind::OuTest => Self::Toy(ToyInstance::ou_test()),
            ProblemKind::BrownianTest => Self::Toy(ToyInstance::brownian_test()),
        })
    }

    fn spec(&self) -> Arc<dyn Diffusion> {
        match self {
            Self::Power(spec, _) => spec.clone(),
            Self::Toy(t) => t.spec.clone(),
        }
    }

    fn problem(&self) -> &dyn SwitchingProblem {
        match self {
            Self::Power(_, model) => model,
            Self::Toy(t) => &t.problem,
        }
    }

    fn power(&self) -> Option<&PowerModel> {
        match self {
            Self::Power(_, model) => Some(model),
            Self::Toy(_) => None,
        }
    }

    /// Largest mean-reversion speed among the state coordinates.
    fn reversion(&self, kind: ProblemKind) -> f64 {
        match (self, kind) {
            (Self::Power(_, model), _) => {
                let c = model.config();
                let xi = c.xi_matrix();
                let fuel = (0..xi.nrows())
                    .map(|i| xi[(i, i)].abs())
                    .fold(0.0, f64::max);
                c.availability
                    .alpha
                    .iter()
                    .copied()
                    .fold(c.demand.alpha.max(fuel), f64::max)
            }
            (_, ProblemKind::OuTest) => 1.0,
            _ => 0.0,
        }
    }

    fn value_unit(&self) -> &'static str {
        match self {
            Self::Power(..) => "EUR",
            Self::Toy(_) => "1",
        }
    }

    fn regime_unit(&self) -> &'static str {
        match self {
            Self::Power(..) => "GW",
            Self::Toy(_) => "1",
        }
    }
}

/// Snapshot count keeping every replay segment short enough that the inverse
/// Euler map amplifies rounding by at most 10⁶: a coordinate reverting at
/// speed `α` grows errors by `(1 − αh)⁻¹` per inverse step.
pub fn auto_checkpoints(steps: usize, step_size: f64, reversion: f64) -> usize {
    let damp = 1.0 - reversion * step_size;
    if reversion <= 0.0 || damp <= 0.0 {
        return DEFAULT_CHECKPOINTS;
    }
    let segment = ((1e6f64).ln() / -damp.ln()).floor().max(1.0) as usize;
    steps
        .div_ceil(segment)
        .saturating_sub(1)
        .max(DEFAULT_CHECKPOINTS)
}

fn build_grid(cfg: &RunConfig, reversion: f64) -> Result<TimeGrid, CliError> {
    let n = cfg.steps();
    let mut grid = TimeGrid::new(cfg.grid.horizon, n)?;
    if let Some(every) = cfg.grid.decision_every {
        grid = grid.with_decisions_every(every);
    }
    let count = match cfg.grid.checkpoints {
        Checkpoints::Count(c) => c,
        Checkpoints::Keyword(_) => auto_checkpoints(n, cfg.step_size(), reversion),
    };
    Ok(grid.with_even_checkpoints(count))
}

fn solver_config(cfg: &RunConfig, spec: &dyn Diffusion) -> SolverConfig {
    let s = &cfg.solver;
    let localization = match s.localization {
        LocalizationKind::None => LocalizationRule::None,
        LocalizationKind::Empirical => LocalizationRule::Empirical { epsilon: s.epsilon },
        // The toy diffusions have unit volatility.
        LocalizationKind::Brownian => LocalizationRule::Brownian {
            epsilon: s.epsilon,
            center: spec.initial_state(),
            scale: 1.0,
        },
    };
    SolverConfig {
        localization,
        partition: s.partition,
        cells: s.cells,
        basis: s.basis,
        truncation: TruncationRule::Auto {
            factor: s.truncation_factor,
        },
        ..SolverConfig::default()
    }
}

/// Per-strategy accumulator fed by the simulation observer.
struct Collector<'a> {
    grid: &'a TimeGrid,
    set: &'a RegimeSet,
    power: Option<&'a PowerModel>,
    check_monotone: bool,
    prev: Option<Vec<u16>>,
    fleet_decreases: usize,
    fleet_rows: Vec<FleetRow>,
    prices: Option<PriceHistograms>,
    slices: usize,
    price_violations: usize,
    coverage_violations: usize,
    first_violation: Option<String>,
    peak_fuel: Vec<f64>,
    base_capacity: Vec<f64>,
    audit: Option<(f64, f64)>,
    audit_rows: Vec<AuditRow>,
}

impl<'a> Collector<'a> {
    fn new(grid: &'a TimeGrid, set: &'a RegimeSet, power: Option<&'a PowerModel>) -> Self {
        let prices = power.map(|m| {
            let years = grid.horizon().ceil().max(1.0) as usize;
            PriceHistograms::new(years, m.config().market.price_cap)
        });
        Self {
            grid,
            set,
            power,
            check_monotone: power.is_some_and(|m| !m.config().costs.dismantling),
            prev: None,
            fleet_decreases: 0,
            fleet_rows: Vec::new(),
            prices,
            slices: 0,
            price_violations: 0,
            coverage_violations: 0,
            first_violation: None,
            peak_fuel: Vec::new(),
            base_capacity: Vec::new(),
            audit: None,
            audit_rows: Vec::new(),
        }
    }

    fn flag(&mut self, message: impl FnOnce() -> String) {
        if self.first_violation.is_none() {
            self.first_violation = Some(message());
        }
    }

    fn observe(&mut self, n: usize, states: &StateMatrix, regimes: &[u16]) {
        let t = self.grid.time(n);
        let last = n == self.grid.steps();
        if let Some(prev) = &self.prev {
            let set = self.set;
            let bad = prev
                .iter()
                .zip(regimes)
                .filter(|(a, b)| {
                    set.get(**a as usize)
                        .iter()
                        .zip(set.get(**b as usize))
                        .any(|(x, y)| y < x)
                })
                .count();
            if self.check_monotone && bad > 0 {
                self.fleet_decreases += bad;
                self.flag(|| format!("installed capacity decreased at step {n}"));
            }
        }
        self.prev = Some(regimes.to_vec());
        if self.grid.is_decision(n) || last {
            self.fleet_rows
                .extend(tables::fleet_rows(self.set, n, t, regimes));
        }
        if let Some((epsilon, center)) = self.audit {
            if n > 0 {
                let r = brownian_radius(t, epsilon, states.dim());
                let d: Vec<f64> = states
                    .iter_rows()
                    .map(|x| {
                        x.iter()
                            .map(|v| ((v - center).abs() - r).max(0.0).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect();
                let (mean, se) = mean_and_se(&d);
                self.audit_rows.push(AuditRow {
                    step: n,
                    time_years: t,
                    radius: r,
                    mean_clamp_distance: mean,
                    standard_error: se,
                    epsilon,
                    distance_within_epsilon: mean <= epsilon + 2.0 * se,
                    min_cell_probability: None,
                    probability_floor: None,
                    floor_respected: None,
                });
            }
        }
        let Some(model) = self.power else { return };
        if last {
            let d = model.technologies();
            let f = &model.config().fuel;
            let s0 = marginal_costs(&f.initial, &f.emission_rates, &f.heat_rates);
            let order = merit_order(&s0);
            let (base, peak) = (order[0], order[d - 1]);
            for (x, &r) in states.iter_rows().zip(regimes) {
                self.peak_fuel.push(x[1 + d + 1 + peak].exp());
                self.base_capacity.push(self.set.get(r as usize)[base]);
            }
            return;
        }
        let cap = model.config().market.price_cap;
        let checks: Vec<(f64, bool, bool)> = (0..states.rows())
            .into_par_iter()
            .map(|p| {
                let o = model.outcome(t, states.row(p), regimes[p] as usize);
                let lo = o.costs.iter().copied().fold(f64::INFINITY, f64::min);
                let total = o.capacities.iter().fold(0.0, |acc, c| acc + c);
                let covered = o.total_output == o.demand.max(0.0).min(total);
                (o.price, o.price >= lo && o.price <= cap, covered)
            })
            .collect();
        let year =
            ((t + 1e-9).floor() as usize).min(self.prices.as_ref().map_or(0, |h| h.years() - 1));
        for (p, (price, bounded, covered)) in checks.into_iter().enumerate() {
            self.slices += 1;
            if let Some(h) = self.prices.as_mut() {
                h.add(year, price);
            }
            if !bounded {
                self.price_violations += 1;
                self.flag(|| format!("price {price} out of bounds at step {n}, path {p}"));
            }
            if !covered {
                self.coverage_violations += 1;
                self.flag(|| format!("dispatch does not cover demand at step {n}, path {p}"));
            }
        }
    }
}

struct StrategyRun<'a> {
    name: &'static str,
    gains: GainDistribution,
    schedule: Option<Vec<usize>>,
    collector: Collector<'a>,
}

fn simulate<'a>(
    name: &'static str,
    policy: Policy<'_>,
    inst: &Instance,
    grid: &'a TimeGrid,
    set: &'a RegimeSet,
    power: Option<&'a PowerModel>,
    sim: &SimulationConfig,
    audit: Option<(f64, f64)>,
) -> Result<StrategyRun<'a>, CliError> {
    let mut collector = Collector::new(grid, set, power);
    collector.audit = audit;
    let spec = inst.spec();
    let gains = simulate_policy(
        policy,
        spec.as_ref(),
        grid,
        inst.problem(),
        sim,
        |n, s, r| collector.observe(n, s, r),
    )?;
    let schedule = match policy {
        Policy::Schedule(s) => Some(s.to_vec()),
        _ => None,
    };
    Ok(StrategyRun {
        name,
        gains,
        schedule,
        collector,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn peak_resident_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// Solve, simulate the three strategies, write the report and tables.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build()?;
    let workers = pool.current_num_threads();
    pool.install(|| run_in_pool(cfg, opts, workers))
}

fn run_in_pool(cfg: &RunConfig, opts: &RunOptions, workers: usize) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    cfg.validate()?;
    let key: RngKey = cfg.resolve_key()?;
    let inst = Instance::build(cfg)?;
    let problem = inst.problem();
    let grid = build_grid(cfg, inst.reversion(cfg.problem))?;
    validate(problem, grid.horizon())?;
    let set = problem.regimes();
    let q = set.len();
    let start_regime = cfg.simulation.start_regime;
    if start_regime >= q {
        return Err(CliError::Config {
            path: "simulation.start_regime".into(),
            message: format!("must be below the number of regimes {q}"),
        });
    }
    let spec = inst.spec();
    let solver = solver_config(cfg, spec.as_ref());
    let m = cfg.solver.paths;

    let t0 = Instant::now();
    let mut ensemble = PathEnsemble::forward(
        spec.clone(),
        grid.clone(),
        &SweepConfig::new(m),
        key.derive("train"),
    )?;
    let forward_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let surface = backward_induction(&mut ensemble, problem, &solver)?;
    let backward_seconds = t1.elapsed().as_secs_f64();
    let storage = ensemble.storage();

    let t2 = Instant::now();
    let sim = SimulationConfig::new(cfg.simulation.paths, key.derive("simulation"), start_regime);
    let power = inst.power();
    let audit = (cfg.problem == ProblemKind::BrownianTest)
        .then(|| (cfg.solver.epsilon, spec.initial_state()[0]));
    let optimal = simulate(
        "optimal",
        Policy::Optimal(&surface),
        &inst,
        &grid,
        set,
        power,
        &sim,
        None,
    )?;
    let dates = grid.decision_dates();
    let schedule =
        deterministic_schedule(set, &optimal.gains.mean_regime, start_regime, |k, i, j| {
            problem.cost(grid.time(dates[k]), i, j).is_finite()
        });
    let deterministic = simulate(
        "deterministic-mean",
        Policy::Schedule(&schedule),
        &inst,
        &grid,
        set,
        power,
        &sim,
        None,
    )?;
    let stay = simulate(
        "do-nothing",
        Policy::Stay,
        &inst,
        &grid,
        set,
        power,
        &sim,
        audit,
    )?;
    let simulation_seconds = t2.elapsed().as_secs_f64();
    let runs = [optimal, deterministic, stay];

    let out_dir = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    std::fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let mut written = Vec::new();

    let strategies: Vec<StrategyReport> = runs
        .iter()
        .map(|r| StrategyReport {
            name: r.name.to_string(),
            paths: r.gains.gains.len(),
            mean_gain: r.gains.mean(),
            standard_error: r.gains.standard_error(),
            switch_histogram: r.gains.switch_histogram(),
            mean_regime_path: r.gains.mean_regime.clone(),
            decision_times_years: r
                .gains
                .decision_steps
                .iter()
                .map(|&n| grid.time(n))
                .collect(),
            schedule: r.schedule.clone(),
            yearly_price: r.collector.prices.as_ref().map(|h| {
                (0..h.years())
                    .map(|y| {
                        let (q25, q50, q75) =
                            (h.quantile(y, 0.25), h.quantile(y, 0.5), h.quantile(y, 0.75));
                        YearlyPrice {
                            year: y,
                            median_eur_per_mwh: q50,
                            q25_eur_per_mwh: q25,
                            q75_eur_per_mwh: q75,
                            iqr_eur_per_mwh: q75 - q25,
                        }
                    })
                    .collect()
            }),
            base_capacity_vs_peak_fuel_spearman: power.and_then(|_| {
                let rho = spearman(&r.collector.base_capacity, &r.collector.peak_fuel);
                rho.is_finite().then_some(rho)
            }),
        })
        .collect();

    let ordering: Vec<OrderingCheck> = [(0, 1), (1, 2)]
        .iter()
        .map(|&(a, b)| {
            let (sa, sb) = (&strategies[a], &strategies[b]);
            let difference = sa.mean_gain - sb.mean_gain;
            let combined = (sa.standard_error.powi(2) + sb.standard_error.powi(2)).sqrt();
            OrderingCheck {
                better: sa.name.clone(),
                worse: sb.name.clone(),
                difference,
                combined_standard_error: combined,
                holds: difference >= -3.0 * combined,
            }
        })
        .collect();

    let market = power.map(|model| {
        let c = model.config();
        let s0 = model.slice(0.0, &spec.initial_state()).marginal_costs;
        let hist = runs[0]
            .collector
            .prices
            .as_ref()
            .expect("power runs collect prices");
        let year0_modes: Vec<PriceMode> = hist
            .top_modes(0)
            .into_iter()
            .map(|(bin, mass)| {
                let (lo, hi) = hist.bin_edges(bin);
                PriceMode {
                    bin,
                    centre_eur_per_mwh: 0.5 * (lo + hi),
                    mass,
                }
            })
            .collect();
        let mut sorted_costs = s0.clone();
        sorted_costs.sort_by(f64::total_cmp);
        let bimodal = year0_modes.len() == 2 && {
            let mut centres: Vec<f64> = year0_modes.iter().map(|m| m.centre_eur_per_mwh).collect();
            centres.sort_by(f64::total_cmp);
            sorted_costs.len() >= 2
                && (centres[0] - sorted_costs[0]).abs() <= 10.0
                && (centres[1] - sorted_costs[1]).abs() <= 10.0
        };
        MarketReport {
            price_cap_eur_per_mwh: c.market.price_cap,
            initial_marginal_costs_eur_per_mwh: s0,
            slices_checked: runs.iter().map(|r| r.collector.slices).sum(),
            price_bound_violations: runs.iter().map(|r| r.collector.price_violations).sum(),
            coverage_violations: runs.iter().map(|r| r.collector.coverage_violations).sum(),
            fleet_decreases: runs.iter().map(|r| r.collector.fleet_decreases).sum(),
            year0_modes,
            year0_bimodal_near_initial_costs: bimodal,
        }
    });

    let localization_audit = (cfg.problem == ProblemKind::BrownianTest).then(|| {
        let mut rows = runs[2].collector.audit_rows.clone();
        for row in rows.iter_mut() {
            if let Some(diag) = surface.diagnostics().iter().find(|d| d.step == row.step) {
                let floor =
                    brownian_cell_probability_floor(row.time_years, row.epsilon, diag.min_edge, 1);
                row.min_cell_probability = Some(diag.min_cell_probability);
                row.probability_floor = Some(floor);
                row.floor_respected = Some(diag.min_cell_probability >= floor);
            }
        }
        rows
    });

    let out = &cfg.output;
    if out.strategy_tables {
        let fleet: Vec<(&str, &[FleetRow])> = runs
            .iter()
            .map(|r| (r.name, r.collector.fleet_rows.as_slice()))
            .collect();
        let p = out_dir.join("strategy_fleet.csv");
        tables::write_fleet_paths(&p, inst.regime_unit(), &fleet)?;
        written.push("strategy_fleet.csv".to_string());
        let finals: Vec<(&str, &[u16])> = runs
            .iter()
            .map(|r| (r.name, r.gains.final_regimes.as_slice()))
            .collect();
        let p = out_dir.join("terminal_fleet.csv");
        tables::write_terminal_fleet(&p, set, inst.regime_unit(), &finals)?;
        written.push("terminal_fleet.csv".to_string());
        if power.is_some() {
            let joint: Vec<(&str, &[u16], &[f64])> = runs
                .iter()
                .map(|r| {
                    (
                        r.name,
                        r.gains.final_regimes.as_slice(),
                        r.collector.peak_fuel.as_slice(),
                    )
                })
                .collect();
            let p = out_dir.join("fleet_vs_peak_fuel.csv");
            tables::write_fleet_vs_fuel(&p, set, &joint)?;
            written.push("fleet_vs_peak_fuel.csv".to_string());
        }
    }
    if out.density_tables && power.is_some() {
        let hists: Vec<(&str, &PriceHistograms)> = runs
            .iter()
            .filter_map(|r| r.collector.prices.as_ref().map(|h| (r.name, h)))
            .collect();
        let p = out_dir.join("price_density.csv");
        tables::write_density(&p, &hists)?;
        written.push("price_density.csv".to_string());
    }
    if out.audit_tables {
        if let Some(rows) = &localization_audit {
            let p = out_dir.join("radius_audit.csv");
            tables::write_audit(&p, rows)?;
            written.push("radius_audit.csv".to_string());
        }
    }

    let diag = surface.diagnostics();
    let report = RunReport {
        problem: cfg.problem.name().to_string(),
        rng_key: key.to_hex(),
        value_unit: inst.value_unit().to_string(),
        grid: GridReport {
            horizon_years: grid.horizon(),
            steps: grid.steps(),
            step_size_years: grid.step_size(),
            decision_steps: dates.len(),
            checkpoints: grid.checkpoints().to_vec(),
        },
        solver: SolverReport {
            paths: m,
            cells: cfg.solver.cells,
            regimes: q,
            start_regime,
            value_start: surface.values_t0()[start_regime],
            standard_error_start: surface.standard_errors_t0()[start_regime],
            values_t0: surface.values_t0().to_vec(),
            standard_errors_t0: surface.standard_errors_t0().to_vec(),
            actions_t0: surface.actions_t0().to_vec(),
            min_cell_probability: diag
                .iter()
                .map(|d| d.min_cell_probability)
                .fold(f64::INFINITY, f64::min),
            max_clamped_fraction: diag.iter().map(|d| d.clamped_fraction).fold(0.0, f64::max),
        },
        storage: StorageReport {
            peak_path_values: storage.peak_values,
            peak_path_bytes: storage.peak_values * std::mem::size_of::<f64>(),
            full_storage_values: (grid.steps() + 1) * m * spec.dim(),
            snapshots: storage.snapshots,
            cursor_bytes: storage.cursor_bytes,
        },
        strategies,
        ordering,
        market,
        localization_audit,
        tables: written,
        config: resolved_echo(cfg),
    };
    let report_json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    let rp = out_dir.join("report.json");
    std::fs::write(&rp, &report_json).map_err(io_err(&rp))?;

    let timings = Timings {
        workers,
        forward_seconds,
        backward_seconds,
        simulation_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
        peak_resident_kib: peak_resident_kib(),
    };
    let tp = out_dir.join("timings.json");
    std::fs::write(
        &tp,
        serde_json::to_string_pretty(&timings).expect("timings serialize") + "\n",
    )
    .map_err(io_err(&tp))?;

    if opts.assert_invariants {
        let mut count = 0;
        let mut first = None;
        for r in &runs {
            let c = &r.collector;
            count += c.price_violations + c.coverage_violations + c.fleet_decreases;
            if first.is_none() {
                first = c.first_violation.clone();
            }
        }
        for o in &report.ordering {
            if !o.holds {
                count += 1;
                first.get_or_insert_with(|| {
                    format!(
                        "{} falls below {} by more than 3 standard errors",
                        o.better, o.worse
                    )
                });
            }
        }
        if let Some(rows) = &report.localization_audit {
            for row in rows {
                if !row.distance_within_epsilon || row.floor_respected == Some(false) {
                    count += 1;
                    first.get_or_insert_with(|| {
                        format!("localization audit fails at step {}", row.step)
                    });
                }
            }
        }
        if count > 0 {
            return Err(CliError::Invariant {
                count,
                first: first.unwrap_or_default(),
            });
        }
    }
    Ok(RunOutcome {
        report,
        report_json,
        timings,
        out_dir,
    })
}

/// The config as run, with the power parameters filled in.
fn resolved_echo(cfg: &RunConfig) -> RunConfig {
    let mut echo = cfg.clone();
    if cfg.problem == ProblemKind::Power {
        echo.power = Some(cfg.power_config());
    }
    echo
}

/// Lattice ground truth of a toy problem: `(lattice, table, values at x₀)`.
pub fn oracle_table(cfg: &RunConfig) -> Result<optswitch::switching::OracleValue, CliError> {
    cfg.validate()?;
    let inst = Instance::build(cfg)?;
    if cfg.problem == ProblemKind::Power {
        return Err(CliError::Config {
            path: "problem".into(),
            message: "the lattice oracle handles the one-dimensional toy problems only".into(),
        });
    }
    let grid = build_grid(cfg, inst.reversion(cfg.problem))?;
    let oc = OracleConfig {
        nodes: cfg.oracle.nodes,
        quadrature: cfg.oracle.quadrature,
        half_width: None,
        limits: InstanceLimits::default(),
    };
    Ok(brute_force_value(
        inst.spec().as_ref(),
        &grid,
        inst.problem(),
        &oc,
    )?)
}
