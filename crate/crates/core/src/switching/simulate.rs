use super::problem::RegimeSet;
use super::solver::PolicySurface;
use super::terminal::{terminal_layer, TerminalRule};
use super::{SwitchingError, SwitchingProblem};
use crate::numerics::{mean_and_se, pairwise_sum};
use crate::pathgen::{forward_visit, Diffusion, RngKey, StateMatrix, TimeGrid};
use rayon::prelude::*;

/// Strategy applied to fresh paths.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Switch to the argmax of the stored continuation estimates.
    Optimal(&'a PolicySurface),
    /// Deterministic target regime for each decision date, in date order.
    Schedule(&'a [usize]),
    /// Never switch.
    Stay,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub paths: usize,
    pub key: RngKey,
    pub start_regime: usize,
    pub terminal: TerminalRule,
}

impl SimulationConfig {
    pub fn new(paths: usize, key: RngKey, start_regime: usize) -> Self {
        Self {
            paths,
            key,
            start_regime,
            terminal: TerminalRule::Problem,
        }
    }
}

/// Realised discounted gains of a policy on fresh paths.
#[derive(Debug, Clone)]
pub struct GainDistribution {
    pub gains: Vec<f64>,
    pub switch_counts: Vec<u32>,
    pub final_regimes: Vec<u16>,
    pub decision_steps: Vec<usize>,
    /// Number of paths in each regime right after each decision date.
    pub occupancy: Vec<Vec<u32>>,
    /// Average regime vector right after each decision date.
    pub mean_regime: Vec<Vec<f64>>,
}

impl GainDistribution {
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.gains) / self.gains.len() as f64
    }

    pub fn standard_error(&self) -> f64 {
        mean_and_se(&self.gains).1
    }

    /// Histogram of switch counts: entry `s` is the number of paths that
    /// switched exactly `s` times.
    pub fn switch_histogram(&self) -> Vec<usize> {
        let max = self.switch_counts.iter().copied().max().unwrap_or(0) as usize;
        let mut hist = vec![0; max + 1];
        for &s in &self.switch_counts {
            hist[s as usize] += 1;
        }
        hist
    }
}

/// Simulate `policy` forward on `config.paths` fresh paths. `observer` sees
/// the states of every step together with the regime each path holds over
/// the following interval.
pub fn simulate_policy<P, O>(
    policy: Policy<'_>,
    spec: &dyn Diffusion,
    grid: &TimeGrid,
    problem: &P,
    config: &SimulationConfig,
    mut observer: O,
) -> Result<GainDistribution, SwitchingError>
where
    P: SwitchingProblem + ?Sized,
    O: FnMut(usize, &StateMatrix, &[u16]),
{
    let q = problem.regimes().len();
    let m = config.paths;
    if config.start_regime >= q {
        return Err(SwitchingError::InvalidConfig(format!(
            "start regime {} out of range for {q} regimes",
            config.start_regime
        )));
    }
    let decisions = grid.decision_dates();
    match policy {
        Policy::Optimal(surface) => {
            if !surface.has_estimates() || surface.decision_steps() != decisions.as_slice() {
                return Err(SwitchingError::InvalidConfig(
                    "policy surface lacks estimates for the decision dates of this grid".into(),
                ));
            }
        }
        Policy::Schedule(s) if s.len() != decisions.len() => {
            return Err(SwitchingError::InvalidConfig(format!(
                "schedule has {} entries for {} decision dates",
                s.len(),
                decisions.len()
            )));
        }
        _ => {}
    }
    let n_steps = grid.steps();
    let h = grid.step_size();
    let mut regimes = vec![config.start_regime as u16; m];
    let mut gains = vec![0.0; m];
    let mut switches = vec![0u32; m];
    let mut occupancy = Vec::new();
    let mut mean_regime = Vec::new();
    let mut k = 0;

    forward_visit::<SwitchingError, _>(spec, grid, m, config.key, |n, states| {
        let t = grid.time(n);
        if n == n_steps {
            let g = terminal_layer(states, t, problem, &config.terminal, spec)?;
            observer(n, states, &regimes);
            for p in 0..m {
                gains[p] += g[p * q + regimes[p] as usize];
            }
            return Ok(());
        }
        if grid.is_decision(n) {
            regimes
                .par_iter_mut()
                .zip(gains.par_iter_mut())
                .zip(switches.par_iter_mut())
                .enumerate()
                .for_each_init(
                    || (vec![0.0; states.dim()], vec![0.0; q]),
                    |(xl, f), (p, ((r, gain), sw))| {
                        let i = *r as usize;
                        let j = match policy {
                            Policy::Stay => i,
                            Policy::Schedule(s) => {
                                if problem.cost(t, i, s[k]).is_finite() {
                                    s[k]
                                } else {
                                    i
                                }
                            }
                            Policy::Optimal(surface) => {
                                let est = surface.estimates(k).expect("checked above");
                                let frame = est[0].frame();
                                frame.domain().clamp_into(states.row(p), xl);
                                let cell = frame.partition().locate(xl);
                                problem.profits(t, xl, f);
                                let value = |j: usize| h * f[j] + est[j].value_in_cell(cell, xl);
                                let (mut best, mut arg) = (value(i), i);
                                for j in 0..q {
                                    let c = problem.cost(t, i, j);
                                    if j != i && c.is_finite() {
                                        let cand = value(j) - c;
                                        if cand > best {
                                            best = cand;
                                            arg = j;
                                        }
                                    }
                                }
                                arg
                            }
                        };
                        if j != i {
                            *gain -= problem.cost(t, i, j);
                            *sw += 1;
                            *r = j as u16;
                        }
                    },
                );
            let mut occ = vec![0u32; q];
            regimes.iter().for_each(|&r| occ[r as usize] += 1);
            let width = problem.regimes().get(0).len();
            let mean: Vec<f64> = (0..width)
                .map(|c| {
                    let col: Vec<f64> = regimes
                        .iter()
                        .map(|&r| problem.regimes().get(r as usize)[c])
                        .collect();
                    pairwise_sum(&col) / m as f64
                })
                .collect();
            occupancy.push(occ);
            mean_regime.push(mean);
            k += 1;
        }
        observer(n, states, &regimes);
        gains
            .par_iter_mut()
            .zip(regimes.par_iter())
            .enumerate()
            .for_each(|(p, (gain, &r))| {
                *gain += h * problem.profit(t, states.row(p), r as usize);
            });
        Ok(())
    })?;

    Ok(GainDistribution {
        gains,
        switch_counts: switches,
        final_regimes: regimes,
        decision_steps: decisions,
        occupancy,
        mean_regime,
    })
}

/// Deterministic schedule following an average regime path: at each
/// decision date, the regime closest (Euclidean) to `mean_path[k]` among
/// those reachable from the previous scheduled regime. Ties go to the
/// smallest index.
pub fn deterministic_schedule(
    regimes: &RegimeSet,
    mean_path: &[Vec<f64>],
    start: usize,
    reachable: impl Fn(usize, usize, usize) -> bool,
) -> Vec<usize> {
    let mut current = start;
    let mut schedule = Vec::with_capacity(mean_path.len());
    for (k, target) in mean_path.iter().enumerate() {
        let mut best = (f64::INFINITY, current);
        for (j, r) in regimes.iter().enumerate() {
            if j != current && !reachable(k, current, j) {
                continue;
            }
            let d: f64 = r.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        current = best.1;
        schedule.push(current);
    }
    schedule
}
