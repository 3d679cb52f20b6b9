use super::maxlayer::{fast_max_layer, reference_max_layer, Maximizer};
use super::terminal::{terminal_layer, TerminalRule};
use super::{SwitchingError, SwitchingProblem};
use crate::localbasis::{
    build_partition_in, Basis, LocalFrame, LocalizationRule, PartitionMode, RegressionEstimate,
    TruncationBounds,
};
use crate::numerics::mean_and_se;
use crate::pathgen::{PathEnsemble, StateMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How the clamp interval `[Γ_lo, Γ_hi]` of each regression is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TruncationRule {
    /// `±factor·max|y|` over the regressed targets of that step and regime.
    Auto {
        factor: f64,
    },
    Fixed {
        lo: f64,
        hi: f64,
    },
    Unbounded,
}

impl Default for TruncationRule {
    fn default() -> Self {
        TruncationRule::Auto { factor: 2.0 }
    }
}

impl TruncationRule {
    fn bounds(&self, y: &[f64]) -> TruncationBounds {
        match *self {
            TruncationRule::Auto { factor } => TruncationBounds::from_targets(y, factor),
            TruncationRule::Fixed { lo, hi } => TruncationBounds { lo, hi },
            TruncationRule::Unbounded => TruncationBounds::unbounded(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MaxMethod {
    /// Partial-maximum sweep when the costs declare a structure, else the
    /// quadratic loop.
    #[default]
    Auto,
    Fast,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub localization: LocalizationRule,
    pub partition: PartitionMode,
    pub cells: usize,
    pub basis: Basis,
    pub truncation: TruncationRule,
    pub terminal: TerminalRule,
    pub max_method: MaxMethod,
    /// Keep the per-regime estimates of every decision step, needed to apply
    /// the policy to fresh paths.
    pub keep_estimates: bool,
    /// Keep the `M × q` action matrix of every decision step.
    pub keep_actions: bool,
    /// Keep every layer of the recursion (profits, continuations, values,
    /// actions). Only meant for small instances.
    pub audit: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            localization: LocalizationRule::None,
            partition: PartitionMode::Adaptive,
            cells: 64,
            basis: Basis::Constant,
            truncation: TruncationRule::default(),
            terminal: TerminalRule::Problem,
            max_method: MaxMethod::Auto,
            keep_estimates: true,
            keep_actions: false,
            audit: false,
        }
    }
}

impl SolverConfig {
    pub fn with_cells(mut self, cells: usize) -> Self {
        self.cells = cells;
        self
    }

    pub fn with_localization(mut self, rule: LocalizationRule) -> Self {
        self.localization = rule;
        self
    }

    pub fn with_audit(mut self) -> Self {
        self.audit = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub cells: usize,
    pub min_cell_probability: f64,
    pub clamped_fraction: f64,
    pub min_edge: f64,
    pub max_edge: f64,
}

/// Every quantity entering the recursion at one step, path-major `M × q`.
#[derive(Debug, Clone)]
pub struct AuditLayer {
    pub step: usize,
    pub decision: bool,
    /// `h·f(t_n, x, j)`.
    pub profit: Vec<f64>,
    /// Truncated regression of the next-step value of regime `j`.
    pub continuation: Vec<f64>,
    pub values: Vec<f64>,
    pub actions: Vec<u16>,
}

/// Output of the backward induction.
#[derive(Debug, Clone)]
pub struct PolicySurface {
    pub(crate) regimes: usize,
    pub(crate) paths: usize,
    pub(crate) steps: usize,
    pub(crate) values_t0: Vec<f64>,
    pub(crate) se_t0: Vec<f64>,
    pub(crate) actions_t0: Vec<u16>,
    pub(crate) decision_steps: Vec<usize>,
    pub(crate) estimates: Vec<Vec<RegressionEstimate>>,
    pub(crate) actions: Vec<Vec<u16>>,
    pub(crate) terminal: Option<Vec<f64>>,
    pub(crate) audit: Vec<AuditLayer>,
    pub(crate) diagnostics: Vec<StepDiagnostics>,
}

impl PolicySurface {
    pub fn regimes(&self) -> usize {
        self.regimes
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `v̂(t₀, x₀, i)` for every starting regime.
    pub fn values_t0(&self) -> &[f64] {
        &self.values_t0
    }

    /// Monte Carlo standard error of [`Self::values_t0`]: spread of the
    /// regressed next-step values of the chosen regime over the ensemble.
    pub fn standard_errors_t0(&self) -> &[f64] {
        &self.se_t0
    }

    pub fn actions_t0(&self) -> &[u16] {
        &self.actions_t0
    }

    pub fn decision_steps(&self) -> &[usize] {
        &self.decision_steps
    }

    /// Per-regime continuation estimates of the `k`-th decision step, if kept.
    pub fn estimates(&self, k: usize) -> Option<&[RegressionEstimate]> {
        self.estimates.get(k).map(Vec::as_slice)
    }

    pub fn has_estimates(&self) -> bool {
        !self.estimates.is_empty()
    }

    /// Action matrix (`M × q`) of the `k`-th decision step, if kept.
    pub fn action_matrix(&self, k: usize) -> Option<&[u16]> {
        self.actions.get(k).map(Vec::as_slice)
    }

    pub fn action(&self, k: usize, path: usize, regime: usize) -> Option<usize> {
        self.action_matrix(k)
            .map(|a| a[path * self.regimes + regime] as usize)
    }

    /// Terminal layer, kept when auditing.
    pub fn terminal(&self) -> Option<&[f64]> {
        self.terminal.as_deref()
    }

    /// Audit layers in the order they were computed (`N−1` down to `0`).
    pub fn audit(&self) -> &[AuditLayer] {
        &self.audit
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    /// Compact binary form of the kept action matrices: magic `SWPA`,
    /// version, `M`, `q`, number of decision steps (all `u32` LE), then for
    /// each decision step its index (`u32`) and `M × q` `u16` LE actions.
    pub fn actions_to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"SWPA");
        for v in [
            1u32,
            self.paths as u32,
            self.regimes as u32,
            self.actions.len() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for (k, a) in self.actions.iter().enumerate() {
            out.extend_from_slice(&(self.decision_steps[k] as u32).to_le_bytes());
            for v in a {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// Run the backward recursion
/// `v̂(t_n, x, i) = max_j { h·f(t_n, x, j) − k(t_n, i, j) + Ê[v̂(t_{n+1}, ·, j) | x] }`
/// on the ensemble, replaying its paths from step `N` down to `0`.
///
/// Outside decision dates only `j = i` is allowed.
pub fn backward_induction<P: SwitchingProblem + ?Sized>(
    ensemble: &mut PathEnsemble,
    problem: &P,
    config: &SolverConfig,
) -> Result<PolicySurface, SwitchingError> {
    let q = problem.regimes().len();
    let m = ensemble.paths();
    if config.cells == 0 || config.cells > m {
        return Err(SwitchingError::InvalidConfig(format!(
            "{} cells requested for {m} paths",
            config.cells
        )));
    }
    let grid = ensemble.grid().clone();
    let n_steps = grid.steps();
    let h = grid.step_size();
    let spec = ensemble.spec().clone();

    let mut next = Vec::new();
    let mut cur = vec![0.0; m * q];
    let mut g = vec![0.0; m * q];
    let mut actions = vec![0u16; m * q];
    let mut surface = PolicySurface {
        regimes: q,
        paths: m,
        steps: n_steps,
        values_t0: vec![0.0; q],
        se_t0: vec![0.0; q],
        actions_t0: vec![0; q],
        decision_steps: Vec::new(),
        estimates: Vec::new(),
        actions: Vec::new(),
        terminal: None,
        audit: Vec::new(),
        diagnostics: Vec::with_capacity(n_steps),
    };

    ensemble.backward_sweep::<SwitchingError, _>(|n, states| {
        let t = grid.time(n);
        if n == n_steps {
            next = terminal_layer(states, t, problem, &config.terminal, spec.as_ref())?;
            if config.audit {
                surface.terminal = Some(next.clone());
            }
            return Ok(());
        }
        let decision = grid.is_decision(n);
        let (estimates, membership) =
            regress_layer(states, t, n, &next, q, config, &mut surface.diagnostics)?;
        let frame = estimates[0].frame().clone();
        let domain = frame.domain();
        let mut cont_audit = if config.audit {
            vec![0.0; m * q]
        } else {
            Vec::new()
        };
        let mut profit_audit = if config.audit {
            vec![0.0; m * q]
        } else {
            Vec::new()
        };

        // g_j = h·f(t_n, x, j) + Ê_j, and optionally its two terms.
        g.par_chunks_mut(q).enumerate().for_each_init(
            || (vec![0.0; states.dim()], vec![0.0; q]),
            |(x, f), (p, row)| {
                domain.clamp_into(states.row(p), x);
                problem.profits(t, x, f);
                let cell = membership[p] as usize;
                for j in 0..q {
                    row[j] = h * f[j] + estimates[j].value_in_cell(cell, x);
                }
            },
        );
        if config.audit {
            let mut x = vec![0.0; states.dim()];
            let mut f = vec![0.0; q];
            for p in 0..m {
                domain.clamp_into(states.row(p), &mut x);
                problem.profits(t, &x, &mut f);
                for j in 0..q {
                    profit_audit[p * q + j] = h * f[j];
                    cont_audit[p * q + j] = estimates[j].value_in_cell(membership[p] as usize, &x);
                }
            }
        }

        if decision {
            let maximizer =
                Maximizer::new(problem.cost_structure(t), q, |i, j| problem.cost(t, i, j));
            match (config.max_method, maximizer.supports_fast()) {
                (MaxMethod::Reference, _) | (MaxMethod::Auto, false) => {
                    reference_max_layer(&maximizer, &g, &mut cur, &mut actions)
                }
                _ => fast_max_layer(&maximizer, &g, &mut cur, &mut actions)?,
            }
        } else {
            cur.copy_from_slice(&g);
            for row in actions.chunks_mut(q) {
                row.iter_mut().enumerate().for_each(|(i, a)| *a = i as u16);
            }
        }

        if n == 0 {
            for i in 0..q {
                let j = actions[i] as usize;
                surface.values_t0[i] = crate::numerics::pairwise_sum(
                    &cur.iter().skip(i).step_by(q).copied().collect::<Vec<_>>(),
                ) / m as f64;
                surface.actions_t0[i] = j as u16;
                let col: Vec<f64> = next.iter().skip(j).step_by(q).copied().collect();
                surface.se_t0[i] = mean_and_se(&col).1;
            }
        }
        if decision {
            surface.decision_steps.push(n);
            if config.keep_estimates {
                surface.estimates.push(estimates);
            }
            if config.keep_actions {
                surface.actions.push(actions.clone());
            }
        }
        if config.audit {
            surface.audit.push(AuditLayer {
                step: n,
                decision,
                profit: profit_audit,
                continuation: cont_audit,
                values: cur.clone(),
                actions: actions.clone(),
            });
        }
        std::mem::swap(&mut next, &mut cur);
        if cur.len() != m * q {
            cur = vec![0.0; m * q];
        }
        Ok(())
    })?;

    surface.decision_steps.reverse();
    surface.estimates.reverse();
    surface.actions.reverse();
    surface.diagnostics.reverse();
    Ok(surface)
}

/// Per-regime truncated regressions of the next layer on the states of step `n`.
fn regress_layer(
    states: &StateMatrix,
    t: f64,
    n: usize,
    next: &[f64],
    q: usize,
    config: &SolverConfig,
    diagnostics: &mut Vec<StepDiagnostics>,
) -> Result<(Vec<RegressionEstimate>, Vec<u32>), SwitchingError> {
    let m = states.rows();
    let domain = config.localization.domain(t, states);
    let wrap = |regime| {
        move |source| SwitchingError::Regression {
            step: n,
            regime,
            source,
        }
    };
    let partition =
        build_partition_in(states, &domain, config.cells, config.partition).map_err(wrap(0))?;
    let (min_edge, max_edge) = partition.edge_range();
    diagnostics.push(StepDiagnostics {
        step: n,
        cells: partition.len(),
        min_cell_probability: partition.min_cell_probability(),
        clamped_fraction: domain.clamped_fraction(states),
        min_edge,
        max_edge,
    });
    let (frame, membership) =
        LocalFrame::prepare(states, domain, partition, config.basis).map_err(wrap(0))?;
    let estimates = (0..q)
        .into_par_iter()
        .map(|j| {
            let y: Vec<f64> = (0..m).map(|p| next[p * q + j]).collect();
            let bounds = config.truncation.bounds(&y);
            frame.fit(states, &membership, &y, bounds).map_err(wrap(j))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((estimates, membership))
}
