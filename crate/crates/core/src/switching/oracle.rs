//! Exact dynamic programming on a state lattice for one-dimensional
//! problems, used as ground truth for the regression solver.
//!
//! The Euler transition from a lattice node is Gaussian, so the conditional
//! expectation is integrated with Gauss–Hermite quadrature and the next-step
//! value is read off the lattice through a natural cubic spline (linear
//! beyond the end nodes).

use super::{SwitchingError, SwitchingProblem};
use crate::pathgen::{Diffusion, TimeGrid};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceLimits {
    pub max_steps: usize,
    pub max_regimes: usize,
    pub max_nodes: usize,
}

impl Default for InstanceLimits {
    fn default() -> Self {
        Self {
            max_steps: 12,
            max_regimes: 3,
            max_nodes: 51,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub nodes: usize,
    pub quadrature: usize,
    /// Half width of the lattice around `x₀`. Defaults to five standard
    /// deviations plus the largest mean excursion, both propagated through
    /// the Euler map linearised around the mean.
    pub half_width: Option<f64>,
    pub limits: InstanceLimits,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            nodes: 21,
            quadrature: 64,
            half_width: None,
            limits: InstanceLimits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    /// Value at `(t₀, x₀)` for every starting regime.
    pub values: Vec<f64>,
    pub lattice: Vec<f64>,
    /// Value at `t₀` on every lattice node, `table[node][regime]`.
    pub table: Vec<Vec<f64>>,
}

/// Nodes and weights of the `n`-point Gauss–Hermite rule for the standard
/// normal law (weights sum to one), by the Golub–Welsch eigenvalue method.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Natural cubic spline through `(lattice[k], values[k·stride + offset])`
/// on a uniform lattice, extended linearly beyond the end nodes.
struct Spline {
    lo: f64,
    step: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(lattice: &[f64], values: &[f64], stride: usize, offset: usize) -> Self {
        let n = lattice.len();
        let y: Vec<f64> = (0..n).map(|k| values[k * stride + offset]).collect();
        let step = if n > 1 { lattice[1] - lattice[0] } else { 1.0 };
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for m[k−1] + 4m[k] + m[k+1] = 6Δ²y[k] / step².
            let inner = n - 2;
            let mut c = vec![0.0; inner];
            let mut d = vec![0.0; inner];
            for k in 0..inner {
                let rhs = 6.0 * (y[k] - 2.0 * y[k + 1] + y[k + 2]) / (step * step);
                let denom = 4.0 - if k > 0 { c[k - 1] } else { 0.0 };
                c[k] = 1.0 / denom;
                d[k] = (rhs - if k > 0 { d[k - 1] } else { 0.0 }) / denom;
            }
            for k in (0..inner).rev() {
                m[k + 1] = d[k] - if k + 1 < inner { c[k] * m[k + 2] } else { 0.0 };
            }
        }
        Self {
            lo: lattice[0],
            step,
            y,
            m,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        if n == 1 {
            return self.y[0];
        }
        let h = self.step;
        let pos = (x - self.lo) / h;
        if pos <= 0.0 {
            let slope = (self.y[1] - self.y[0]) / h - h * (2.0 * self.m[0] + self.m[1]) / 6.0;
            return self.y[0] + slope * (x - self.lo);
        }
        if pos >= (n - 1) as f64 {
            let slope = (self.y[n - 1] - self.y[n - 2]) / h
                + h * (self.m[n - 2] + 2.0 * self.m[n - 1]) / 6.0;
            return self.y[n - 1] + slope * (x - self.lo - (n - 1) as f64 * h);
        }
        let k = (pos.floor() as usize).min(n - 2);
        let b = pos - k as f64;
        let a = 1.0 - b;
        a * self.y[k]
            + b * self.y[k + 1]
            + ((a * a * a - a) * self.m[k] + (b * b * b - b) * self.m[k + 1]) * h * h / 6.0
    }
}

fn default_half_width(spec: &dyn Diffusion, grid: &TimeGrid) -> f64 {
    let h = grid.step_size();
    let x0 = spec.initial_state()[0];
    let (mut mean, mut var) = (x0, 0.0_f64);
    let (mut sd_max, mut shift_max) = (0.0_f64, 0.0_f64);
    let (mut b, mut b_up, mut sig) = ([0.0], [0.0], [0.0]);
    for n in 0..grid.steps() {
        let t = grid.time(n);
        let bump = 1e-6 * (1.0 + mean.abs());
        spec.drift(t, &[mean], &mut b);
        spec.drift(t, &[mean + bump], &mut b_up);
        spec.diffusion(t, &[mean], &mut sig);
        let slope = 1.0 + h * (b_up[0] - b[0]) / bump;
        var = slope * slope * var + sig[0] * sig[0] * h;
        mean += b[0] * h;
        sd_max = sd_max.max(var.sqrt());
        shift_max = shift_max.max((mean - x0).abs());
    }
    (5.0 * sd_max + shift_max).max(1e-6)
}

/// Exact lattice value of a one-dimensional switching problem on `grid`.
pub fn brute_force_value<P: SwitchingProblem + ?Sized>(
    spec: &dyn Diffusion,
    grid: &TimeGrid,
    problem: &P,
    config: &OracleConfig,
) -> Result<OracleValue, SwitchingError> {
    let q = problem.regimes().len();
    let n_steps = grid.steps();
    let lim = config.limits;
    if spec.dim() != 1 {
        return Err(SwitchingError::InstanceTooLarge(format!(
            "state dimension {} > 1",
            spec.dim()
        )));
    }
    if n_steps > lim.max_steps || q > lim.max_regimes || config.nodes > lim.max_nodes {
        return Err(SwitchingError::InstanceTooLarge(format!(
            "N = {n_steps}, q = {q}, nodes = {} exceed (N ≤ {}, q ≤ {}, nodes ≤ {})",
            config.nodes, lim.max_steps, lim.max_regimes, lim.max_nodes
        )));
    }
    if config.nodes == 0 || config.quadrature == 0 {
        return Err(SwitchingError::InvalidConfig(
            "lattice and quadrature must be non-empty".into(),
        ));
    }
    let h = grid.step_size();
    let x0 = spec.initial_state()[0];
    let half_width = config
        .half_width
        .unwrap_or_else(|| default_half_width(spec, grid));
    let nodes = config.nodes;
    let lattice: Vec<f64> = if nodes == 1 {
        vec![x0]
    } else {
        (0..nodes)
            .map(|k| x0 - half_width + 2.0 * half_width * k as f64 / (nodes - 1) as f64)
            .collect()
    };
    let (z, w) = gauss_hermite(config.quadrature);

    let t_end = grid.time(n_steps);
    let mut next: Vec<f64> = Vec::with_capacity(nodes * q);
    for &x in &lattice {
        for i in 0..q {
            let g = problem.terminal(t_end, &[x], i);
            if !g.is_finite() {
                return Err(SwitchingError::TerminalValueError { path: 0, regime: i });
            }
            next.push(g);
        }
    }
    let mut cur = vec![0.0; nodes * q];
    let mut f = vec![0.0; q];
    let mut cont = vec![0.0; q];
    let mut y = [0.0];
    for n in (0..n_steps).rev() {
        let t = grid.time(n);
        let splines: Vec<Spline> = (0..q).map(|j| Spline::new(&lattice, &next, q, j)).collect();
        for (l, &x) in lattice.iter().enumerate() {
            cont.iter_mut().for_each(|c| *c = 0.0);
            for (zq, wq) in z.iter().zip(&w) {
                spec.euler_step(t, h, &[x], &[*zq], &mut y);
                for (j, c) in cont.iter_mut().enumerate() {
                    *c += wq * splines[j].eval(y[0]);
                }
            }
            problem.profits(t, &[x], &mut f);
            for i in 0..q {
                let mut v = h * f[i] + cont[i];
                if grid.is_decision(n) {
                    for j in 0..q {
                        let c = problem.cost(t, i, j);
                        if j != i && c.is_finite() {
                            v = v.max(h * f[j] - c + cont[j]);
                        }
                    }
                }
                cur[l * q + i] = v;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let values = (0..q)
        .map(|i| Spline::new(&lattice, &next, q, i).eval(x0))
        .collect();
    let table = next.chunks(q).map(<[f64]>::to_vec).collect();
    Ok(OracleValue {
        values,
        lattice,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integrates_normal_moments() {
        let (z, w) = gauss_hermite(64);
        let moment = |p: i32| z.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((moment(0) - 1.0).abs() < 1e-12);
        assert!(moment(1).abs() < 1e-12);
        assert!((moment(2) - 1.0).abs() < 1e-11);
        assert!((moment(4) - 3.0).abs() < 1e-10);
        assert!((moment(8) - 105.0).abs() < 1e-8);
    }

    #[test]
    fn spline_reproduces_cubics_inside_and_lines_outside() {
        let lattice: Vec<f64> = (0..11).map(|k| k as f64 * 0.5).collect();
        let line: Vec<f64> = lattice.iter().map(|x| 2.0 * x - 1.0).collect();
        let s = Spline::new(&lattice, &line, 1, 0);
        for x in [-1.0, 0.3, 2.71, 6.0] {
            assert!((s.eval(x) - (2.0 * x - 1.0)).abs() < 1e-12);
        }
        let smooth: Vec<f64> = lattice.iter().map(|x| x.sin()).collect();
        let s = Spline::new(&lattice, &smooth, 1, 0);
        assert!((s.eval(2.2) - 2.2f64.sin()).abs() < 2e-3);
        assert_eq!(s.eval(1.5), 1.5f64.sin());
    }
}
