use super::{SwitchingError, SwitchingProblem};
use crate::pathgen::{CounterNoise, Diffusion, NoiseSource, PathError, RngKey, StateMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Choice of the terminal value `g(T, x, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TerminalRule {
    /// `g` as defined by the problem (zero unless overridden).
    #[default]
    Problem,
    /// Expected profit of keeping the regime frozen over `[T, T + horizon]`,
    /// estimated by `inner_paths` nested Euler paths of `substeps` steps each.
    FrozenContinuation {
        horizon: f64,
        #[serde(default = "default_substeps")]
        substeps: usize,
        #[serde(default = "default_inner_paths")]
        inner_paths: usize,
        #[serde(default)]
        key: RngKey,
    },
}

fn default_substeps() -> usize {
    10
}

fn default_inner_paths() -> usize {
    16
}

/// Terminal layer `g(T, x_m, i)` as a path-major `M × q` matrix.
pub fn terminal_layer<P: SwitchingProblem + ?Sized>(
    states: &StateMatrix,
    t: f64,
    problem: &P,
    rule: &TerminalRule,
    spec: &dyn Diffusion,
) -> Result<Vec<f64>, SwitchingError> {
    let q = problem.regimes().len();
    let m = states.rows();
    let mut layer = vec![0.0; m * q];
    match rule {
        TerminalRule::Problem => {
            layer.par_chunks_mut(q).enumerate().for_each(|(p, row)| {
                let x = states.row(p);
                for (i, v) in row.iter_mut().enumerate() {
                    *v = problem.terminal(t, x, i);
                }
            });
        }
        &TerminalRule::FrozenContinuation {
            horizon,
            substeps,
            inner_paths,
            key,
        } => {
            if !(horizon > 0.0) || substeps == 0 || inner_paths == 0 {
                return Err(SwitchingError::InvalidConfig(
                    "frozen continuation needs a positive horizon, substeps and inner paths".into(),
                ));
            }
            let h = horizon / substeps as f64;
            spec.check_step(h)?;
            let rho = problem.discount_rate();
            // Exact integral of e^{−ρs} over one substep, relative to its left end.
            let weight = -(-rho * h).exp_m1() / rho;
            let noise = CounterNoise::new(key, spec.dim());
            layer
                .par_chunks_mut(q)
                .enumerate()
                .try_for_each(|(p, row)| {
                    let d = spec.dim();
                    let mut x = vec![0.0; d];
                    let mut next = vec![0.0; d];
                    let mut eps = vec![0.0; d];
                    let mut f = vec![0.0; q];
                    let mut acc = vec![0.0; q];
                    for r in 0..inner_paths {
                        x.copy_from_slice(states.row(p));
                        for k in 0..substeps {
                            let s = t + k as f64 * h;
                            problem.profits(s, &x, &mut f);
                            for i in 0..q {
                                acc[i] += weight * f[i];
                            }
                            noise.draw(k, p * inner_paths + r, &mut eps);
                            spec.euler_step(s, h, &x, &eps, &mut next);
                            if next.iter().any(|v| !v.is_finite()) {
                                return Err(PathError::NumericalOverflow {
                                    step: k,
                                    path: Some(p),
                                });
                            }
                            std::mem::swap(&mut x, &mut next);
                        }
                    }
                    for i in 0..q {
                        row[i] = acc[i] / inner_paths as f64;
                    }
                    Ok(())
                })?;
        }
    }
    if let Some(pos) = layer.iter().position(|v| !v.is_finite()) {
        return Err(SwitchingError::TerminalValueError {
            path: pos / q,
            regime: pos % q,
        });
    }
    Ok(layer)
}
