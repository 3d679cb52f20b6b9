use super::diffusion::Diffusion;
use super::grid::TimeGrid;
use super::noise::{CounterNoise, NoiseSource, RngKey};
use super::states::StateMatrix;
use super::PathError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Block length used when a diffusion cannot be inverted and the backward
/// sweep recomputes states forward from dense snapshots.
pub const DEFAULT_BLOCK: usize = 32;

/// Paths processed per parallel task.
const CHUNK_ROWS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StorageMode {
    /// Terminal states plus snapshots; earlier states are rebuilt by the
    /// inverse Euler map (or block recomputation for non-invertible specs).
    #[default]
    Reversible,
    /// Every state of every step is kept. Reference and control mode.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub paths: usize,
    pub mode: StorageMode,
    /// Snapshot spacing for the non-invertible fallback.
    pub recompute_block: usize,
    /// Refuse non-invertible specs instead of falling back to recomputation.
    pub require_inverse: bool,
}

impl SweepConfig {
    pub fn new(paths: usize) -> Self {
        Self {
            paths,
            mode: StorageMode::Reversible,
            recompute_block: DEFAULT_BLOCK,
            require_inverse: false,
        }
    }

    pub fn with_mode(mut self, mode: StorageMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Position of the generator that produced the draws of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngCursor {
    pub stream: u64,
    pub word_pos: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedCheckpoint {
    pub step_index: usize,
    pub rng_cursor: RngCursor,
    pub state_snapshot: Option<StateMatrix>,
}

/// Accounting of resident path storage, in `f64` state coordinates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageStats {
    pub resident_values: usize,
    pub peak_values: usize,
    pub snapshots: usize,
    pub cursor_bytes: usize,
}

impl StorageStats {
    fn add(&mut self, values: usize) {
        self.resident_values += values;
        self.peak_values = self.peak_values.max(self.resident_values);
    }

    fn release(&mut self, values: usize) {
        self.resident_values -= values;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Replay {
    Inverse,
    Recompute(usize),
    Stored,
}

/// `M` Euler paths positioned at one grid step.
pub struct PathEnsemble {
    spec: Arc<dyn Diffusion>,
    grid: TimeGrid,
    noise: Box<dyn NoiseSource>,
    x0: Vec<f64>,
    current_step: usize,
    states: StateMatrix,
    checkpoints: Vec<SeedCheckpoint>,
    history: Vec<StateMatrix>,
    replay: Replay,
    stats: StorageStats,
}

impl std::fmt::Debug for PathEnsemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PathEnsemble")
            .field("paths", &self.states.rows())
            .field("dim", &self.states.dim())
            .field("current_step", &self.current_step)
            .field("checkpoints", &self.checkpoints.len())
            .field("replay", &self.replay)
            .finish()
    }
}

/// Apply `step_fn(path, row, eps)` to every row in parallel, drawing the
/// noise of `step` for each path.
fn par_rows<F>(
    states: &mut StateMatrix,
    noise: &dyn NoiseSource,
    step: usize,
    step_fn: F,
) -> Result<(), PathError>
where
    F: Fn(&[f64], &[f64], &mut [f64]) -> Result<(), PathError> + Sync,
{
    let d = states.dim();
    states
        .as_mut_slice()
        .par_chunks_mut(d * CHUNK_ROWS)
        .enumerate()
        .try_for_each(|(chunk, rows)| {
            let mut eps = vec![0.0; d];
            let mut out = vec![0.0; d];
            for (k, row) in rows.chunks_exact_mut(d).enumerate() {
                let path = chunk * CHUNK_ROWS + k;
                noise.draw(step, path, &mut eps);
                step_fn(row, &eps, &mut out).map_err(|e| match e {
                    PathError::NumericalOverflow { step, .. } => PathError::NumericalOverflow {
                        step,
                        path: Some(path),
                    },
                    other => other,
                })?;
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(PathError::NumericalOverflow {
                        step,
                        path: Some(path),
                    });
                }
                row.copy_from_slice(&out);
            }
            Ok(())
        })
}

fn advance(
    spec: &dyn Diffusion,
    noise: &dyn NoiseSource,
    grid: &TimeGrid,
    states: &mut StateMatrix,
    n: usize,
) -> Result<(), PathError> {
    let t = grid.time(n);
    let h = grid.step_size();
    par_rows(states, noise, n, |x, eps, out| {
        spec.euler_step(t, h, x, eps, out);
        Ok(())
    })
    .map_err(|e| relabel(e, n + 1))
}

fn relabel(e: PathError, step: usize) -> PathError {
    match e {
        PathError::NumericalOverflow { path, .. } => PathError::NumericalOverflow { step, path },
        other => other,
    }
}

impl PathEnsemble {
    /// Forward sweep driven by the counter-based generator keyed by `key`.
    pub fn forward(
        spec: Arc<dyn Diffusion>,
        grid: TimeGrid,
        config: &SweepConfig,
        key: RngKey,
    ) -> Result<Self, PathError> {
        let noise = Box::new(CounterNoise::new(key, spec.dim()));
        Self::forward_with_noise(spec, grid, config, noise)
    }

    pub fn forward_with_noise(
        spec: Arc<dyn Diffusion>,
        grid: TimeGrid,
        config: &SweepConfig,
        mut noise: Box<dyn NoiseSource>,
    ) -> Result<Self, PathError> {
        let m = config.paths;
        if m == 0 {
            return Err(PathError::InvalidGrid(
                "at least one path is required".into(),
            ));
        }
        let d = spec.dim();
        if noise.dim() != d {
            return Err(PathError::UnsupportedSpec(format!(
                "noise dimension {} does not match diffusion dimension {d}",
                noise.dim()
            )));
        }
        spec.check_step(grid.step_size())?;
        let replay = match (config.mode, spec.invertible()) {
            (StorageMode::Full, _) => Replay::Stored,
            (StorageMode::Reversible, true) => Replay::Inverse,
            (StorageMode::Reversible, false) if config.require_inverse => {
                return Err(PathError::UnsupportedSpec(
                    "diffusion has no inverse Euler step and recomputation is disabled".into(),
                ))
            }
            (StorageMode::Reversible, false) => Replay::Recompute(config.recompute_block.max(1)),
        };
        let x0 = spec.initial_state();
        let mut stats = StorageStats::default();
        let mut states = StateMatrix::broadcast(m, &x0);
        stats.add(m * d);
        let mut checkpoints = Vec::new();
        let mut history = Vec::new();
        let n_steps = grid.steps();
        let is_checkpoint = |n: usize| match replay {
            Replay::Inverse => grid.checkpoints().contains(&n),
            Replay::Recompute(k) => n % k == 0,
            Replay::Stored => false,
        };
        for n in 0..n_steps {
            noise.begin_step(n, m);
            if replay == Replay::Stored {
                history.push(states.clone());
                stats.add(m * d);
            } else if is_checkpoint(n) {
                checkpoints.push(SeedCheckpoint {
                    step_index: n,
                    rng_cursor: {
                        let (stream, word_pos) = noise.step_cursor(n);
                        RngCursor { stream, word_pos }
                    },
                    state_snapshot: Some(states.clone()),
                });
                stats.add(m * d);
                stats.snapshots += 1;
            }
            advance(spec.as_ref(), noise.as_ref(), &grid, &mut states, n)?;
        }
        stats.cursor_bytes = noise.cursor_bytes() * n_steps;
        Ok(Self {
            spec,
            grid,
            noise,
            x0,
            current_step: n_steps,
            states,
            checkpoints,
            history,
            replay,
            stats,
        })
    }

    pub fn paths(&self) -> usize {
        self.states.rows()
    }

    pub fn dim(&self) -> usize {
        self.states.dim()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn spec(&self) -> &Arc<dyn Diffusion> {
        &self.spec
    }

    pub fn current_step(&self) -> usize {
        self.current_step
    }

    pub fn states(&self) -> &StateMatrix {
        &self.states
    }

    pub fn checkpoints(&self) -> &[SeedCheckpoint] {
        &self.checkpoints
    }

    pub fn storage(&self) -> StorageStats {
        self.stats
    }

    /// Whether the backward sweep rebuilds states through the inverse map.
    pub fn uses_inverse(&self) -> bool {
        self.replay == Replay::Inverse
    }

    /// Noise vector of `path` at `step` (the draw moving `t_step` to `t_{step+1}`).
    pub fn noise(&self, step: usize, path: usize, out: &mut [f64]) {
        self.noise.draw(step, path, out)
    }

    fn snapshot(&self, n: usize) -> Option<&StateMatrix> {
        snapshot_at(&self.checkpoints, n)
    }

    /// Visit the states of steps `N, N−1, …, 0` exactly once each.
    ///
    /// The ensemble ends at step 0. Visitor errors abort the sweep.
    pub fn backward_sweep<E, V>(&mut self, mut visitor: V) -> Result<(), E>
    where
        E: From<PathError>,
        V: FnMut(usize, &StateMatrix) -> Result<(), E>,
    {
        let n_steps = self.grid.steps();
        if self.current_step != n_steps {
            return Err(PathError::InvalidGrid(format!(
                "backward sweep must start at step {n_steps}, ensemble is at {}",
                self.current_step
            ))
            .into());
        }
        visitor(n_steps, &self.states)?;
        match self.replay {
            Replay::Stored => {
                for n in (0..n_steps).rev() {
                    visitor(n, &self.history[n])?;
                }
                self.states.copy_from(&self.history[0]);
            }
            Replay::Inverse => {
                let h = self.grid.step_size();
                for n in (0..n_steps).rev() {
                    if n == 0 {
                        fill_rows(&mut self.states, &self.x0);
                    } else if let Some(snap) = snapshot_at(&self.checkpoints, n) {
                        self.states.copy_from(snap);
                    } else {
                        let t = self.grid.time(n);
                        let spec = self.spec.as_ref();
                        par_rows(&mut self.states, self.noise.as_ref(), n, |y, eps, out| {
                            spec.inverse_step(t, h, y, eps, out)
                        })
                        .map_err(|e| relabel(e, n))?;
                    }
                    self.current_step = n;
                    visitor(n, &self.states)?;
                }
            }
            Replay::Recompute(block) => {
                let m = self.paths();
                let d = self.dim();
                let mut buffer: Vec<StateMatrix> = Vec::with_capacity(block);
                let mut start = ((n_steps - 1) / block) * block;
                let mut end = n_steps;
                loop {
                    let snap = self
                        .snapshot(start)
                        .expect("recompute snapshots cover every block start")
                        .clone();
                    buffer.clear();
                    buffer.push(snap);
                    for n in start..end - 1 {
                        let mut next = buffer.last().expect("non-empty").clone();
                        advance(
                            self.spec.as_ref(),
                            self.noise.as_ref(),
                            &self.grid,
                            &mut next,
                            n,
                        )?;
                        buffer.push(next);
                    }
                    self.stats.add(buffer.len() * m * d);
                    for n in (start..end).rev() {
                        self.current_step = n;
                        visitor(n, &buffer[n - start])?;
                    }
                    self.stats.release(buffer.len() * m * d);
                    if start == 0 {
                        break;
                    }
                    end = start;
                    start -= block;
                }
                self.states.copy_from(&buffer[0]);
            }
        }
        self.current_step = 0;
        Ok(())
    }
}

fn snapshot_at(checkpoints: &[SeedCheckpoint], n: usize) -> Option<&StateMatrix> {
    checkpoints
        .binary_search_by_key(&n, |c| c.step_index)
        .ok()
        .and_then(|i| checkpoints[i].state_snapshot.as_ref())
}

fn fill_rows(states: &mut StateMatrix, x: &[f64]) {
    for m in 0..states.rows() {
        states.row_mut(m).copy_from_slice(x);
    }
}

/// Forward sweep with the default configuration and counter-based noise.
pub fn forward_sweep(
    spec: Arc<dyn Diffusion>,
    grid: TimeGrid,
    paths: usize,
    key: RngKey,
) -> Result<PathEnsemble, PathError> {
    PathEnsemble::forward(spec, grid, &SweepConfig::new(paths), key)
}

/// Simulate `paths` fresh paths keyed by `key` and hand each step's states to
/// `visitor` in increasing order, keeping a single `M × d` buffer.
pub fn forward_visit<E, V>(
    spec: &dyn Diffusion,
    grid: &TimeGrid,
    paths: usize,
    key: RngKey,
    mut visitor: V,
) -> Result<(), E>
where
    E: From<PathError>,
    V: FnMut(usize, &StateMatrix) -> Result<(), E>,
{
    spec.check_step(grid.step_size())?;
    let noise = CounterNoise::new(key, spec.dim());
    let mut states = StateMatrix::broadcast(paths, &spec.initial_state());
    for n in 0..grid.steps() {
        visitor(n, &states)?;
        advance(spec, &noise, grid, &mut states, n)?;
    }
    visitor(grid.steps(), &states)
}
