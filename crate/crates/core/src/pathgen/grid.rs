use super::PathError;
use serde::{Deserialize, Serialize};

/// Number of intermediate snapshots used when none are requested explicitly.
pub const DEFAULT_CHECKPOINTS: usize = 4;

/// Uniform time grid `t_n = n·h`, `n = 0..=N`, with the subsets of indices
/// where switching is allowed and where full snapshots are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    decision: Vec<bool>,
    checkpoints: Vec<usize>,
}

impl TimeGrid {
    /// Grid on `[0, horizon]` with `steps` steps, a decision at every step
    /// before the horizon and [`DEFAULT_CHECKPOINTS`] evenly spaced snapshots.
    pub fn new(horizon: f64, steps: usize) -> Result<Self, PathError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(PathError::InvalidGrid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(PathError::InvalidGrid(
                "at least one step is required".into(),
            ));
        }
        let mut decision = vec![true; steps + 1];
        decision[steps] = false;
        Ok(Self {
            horizon,
            steps,
            decision,
            checkpoints: Vec::new(),
        }
        .with_even_checkpoints(DEFAULT_CHECKPOINTS))
    }

    /// Restrict switching to every `every`-th step starting at 0.
    pub fn with_decisions_every(mut self, every: usize) -> Self {
        let every = every.max(1);
        for (n, d) in self.decision.iter_mut().enumerate() {
            *d = n < self.steps && n % every == 0;
        }
        self
    }

    /// Explicit decision dates. Indices at or beyond `N` are ignored.
    pub fn with_decision_dates(mut self, dates: &[usize]) -> Self {
        self.decision.iter_mut().for_each(|d| *d = false);
        for &n in dates {
            if n < self.steps {
                self.decision[n] = true;
            }
        }
        self
    }

    /// `count` snapshot indices spread evenly over the interior `1..N`.
    pub fn with_even_checkpoints(mut self, count: usize) -> Self {
        let mut cps: Vec<usize> = (1..=count)
            .map(|k| ((k as f64) * self.steps as f64 / (count + 1) as f64).round() as usize)
            .filter(|&n| n > 0 && n < self.steps)
            .collect();
        cps.dedup();
        self.checkpoints = cps;
        self
    }

    pub fn with_checkpoints(mut self, mut indices: Vec<usize>) -> Self {
        indices.retain(|&n| n > 0 && n < self.steps);
        indices.sort_unstable();
        indices.dedup();
        self.checkpoints = indices;
        self
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.step_size()
        }
    }

    #[inline]
    pub fn is_decision(&self, n: usize) -> bool {
        self.decision.get(n).copied().unwrap_or(false)
    }

    pub fn decision_dates(&self) -> Vec<usize> {
        (0..=self.steps).filter(|&n| self.decision[n]).collect()
    }

    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_checkpoints_are_interior() {
        let g = TimeGrid::new(10.0, 1000).unwrap();
        assert_eq!(g.checkpoints(), &[200, 400, 600, 800]);
        assert!(!g.is_decision(1000));
        assert!(g.is_decision(0));
    }

    #[test]
    fn decision_cadence() {
        let g = TimeGrid::new(2.0, 8).unwrap().with_decisions_every(4);
        assert_eq!(g.decision_dates(), vec![0, 4]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn time_hits_horizon_exactly() {
        let g = TimeGrid::new(10.0, 1040).unwrap();
        assert_eq!(g.time(1040), 10.0);
        assert!((g.step_size() * 1040.0 - 10.0).abs() < 1e-12);
    }
}
