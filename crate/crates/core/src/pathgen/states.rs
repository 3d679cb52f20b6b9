use serde::{Deserialize, Serialize};

/// Row-major `M × d` matrix of path states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl StateMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    /// Every row set to `x`.
    pub fn broadcast(rows: usize, x: &[f64]) -> Self {
        let mut data = Vec::with_capacity(rows * x.len());
        for _ in 0..rows {
            data.extend_from_slice(x);
        }
        Self {
            rows,
            dim: x.len(),
            data,
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * dim, "data length must be rows * dim");
        Self { rows, dim, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.dim..(m + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.data[m * self.dim..(m + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Values of coordinate `j` across all rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|m| self.data[m * self.dim + j])
            .collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Largest absolute entrywise difference with `other`.
    pub fn max_abs_diff(&self, other: &StateMatrix) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()))
    }

    pub(crate) fn copy_from(&mut self, other: &StateMatrix) {
        self.data.copy_from_slice(&other.data);
    }
}
