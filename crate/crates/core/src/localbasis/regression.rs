use super::{LocalizationDomain, Partition, RegressionError};
use crate::pathgen::StateMatrix;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Local functions on each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// Indicator of the cell: the estimate is the in-cell sample mean.
    #[default]
    Constant,
    /// Intercept plus one slope per coordinate, centred on the in-cell mean.
    Linear,
}

impl Basis {
    pub fn size(self, dim: usize) -> usize {
        match self {
            Basis::Constant => 1,
            Basis::Linear => 1 + dim,
        }
    }
}

/// Clamp interval `[lo, hi]` applied to every regression output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationBounds {
    pub lo: f64,
    pub hi: f64,
}

impl TruncationBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self, RegressionError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(RegressionError::InvalidBounds { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn unbounded() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    /// `±factor·max|y|`.
    pub fn from_targets(y: &[f64], factor: f64) -> Self {
        let a = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * factor;
        Self { lo: -a, hi: a }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }
}

/// Everything about one step's regression that does not depend on the
/// regressed values: the clamp box, the partition, per-cell anchors and the
/// inverted normal equations. Shared by the regressions of all regimes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalFrame {
    domain: LocalizationDomain,
    partition: Partition,
    basis: Basis,
    anchors: Vec<f64>,
    inv_gram: Vec<f64>,
    source: Vec<u32>,
}

impl LocalFrame {
    /// Assemble the frame from the training states (clamped into `domain`
    /// on read) and a partition built on the same clamped states.
    ///
    /// Returns the frame and the cell index of every training path.
    pub fn prepare(
        states: &StateMatrix,
        domain: LocalizationDomain,
        mut partition: Partition,
        basis: Basis,
    ) -> Result<(Arc<Self>, Vec<u32>), RegressionError> {
        let membership = partition.take_membership();
        if membership.len() != states.rows() {
            return Err(RegressionError::InvalidPartition(format!(
                "partition has {} members, ensemble has {} paths",
                membership.len(),
                states.rows()
            )));
        }
        let d = states.dim();
        let k = partition.len();
        let p = basis.size(d);
        let counts = partition.counts().to_vec();
        let mut anchors = vec![0.0; k * d];
        let mut inv_gram = vec![0.0; k * p * p];
        match basis {
            Basis::Constant => {
                for c in 0..k {
                    inv_gram[c] = if counts[c] > 0 {
                        1.0 / counts[c] as f64
                    } else {
                        0.0
                    };
                }
            }
            Basis::Linear => {
                let mut x = vec![0.0; d];
                for (i, &c) in membership.iter().enumerate() {
                    domain.clamp_into(states.row(i), &mut x);
                    let a = &mut anchors[c as usize * d..(c as usize + 1) * d];
                    for j in 0..d {
                        a[j] += x[j];
                    }
                }
                for c in 0..k {
                    if counts[c] > 0 {
                        let n = counts[c] as f64;
                        anchors[c * d..(c + 1) * d].iter_mut().for_each(|v| *v /= n);
                    }
                }
                let mut gram = vec![0.0; k * p * p];
                let mut phi = vec![0.0; p];
                for (i, &c) in membership.iter().enumerate() {
                    let c = c as usize;
                    domain.clamp_into(states.row(i), &mut x);
                    features(&x, &anchors[c * d..(c + 1) * d], &mut phi);
                    let g = &mut gram[c * p * p..(c + 1) * p * p];
                    for r in 0..p {
                        for s in 0..p {
                            g[r * p + s] += phi[r] * phi[s];
                        }
                    }
                }
                for c in 0..k {
                    if counts[c] > 0 {
                        let inv = invert_gram(&gram[c * p * p..(c + 1) * p * p], p);
                        inv_gram[c * p * p..(c + 1) * p * p].copy_from_slice(&inv);
                    }
                }
            }
        }
        let mut source: Vec<u32> = (0..k as u32).collect();
        for c in 0..k {
            if counts[c] == 0 {
                let s = partition.nearest_nonempty(c).ok_or_else(|| {
                    RegressionError::InvalidPartition("partition has no populated cell".into())
                })?;
                source[c] = s as u32;
                let (src, dst) = (s * d, c * d);
                for j in 0..d {
                    anchors[dst + j] = anchors[src + j];
                }
            }
        }
        let frame = Self {
            domain,
            partition,
            basis,
            anchors,
            inv_gram,
            source,
        };
        Ok((Arc::new(frame), membership))
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn domain(&self) -> &LocalizationDomain {
        &self.domain
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    /// Least-squares coefficients of `y` on the local basis of every cell.
    /// `states` and `membership` must be the ones passed to / returned by
    /// [`LocalFrame::prepare`]. Empty cells reuse the coefficients of their
    /// nearest populated cell.
    pub fn fit(
        self: &Arc<Self>,
        states: &StateMatrix,
        membership: &[u32],
        y: &[f64],
        bounds: TruncationBounds,
    ) -> Result<RegressionEstimate, RegressionError> {
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(RegressionError::NonFiniteTarget { index: i });
        }
        let d = self.dim();
        let k = self.partition.len();
        let p = self.basis.size(d);
        let mut rhs = vec![0.0; k * p];
        match self.basis {
            Basis::Constant => {
                for (i, &c) in membership.iter().enumerate() {
                    rhs[c as usize] += y[i];
                }
            }
            Basis::Linear => {
                let mut x = vec![0.0; d];
                let mut phi = vec![0.0; p];
                for (i, &c) in membership.iter().enumerate() {
                    let c = c as usize;
                    self.domain.clamp_into(states.row(i), &mut x);
                    features(&x, &self.anchors[c * d..(c + 1) * d], &mut phi);
                    let b = &mut rhs[c * p..(c + 1) * p];
                    for r in 0..p {
                        b[r] += phi[r] * y[i];
                    }
                }
            }
        }
        let mut coef = vec![0.0; k * p];
        for c in 0..k {
            let inv = &self.inv_gram[c * p * p..(c + 1) * p * p];
            let b = &rhs[c * p..(c + 1) * p];
            let out = &mut coef[c * p..(c + 1) * p];
            if p == 1 {
                out[0] = b[0] * inv[0];
                continue;
            }
            for r in 0..p {
                let mut acc = 0.0;
                for s in 0..p {
                    acc += inv[r * p + s] * b[s];
                }
                out[r] = acc;
            }
        }
        for c in 0..k {
            let s = self.source[c] as usize;
            if s != c {
                for r in 0..p {
                    coef[c * p + r] = coef[s * p + r];
                }
            }
        }
        Ok(RegressionEstimate {
            frame: Arc::clone(self),
            coef,
            bounds,
        })
    }
}

#[inline]
fn features(x: &[f64], anchor: &[f64], phi: &mut [f64]) {
    phi[0] = 1.0;
    for j in 0..x.len() {
        phi[1 + j] = x[j] - anchor[j];
    }
}

/// Inverse of a symmetric positive semi-definite normal matrix. A ridge of
/// `1e-8·trace/p` on the slope block is added when the matrix is
/// numerically rank-deficient.
fn invert_gram(g: &[f64], p: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(p, p, g);
    let max_diag = (0..p).map(|i| m[(i, i)]).fold(0.0_f64, f64::max);
    let well_posed = m.clone().cholesky().filter(|ch| {
        let l = ch.l_dirty();
        (0..p).all(|i| l[(i, i)] * l[(i, i)] > 1e-12 * max_diag)
    });
    let ch = match well_posed {
        Some(ch) => ch,
        None => {
            let trace: f64 = (0..p).map(|i| m[(i, i)]).sum();
            let ridge = 1e-8 * trace / p as f64;
            let mut r = m;
            for i in 1..p {
                r[(i, i)] += ridge.max(f64::MIN_POSITIVE);
            }
            r.cholesky()
                .expect("ridge-regularized normal matrix is positive definite")
        }
    };
    let inv = ch.inverse();
    let mut out = vec![0.0; p * p];
    for r in 0..p {
        for s in 0..p {
            out[r * p + s] = inv[(r, s)];
        }
    }
    out
}

/// Truncated piecewise estimate of a conditional expectation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionEstimate {
    frame: Arc<LocalFrame>,
    coef: Vec<f64>,
    bounds: TruncationBounds,
}

impl RegressionEstimate {
    pub fn frame(&self) -> &Arc<LocalFrame> {
        &self.frame
    }

    pub fn bounds(&self) -> TruncationBounds {
        self.bounds
    }

    /// Coefficients of `cell` (length `1` or `1 + d`).
    pub fn coefficients(&self, cell: usize) -> &[f64] {
        let p = self.frame.basis.size(self.frame.dim());
        &self.coef[cell * p..(cell + 1) * p]
    }

    /// Untruncated local value at an already clamped point of a known cell.
    #[inline]
    pub fn raw_in_cell(&self, cell: usize, x_local: &[f64]) -> f64 {
        let c = self.coefficients(cell);
        match self.frame.basis {
            Basis::Constant => c[0],
            Basis::Linear => {
                let d = x_local.len();
                let a = &self.frame.anchors[cell * d..(cell + 1) * d];
                let mut v = c[0];
                for j in 0..d {
                    v += c[1 + j] * (x_local[j] - a[j]);
                }
                v
            }
        }
    }

    /// Truncated value at an already clamped point of a known cell.
    #[inline]
    pub fn value_in_cell(&self, cell: usize, x_local: &[f64]) -> f64 {
        self.bounds.apply(self.raw_in_cell(cell, x_local))
    }

    /// Truncated estimate at an arbitrary point: clamp into the domain,
    /// locate the cell (nearest cell outside the partition), apply the local
    /// coefficients.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut xl = vec![0.0; x.len()];
        self.frame.domain.clamp_into(x, &mut xl);
        let cell = self.frame.partition.locate(&xl);
        self.value_in_cell(cell, &xl)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let p = self.frame.basis.size(self.frame.dim());
        let cells: Vec<serde_json::Value> = self
            .frame
            .partition
            .cells()
            .iter()
            .enumerate()
            .map(|(k, c)| {
                serde_json::json!({
                    "lo": c.lo,
                    "hi": c.hi,
                    "count": self.frame.partition.counts()[k],
                    "coefficients": &self.coef[k * p..(k + 1) * p],
                })
            })
            .collect();
        serde_json::json!({
            "basis": self.frame.basis,
            "bounds": { "lo": self.bounds.lo, "hi": self.bounds.hi },
            "domain": { "lo": self.frame.domain.lo, "hi": self.frame.domain.hi },
            "cells": cells,
        })
    }
}

/// One-shot regression of `y` on the raw states over `partition`.
pub fn regress(
    states: &StateMatrix,
    y: &[f64],
    partition: Partition,
    bounds: TruncationBounds,
    basis: Basis,
) -> Result<RegressionEstimate, RegressionError> {
    if y.len() != states.rows() {
        return Err(RegressionError::InvalidPartition(format!(
            "{} targets for {} paths",
            y.len(),
            states.rows()
        )));
    }
    let domain = LocalizationDomain::unbounded(states.dim());
    let (frame, membership) = LocalFrame::prepare(states, domain, partition, basis)?;
    frame.fit(states, &membership, y, bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localbasis::{build_partition, PartitionMode};

    fn line(m: usize) -> StateMatrix {
        StateMatrix::from_vec(m, 1, (0..m).map(|i| i as f64).collect())
    }

    #[test]
    fn constant_targets_reproduce() {
        let s = line(40);
        let y = vec![3.25; 40];
        for basis in [Basis::Constant, Basis::Linear] {
            let p = build_partition(&s, 4, PartitionMode::Adaptive).unwrap();
            let est = regress(&s, &y, p, TruncationBounds::unbounded(), basis).unwrap();
            for x in [-5.0, 0.0, 13.5, 39.0, 100.0] {
                assert!((est.evaluate(&[x]) - 3.25).abs() < 1e-12);
            }
        }
        let p = build_partition(&s, 4, PartitionMode::Adaptive).unwrap();
        let est = regress(
            &s,
            &y,
            p,
            TruncationBounds::new(0.0, 1.0).unwrap(),
            Basis::Constant,
        )
        .unwrap();
        assert_eq!(est.evaluate(&[3.0]), 1.0);
    }

    #[test]
    fn indicator_of_right_cell() {
        let s = StateMatrix::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let p = build_partition(&s, 2, PartitionMode::Adaptive).unwrap();
        let est = regress(&s, &y, p, TruncationBounds::unbounded(), Basis::Constant).unwrap();
        assert_eq!(est.coefficients(0), &[0.0]);
        assert_eq!(est.coefficients(1), &[1.0]);
        assert_eq!(est.evaluate(&[1.2]), est.evaluate(&[2.2]));
    }

    #[test]
    fn linear_fits_affine_exactly() {
        let s = line(30);
        let y: Vec<f64> = (0..30).map(|i| 2.0 - 0.5 * i as f64).collect();
        let p = build_partition(&s, 3, PartitionMode::Adaptive).unwrap();
        let est = regress(&s, &y, p, TruncationBounds::unbounded(), Basis::Linear).unwrap();
        for x in [0.0, 7.3, 29.0] {
            assert!((est.evaluate(&[x]) - (2.0 - 0.5 * x)).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_uniform_cell_inherits_neighbour() {
        let s = StateMatrix::from_vec(4, 1, vec![0.0, 0.1, 0.9, 1.0]);
        let y = [1.0, 1.0, 5.0, 5.0];
        let p = build_partition(&s, 4, PartitionMode::Uniform).unwrap();
        assert_eq!(p.counts(), &[2, 0, 0, 2]);
        let est = regress(&s, &y, p, TruncationBounds::unbounded(), Basis::Constant).unwrap();
        assert_eq!(est.evaluate(&[0.3]), 1.0);
        assert_eq!(est.evaluate(&[0.6]), 5.0);
    }

    #[test]
    fn single_point_cells_are_regularized() {
        let s = StateMatrix::from_vec(2, 2, vec![0.0, 0.0, 1.0, 1.0]);
        let p = build_partition(&s, 2, PartitionMode::Adaptive).unwrap();
        let est = regress(
            &s,
            &[1.0, 2.0],
            p,
            TruncationBounds::unbounded(),
            Basis::Linear,
        )
        .unwrap();
        assert!((est.evaluate(&[0.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((est.evaluate(&[1.0, 1.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_target_is_rejected() {
        let s = line(4);
        let p = build_partition(&s, 1, PartitionMode::Adaptive).unwrap();
        let err = regress(
            &s,
            &[0.0, f64::NAN, 0.0, 0.0],
            p,
            TruncationBounds::unbounded(),
            Basis::Constant,
        );
        assert!(matches!(
            err,
            Err(RegressionError::NonFiniteTarget { index: 1 })
        ));
        assert!(TruncationBounds::new(1.0, 0.0).is_err());
    }

    #[test]
    fn json_export_lists_cells() {
        let s = line(8);
        let p = build_partition(&s, 2, PartitionMode::Adaptive).unwrap();
        let est = regress(
            &s,
            &[1.0; 8],
            p,
            TruncationBounds::from_targets(&[1.0], 2.0),
            Basis::Constant,
        )
        .unwrap();
        let j = est.to_json();
        assert_eq!(j["cells"].as_array().unwrap().len(), 2);
        assert_eq!(j["bounds"]["hi"], 2.0);
    }
}
