use super::{LocalizationDomain, RegressionError};
use crate::pathgen::StateMatrix;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    /// Regular grid over the bounding box of the cloud.
    Uniform,
    /// Recursive median splits, so cells hold roughly equal path counts.
    #[default]
    Adaptive,
}

/// Axis-aligned box `[lo, hi)` (closed on the upper face of the partition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    fn center_dist2(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(j, v)| {
                let c = 0.5 * (self.lo[j] + self.hi[j]);
                (v - c) * (v - c)
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        dim: usize,
        at: f64,
        left: usize,
        right: usize,
    },
    Leaf(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Locator {
    Grid {
        counts: Vec<usize>,
        lo: Vec<f64>,
        width: Vec<f64>,
    },
    Tree {
        nodes: Vec<Node>,
    },
}

/// Hypercube partition of a (localized) state cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    mode: PartitionMode,
    dim: usize,
    cells: Vec<Cell>,
    counts: Vec<usize>,
    bbox_lo: Vec<f64>,
    bbox_hi: Vec<f64>,
    locator: Locator,
    min_edge: f64,
    max_edge: f64,
    #[serde(skip)]
    membership: Vec<u32>,
}

impl Partition {
    pub fn mode(&self) -> PartitionMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Training paths per cell.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Cell index of every training path (empty once dropped).
    pub fn membership(&self) -> &[u32] {
        &self.membership
    }

    pub fn take_membership(&mut self) -> Vec<u32> {
        std::mem::take(&mut self.membership)
    }

    /// Shortest and longest cell edge, `(δ̲, δ)`.
    pub fn edge_range(&self) -> (f64, f64) {
        (self.min_edge, self.max_edge)
    }

    /// Smallest empirical cell probability `count / M`.
    pub fn min_cell_probability(&self) -> f64 {
        let total: usize = self.counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        *self.counts.iter().min().expect("at least one cell") as f64 / total as f64
    }

    fn inside_bbox(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(j, &v)| v >= self.bbox_lo[j] && v <= self.bbox_hi[j])
    }

    /// Cell containing `x`, or the cell with the nearest center when `x`
    /// lies outside the partition.
    pub fn locate(&self, x: &[f64]) -> usize {
        match &self.locator {
            Locator::Grid { counts, lo, width } => {
                // Per-coordinate clamping on a regular grid picks the nearest center.
                let mut idx = 0;
                for j in 0..self.dim {
                    let n = counts[j];
                    let k = if n == 1 || width[j] <= 0.0 {
                        0
                    } else {
                        let r = ((x[j] - lo[j]) / width[j]).floor();
                        if r.is_nan() || r < 0.0 {
                            0
                        } else {
                            (r as usize).min(n - 1)
                        }
                    };
                    idx = idx * n + k;
                }
                idx
            }
            Locator::Tree { nodes } => {
                if !self.inside_bbox(x) {
                    return self.nearest_center(x);
                }
                let mut at = 0;
                loop {
                    match nodes[at] {
                        Node::Leaf(c) => return c,
                        Node::Split {
                            dim,
                            at: s,
                            left,
                            right,
                        } => {
                            at = if x[dim] < s { left } else { right };
                        }
                    }
                }
            }
        }
    }

    fn nearest_center(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, c) in self.cells.iter().enumerate() {
            let d = c.center_dist2(x);
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        best
    }

    /// Nearest cell with at least one training path, by center distance.
    pub(crate) fn nearest_nonempty(&self, cell: usize) -> Option<usize> {
        let c = self.cells[cell].center();
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (k, other) in self.cells.iter().enumerate() {
            if self.counts[k] == 0 {
                continue;
            }
            let d = other.center_dist2(&c);
            if d < best_d {
                best = Some(k);
                best_d = d;
            }
        }
        best
    }

    fn finish(mut self) -> Self {
        let mut min_edge = f64::INFINITY;
        let mut max_edge = 0.0_f64;
        for c in &self.cells {
            for j in 0..self.dim {
                let e = c.hi[j] - c.lo[j];
                min_edge = min_edge.min(e);
                max_edge = max_edge.max(e);
            }
        }
        self.min_edge = if min_edge.is_finite() { min_edge } else { 0.0 };
        self.max_edge = max_edge;
        self
    }
}

/// Partition the raw cloud `states` into about `target` cells.
pub fn build_partition(
    states: &StateMatrix,
    target: usize,
    mode: PartitionMode,
) -> Result<Partition, RegressionError> {
    build_partition_in(
        states,
        &LocalizationDomain::unbounded(states.dim()),
        target,
        mode,
    )
}

/// Partition the cloud after clamping every state into `domain`.
pub fn build_partition_in(
    states: &StateMatrix,
    domain: &LocalizationDomain,
    target: usize,
    mode: PartitionMode,
) -> Result<Partition, RegressionError> {
    let m = states.rows();
    let d = states.dim();
    if target == 0 {
        return Err(RegressionError::InvalidPartition(
            "at least one cell is required".into(),
        ));
    }
    if target > m {
        return Err(RegressionError::InvalidPartition(format!(
            "{target} cells requested for {m} paths"
        )));
    }
    let value = |i: usize, j: usize| domain.clamp(j, states.row(i)[j]);
    let mut bbox_lo = vec![f64::INFINITY; d];
    let mut bbox_hi = vec![f64::NEG_INFINITY; d];
    for i in 0..m {
        for j in 0..d {
            let v = value(i, j);
            bbox_lo[j] = bbox_lo[j].min(v);
            bbox_hi[j] = bbox_hi[j].max(v);
        }
    }
    let part = match mode {
        PartitionMode::Uniform => uniform(m, d, target, bbox_lo, bbox_hi, &value),
        PartitionMode::Adaptive => adaptive(m, d, target, bbox_lo, bbox_hi, &value),
    };
    Ok(part.finish())
}

/// Smallest `n` with `n^d ≥ k`.
fn per_dim_count(k: usize, d: usize) -> usize {
    let mut n = (k as f64).powf(1.0 / d as f64).round().max(1.0) as usize;
    while n > 1 && (n - 1).checked_pow(d as u32).is_some_and(|p| p >= k) {
        n -= 1;
    }
    while n.checked_pow(d as u32).is_some_and(|p| p < k) {
        n += 1;
    }
    n
}

fn uniform(
    m: usize,
    d: usize,
    target: usize,
    bbox_lo: Vec<f64>,
    bbox_hi: Vec<f64>,
    value: &dyn Fn(usize, usize) -> f64,
) -> Partition {
    let n = per_dim_count(target, d);
    let counts: Vec<usize> = (0..d)
        .map(|j| if bbox_hi[j] > bbox_lo[j] { n } else { 1 })
        .collect();
    let width: Vec<f64> = (0..d)
        .map(|j| (bbox_hi[j] - bbox_lo[j]) / counts[j] as f64)
        .collect();
    let total: usize = counts.iter().product();
    let mut cells = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut idx = vec![0; d];
        for j in (0..d).rev() {
            idx[j] = rem % counts[j];
            rem /= counts[j];
        }
        let lo: Vec<f64> = (0..d)
            .map(|j| bbox_lo[j] + idx[j] as f64 * width[j])
            .collect();
        let hi: Vec<f64> = (0..d)
            .map(|j| {
                if idx[j] + 1 == counts[j] {
                    bbox_hi[j]
                } else {
                    bbox_lo[j] + (idx[j] + 1) as f64 * width[j]
                }
            })
            .collect();
        cells.push(Cell { lo, hi });
    }
    let mut part = Partition {
        mode: PartitionMode::Uniform,
        dim: d,
        counts: vec![0; cells.len()],
        cells,
        locator: Locator::Grid {
            counts,
            lo: bbox_lo.clone(),
            width,
        },
        bbox_lo,
        bbox_hi,
        min_edge: 0.0,
        max_edge: 0.0,
        membership: Vec::with_capacity(m),
    };
    let mut x = vec![0.0; d];
    for i in 0..m {
        for (j, v) in x.iter_mut().enumerate() {
            *v = value(i, j);
        }
        let c = part.locate(&x);
        part.counts[c] += 1;
        part.membership.push(c as u32);
    }
    part
}

struct Pending {
    node: usize,
    members: Vec<u32>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    depth: usize,
}

/// Split value for `vals`: the median if it leaves both sides non-empty,
/// otherwise the gap between distinct values closest to the middle.
/// Reorders `vals`.
fn split_point(vals: &mut [f64]) -> Option<f64> {
    let n = vals.len();
    if n < 2 {
        return None;
    }
    let mid = n / 2;
    let (left, &mut upper, right) = vals.select_nth_unstable_by(mid, f64::total_cmp);
    let min = left.iter().copied().fold(upper, f64::min);
    let max = right.iter().copied().fold(upper, f64::max);
    if min == max {
        return None;
    }
    let median = if n % 2 == 0 {
        0.5 * (left.iter().copied().fold(f64::NEG_INFINITY, f64::max) + upper)
    } else {
        upper
    };
    if min < median && median <= max {
        return Some(median);
    }
    vals.sort_by(f64::total_cmp);
    // Ties put everything on one side; move to the nearest value boundary.
    (1..n)
        .filter(|&b| vals[b - 1] < vals[b])
        .min_by_key(|&b| b.abs_diff(mid))
        .map(|b| 0.5 * (vals[b - 1] + vals[b]))
}

fn adaptive(
    m: usize,
    d: usize,
    target: usize,
    bbox_lo: Vec<f64>,
    bbox_hi: Vec<f64>,
    value: &dyn Fn(usize, usize) -> f64,
) -> Partition {
    let mut nodes = vec![Node::Leaf(usize::MAX)];
    let mut queue = VecDeque::new();
    let mut done: Vec<Pending> = Vec::new();
    queue.push_back(Pending {
        node: 0,
        members: (0..m as u32).collect(),
        lo: bbox_lo.clone(),
        hi: bbox_hi.clone(),
        depth: 0,
    });
    let mut leaves = 1;
    let mut vals = Vec::new();
    while leaves < target {
        let Some(p) = queue.pop_front() else { break };
        let mut split = None;
        for offset in 0..d {
            let dim = (p.depth + offset) % d;
            vals.clear();
            vals.extend(p.members.iter().map(|&i| value(i as usize, dim)));
            if let Some(at) = split_point(&mut vals) {
                split = Some((dim, at));
                break;
            }
        }
        let Some((dim, at)) = split else {
            done.push(p);
            continue;
        };
        let (left_m, right_m): (Vec<u32>, Vec<u32>) = p
            .members
            .iter()
            .partition(|&&i| value(i as usize, dim) < at);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf(usize::MAX));
        nodes.push(Node::Leaf(usize::MAX));
        nodes[p.node] = Node::Split {
            dim,
            at,
            left: l,
            right: r,
        };
        let mut left_hi = p.hi.clone();
        left_hi[dim] = at;
        let mut right_lo = p.lo.clone();
        right_lo[dim] = at;
        queue.push_back(Pending {
            node: l,
            members: left_m,
            lo: p.lo,
            hi: left_hi,
            depth: p.depth + 1,
        });
        queue.push_back(Pending {
            node: r,
            members: right_m,
            lo: right_lo,
            hi: p.hi,
            depth: p.depth + 1,
        });
        leaves += 1;
    }
    done.extend(queue);
    // Number leaves in left-to-right tree order.
    let mut by_node: Vec<Option<Pending>> = (0..nodes.len()).map(|_| None).collect();
    for p in done {
        let k = p.node;
        by_node[k] = Some(p);
    }
    let mut cells = Vec::new();
    let mut counts = Vec::new();
    let mut membership = vec![0u32; m];
    let mut stack = vec![0usize];
    while let Some(at) = stack.pop() {
        match nodes[at] {
            Node::Split { left, right, .. } => {
                stack.push(right);
                stack.push(left);
            }
            Node::Leaf(_) => {
                let p = by_node[at].take().expect("every leaf is pending");
                let c = cells.len();
                for &i in &p.members {
                    membership[i as usize] = c as u32;
                }
                counts.push(p.members.len());
                cells.push(Cell { lo: p.lo, hi: p.hi });
                nodes[at] = Node::Leaf(c);
            }
        }
    }
    Partition {
        mode: PartitionMode::Adaptive,
        dim: d,
        cells,
        counts,
        bbox_lo,
        bbox_hi,
        locator: Locator::Tree { nodes },
        min_edge: 0.0,
        max_edge: 0.0,
        membership,
    }
}
