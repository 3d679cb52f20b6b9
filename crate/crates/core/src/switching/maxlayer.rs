//! Per-path maximisation `v_i = max_j { g_j − k(i, j) }` over target regimes,
//! where `g_j = h·f_j + Ê_j` is the value of being in `j` after the switch.
//!
//! Ties prefer staying, then the smallest target index.

use super::problem::{unravel, CostStructure};
use super::SwitchingError;
use rayon::prelude::*;

/// Cost data of one date, ready for repeated per-path maximisation.
#[derive(Debug, Clone)]
pub enum Maximizer {
    /// Dense `q × q` discounted cost matrix (`+∞` when inadmissible).
    General {
        q: usize,
        cost: Vec<f64>,
    },
    Separable {
        k1: Vec<f64>,
        k2: Vec<f64>,
    },
    Grid {
        shape: Vec<usize>,
        fixed: Vec<f64>,
        proportional: Vec<f64>,
        base: f64,
        strides: Vec<usize>,
        /// Row-major multi-index of every regime, `q × d` flat.
        coords: Vec<usize>,
    },
}

impl Maximizer {
    /// Build from a declared structure; `General` calls `cost` for every pair.
    pub fn new(structure: CostStructure, q: usize, cost: impl Fn(usize, usize) -> f64) -> Self {
        match structure {
            CostStructure::General => {
                let cost = (0..q * q).map(|ij| cost(ij / q, ij % q)).collect();
                Maximizer::General { q, cost }
            }
            CostStructure::Separable { k1, k2 } => Maximizer::Separable { k1, k2 },
            CostStructure::Grid {
                shape,
                fixed,
                proportional,
                base,
            } => {
                let mut strides = vec![1; shape.len()];
                for c in (0..shape.len().saturating_sub(1)).rev() {
                    strides[c] = strides[c + 1] * shape[c + 1];
                }
                let q: usize = shape.iter().product();
                let coords = (0..q).flat_map(|f| unravel(f, &shape)).collect();
                Maximizer::Grid {
                    shape,
                    fixed,
                    proportional,
                    base,
                    strides,
                    coords,
                }
            }
        }
    }

    pub fn regimes(&self) -> usize {
        match self {
            Maximizer::General { q, .. } => *q,
            Maximizer::Separable { k1, .. } => k1.len(),
            Maximizer::Grid { shape, .. } => shape.iter().product(),
        }
    }

    pub fn supports_fast(&self) -> bool {
        !matches!(self, Maximizer::General { .. })
    }

    /// `O(q²)` double loop.
    pub fn reference(&self, g: &[f64], values: &mut [f64], actions: &mut [u16]) {
        let q = g.len();
        match self {
            Maximizer::General { cost, .. } => {
                for i in 0..q {
                    let (mut v, mut a) = (g[i], i);
                    for j in 0..q {
                        if j == i {
                            continue;
                        }
                        let c = cost[i * q + j];
                        if c.is_finite() {
                            let cand = g[j] - c;
                            if cand > v {
                                v = cand;
                                a = j;
                            }
                        }
                    }
                    values[i] = v;
                    actions[i] = a as u16;
                }
            }
            Maximizer::Separable { k1, k2 } => {
                for i in 0..q {
                    let (mut v, mut a) = (g[i], i);
                    for j in i + 1..q {
                        let cand = (g[j] - k2[j]) - k1[i];
                        if cand > v {
                            v = cand;
                            a = j;
                        }
                    }
                    values[i] = v;
                    actions[i] = a as u16;
                }
            }
            Maximizer::Grid {
                shape,
                fixed,
                proportional,
                base,
                ..
            } => {
                let d = shape.len();
                let idx: Vec<Vec<usize>> = (0..q).map(|f| unravel(f, shape)).collect();
                for i in 0..q {
                    let (mut v, mut a) = (g[i], i);
                    'targets: for j in 0..q {
                        if j == i {
                            continue;
                        }
                        let mut mask = 0usize;
                        for c in 0..d {
                            match idx[j][c].cmp(&idx[i][c]) {
                                std::cmp::Ordering::Less => continue 'targets,
                                std::cmp::Ordering::Greater => mask |= 1 << c,
                                std::cmp::Ordering::Equal => {}
                            }
                        }
                        let a_j = g[j] - grid_prop(proportional, &idx[j], mask);
                        let cand = (a_j - grid_offset(fixed, proportional, &idx[i], mask)) - base;
                        if cand > v {
                            v = cand;
                            a = j;
                        }
                    }
                    values[i] = v;
                    actions[i] = a as u16;
                }
            }
        }
    }

    /// Partial-maximum sweep; `Err` for costs without declared structure.
    pub fn fast(
        &self,
        g: &[f64],
        values: &mut [f64],
        actions: &mut [u16],
        scratch: &mut Vec<(f64, u32)>,
    ) -> Result<(), SwitchingError> {
        match self {
            Maximizer::General { .. } => Err(SwitchingError::UnsupportedProblem(
                "fast maximisation needs irreversible, separable costs".into(),
            )),
            Maximizer::Separable { k1, k2 } => {
                let q = g.len();
                let mut best = f64::NEG_INFINITY;
                let mut best_j = usize::MAX;
                for i in (0..q).rev() {
                    values[i] = g[i];
                    actions[i] = i as u16;
                    if best_j != usize::MAX {
                        let cand = best - k1[i];
                        if cand > g[i] {
                            values[i] = cand;
                            actions[i] = best_j as u16;
                        }
                    }
                    let a_i = g[i] - k2[i];
                    if a_i >= best {
                        best = a_i;
                        best_j = i;
                    }
                }
                Ok(())
            }
            Maximizer::Grid {
                shape,
                fixed,
                proportional,
                base,
                strides,
                coords,
            } => {
                let costs = GridCosts {
                    fixed,
                    prop: proportional,
                    base: *base,
                };
                grid_fast(shape, strides, coords, &costs, g, values, actions, scratch);
                Ok(())
            }
        }
    }
}

/// `Σ_{c∈mask} prop[c]·j[c]`, summed in component order.
#[inline]
fn grid_prop(prop: &[f64], j: &[usize], mask: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..j.len() {
        if mask & (1 << c) != 0 {
            s += prop[c] * j[c] as f64;
        }
    }
    s
}

/// `Σ_{c∈mask} (fixed[c] − prop[c]·i[c])`, summed in component order.
#[inline]
fn grid_offset(fixed: &[f64], prop: &[f64], i: &[usize], mask: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..i.len() {
        if mask & (1 << c) != 0 {
            s += fixed[c] - prop[c] * i[c] as f64;
        }
    }
    s
}

#[inline]
fn better(a: (f64, u32), b: (f64, u32)) -> (f64, u32) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

struct GridCosts<'a> {
    fixed: &'a [f64],
    prop: &'a [f64],
    base: f64,
}

#[allow(clippy::too_many_arguments)]
fn grid_fast(
    shape: &[usize],
    strides: &[usize],
    coords: &[usize],
    costs: &GridCosts<'_>,
    g: &[f64],
    values: &mut [f64],
    actions: &mut [u16],
    table: &mut Vec<(f64, u32)>,
) {
    let q = g.len();
    let d = shape.len();
    for i in 0..q {
        values[i] = g[i];
        actions[i] = i as u16;
    }
    let mut best: Vec<(f64, u32)> = vec![(f64::NEG_INFINITY, u32::MAX); q];
    for mask in 1usize..(1 << d) {
        table.clear();
        for (j, gj) in g.iter().enumerate() {
            let idx = &coords[j * d..(j + 1) * d];
            table.push((gj - grid_prop(costs.prop, idx, mask), j as u32));
        }
        // Suffix maxima along every component of the mask: afterwards
        // table[i] is the best j with j_c ≥ i_c on the mask, j_c = i_c elsewhere.
        for c in 0..d {
            if mask & (1 << c) == 0 {
                continue;
            }
            for flat in (0..q).rev() {
                if coords[flat * d + c] + 1 < shape[c] {
                    table[flat] = better(table[flat], table[flat + strides[c]]);
                }
            }
        }
        for i in 0..q {
            let idx = &coords[i * d..(i + 1) * d];
            // Strict increase on the mask: shift by one step in each masked component.
            let mut target = i;
            let mut ok = true;
            for c in 0..d {
                if mask & (1 << c) != 0 {
                    if idx[c] + 1 >= shape[c] {
                        ok = false;
                        break;
                    }
                    target += strides[c];
                }
            }
            if !ok {
                continue;
            }
            let (a, j) = table[target];
            let cand = (
                (a - grid_offset(costs.fixed, costs.prop, idx, mask)) - costs.base,
                j,
            );
            best[i] = better(best[i], cand);
        }
    }
    for i in 0..q {
        if best[i].1 != u32::MAX && best[i].0 > values[i] {
            values[i] = best[i].0;
            actions[i] = best[i].1 as u16;
        }
    }
}

/// Apply the fast routine to every path of a path-major `M × q` layer.
pub fn fast_max_layer(
    maximizer: &Maximizer,
    g: &[f64],
    values: &mut [f64],
    actions: &mut [u16],
) -> Result<(), SwitchingError> {
    let q = maximizer.regimes();
    if !maximizer.supports_fast() {
        return Err(SwitchingError::UnsupportedProblem(
            "fast maximisation needs irreversible, separable costs".into(),
        ));
    }
    values
        .par_chunks_mut(q)
        .zip(actions.par_chunks_mut(q))
        .zip(g.par_chunks(q))
        .try_for_each_init(Vec::new, |scratch, ((v, a), gm)| {
            maximizer.fast(gm, v, a, scratch)
        })
}

/// Apply the quadratic reference to every path of a path-major `M × q` layer.
pub fn reference_max_layer(
    maximizer: &Maximizer,
    g: &[f64],
    values: &mut [f64],
    actions: &mut [u16],
) {
    let q = maximizer.regimes();
    values
        .par_chunks_mut(q)
        .zip(actions.par_chunks_mut(q))
        .zip(g.par_chunks(q))
        .for_each(|((v, a), gm)| maximizer.reference(gm, v, a));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / (1u64 << 53) as f64
    }

    #[test]
    fn two_regimes_direct() {
        let m = Maximizer::new(
            CostStructure::Separable {
                k1: vec![0.5, 0.0],
                k2: vec![0.0, 0.5],
            },
            2,
            |_, _| 0.0,
        );
        let g = [1.0, 2.5];
        let (mut v, mut a) = ([0.0; 2], [0u16; 2]);
        m.fast(&g, &mut v, &mut a, &mut Vec::new()).unwrap();
        assert_eq!(v, [1.5, 2.5]);
        assert_eq!(a, [1, 1]);
        let g = [1.0, 1.5];
        m.fast(&g, &mut v, &mut a, &mut Vec::new()).unwrap();
        assert_eq!(a, [0, 1], "tie must stay");
    }

    #[test]
    fn separable_matches_reference() {
        let mut s = 7u64;
        for q in [8usize, 64] {
            for _ in 0..20 {
                let k1: Vec<f64> = (0..q).map(|_| lcg(&mut s)).collect();
                let k2: Vec<f64> = (0..q).map(|_| lcg(&mut s)).collect();
                let g: Vec<f64> = (0..q).map(|_| 3.0 * lcg(&mut s)).collect();
                let m = Maximizer::new(CostStructure::Separable { k1, k2 }, q, |_, _| 0.0);
                let (mut v1, mut a1) = (vec![0.0; q], vec![0u16; q]);
                let (mut v2, mut a2) = (vec![0.0; q], vec![0u16; q]);
                m.fast(&g, &mut v1, &mut a1, &mut Vec::new()).unwrap();
                m.reference(&g, &mut v2, &mut a2);
                assert_eq!(
                    v1.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                    v2.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
                );
                assert_eq!(a1, a2);
            }
        }
    }

    #[test]
    fn grid_matches_reference() {
        let mut s = 11u64;
        for shape in [vec![5usize, 4], vec![3, 3, 2], vec![7]] {
            let q: usize = shape.iter().product();
            for _ in 0..20 {
                let d = shape.len();
                let fixed: Vec<f64> = (0..d).map(|_| 0.2 * lcg(&mut s)).collect();
                let prop: Vec<f64> = (0..d).map(|_| 0.3 * lcg(&mut s)).collect();
                let g: Vec<f64> = (0..q).map(|_| 2.0 * lcg(&mut s)).collect();
                let m = Maximizer::new(
                    CostStructure::Grid {
                        shape: shape.clone(),
                        fixed,
                        proportional: prop,
                        base: 0.1 * lcg(&mut s),
                    },
                    q,
                    |_, _| 0.0,
                );
                let (mut v1, mut a1) = (vec![0.0; q], vec![0u16; q]);
                let (mut v2, mut a2) = (vec![0.0; q], vec![0u16; q]);
                m.fast(&g, &mut v1, &mut a1, &mut Vec::new()).unwrap();
                m.reference(&g, &mut v2, &mut a2);
                assert_eq!(v1, v2);
                assert_eq!(a1, a2);
            }
        }
    }

    #[test]
    fn general_has_no_fast_path() {
        let m = Maximizer::new(
            CostStructure::General,
            2,
            |i, j| if i == j { 0.0 } else { 1.0 },
        );
        let err = m.fast(&[0.0, 3.0], &mut [0.0; 2], &mut [0; 2], &mut Vec::new());
        assert!(matches!(err, Err(SwitchingError::UnsupportedProblem(_))));
        let (mut v, mut a) = ([0.0; 2], [0u16; 2]);
        m.reference(&[0.0, 3.0], &mut v, &mut a);
        assert_eq!(v, [2.0, 3.0]);
        assert_eq!(a, [1, 1]);
    }
}
