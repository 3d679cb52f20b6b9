use super::PowerError;

/// MWh produced by one GW running for one year (8760 h).
pub const MWH_PER_GW_YEAR: f64 = 8.76e6;

/// Marginal production costs `S̃^i = h⁰_i·S⁰ + h_i·S^i` in €/MWh, from the
/// price vector `S = (S⁰, S¹, …)` with `S⁰` the CO₂ price.
pub fn marginal_costs(prices: &[f64], emission: &[f64], heat: &[f64]) -> Vec<f64> {
    (0..emission.len())
        .map(|i| emission[i] * prices[0] + heat[i] * prices[i + 1])
        .collect()
}

/// Technology indices sorted by ascending marginal cost; ties keep the
/// technology order.
pub fn merit_order(costs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..costs.len()).collect();
    idx.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    idx
}

/// Default knitting constant for the segment `[x₁, x₂] × [y₁, y₂]`.
#[inline]
pub fn knit_parameter(scale: f64, x1: f64, x2: f64, y1: f64, y2: f64) -> f64 {
    scale * (x2 - x1) * (y2 - y1)
}

/// Hyperbolic interpolant `p(x) = a/(b − x) + c` joining `(x₁, y₁)` to
/// `(x₂, y₂)`, increasing and convex, with its pole `b` just right of `x₂`.
pub fn knit(x: f64, x1: f64, x2: f64, y1: f64, y2: f64, a: f64) -> Result<f64, PowerError> {
    if !(y2 > y1) {
        return Err(PowerError::DegenerateKnit { y1, y2 });
    }
    Ok(knit_unchecked(x, x1, x2, y1, y2, a))
}

/// [`knit`] without the ordering check, for callers that already know
/// `x₁ < x₂` and `y₁ < y₂`.
#[inline]
pub(crate) fn knit_unchecked(x: f64, x1: f64, x2: f64, y1: f64, y2: f64, a: f64) -> f64 {
    let dx = x2 - x1;
    let e = 4.0 * a * dx / (y2 - y1);
    let r = (dx * dx + e).sqrt();
    // b − x₁ and b − x₂, the latter in cancellation-free form.
    let gap1 = 0.5 * (dx + r);
    let gap2 = 0.5 * e / (r + dx);
    let gap = if x - x1 <= x2 - x {
        gap1 - (x - x1)
    } else {
        gap2 + (x2 - x)
    };
    a / gap + (y1 - a / gap1)
}

/// Knit on one stack segment, constant `y₁` when the segment is flat.
#[inline]
fn segment_price(demand: f64, x1: f64, x2: f64, y1: f64, y2: f64, scale: f64) -> f64 {
    if y2 > y1 {
        let a = knit_parameter(scale, x1, x2, y1, y2);
        knit_unchecked(demand, x1, x2, y1, y2, a)
    } else {
        y1
    }
}

/// Spot price for demand `demand` (GW) given available capacities `caps`
/// (GW) and marginal costs `costs` (€/MWh), both listed in merit order.
///
/// Below zero demand the price is the cheapest marginal cost. On stack
/// segment `k` it is knitted from `costs[k]` towards `costs[k+1]`; on the
/// last segment it is knitted towards `price_cap` and pinned there once
/// demand exceeds total capacity.
pub fn spot_price(
    demand: f64,
    caps: &[f64],
    costs: &[f64],
    price_cap: f64,
    knit_scale: f64,
) -> f64 {
    let n = caps.len();
    if demand < 0.0 {
        return costs[0];
    }
    let mut lo = 0.0;
    for k in 0..n {
        let hi = lo + caps[k];
        let last = k + 1 == n;
        if demand < hi {
            if !(hi > lo) {
                lo = hi;
                continue;
            }
            let y2 = if last { price_cap } else { costs[k + 1] };
            let p = segment_price(demand, lo, hi, costs[k], y2, knit_scale);
            return p.min(price_cap);
        }
        lo = hi;
    }
    price_cap
}

/// Outputs and profit rates of every technology at one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    /// GW, in merit order.
    pub outputs: Vec<f64>,
    /// €/year, in merit order.
    pub profits: Vec<f64>,
    /// Sum of `outputs` in merit order, GW.
    pub total_output: f64,
    /// Sum of `profits` in merit order, €/year.
    pub total_profit: f64,
}

/// Stack dispatch: technology `k` (merit order) produces
/// `clamp(D − C̄^{(k−1)}, 0, C^{(k)})` and earns `(P − S̃^{(k)})⁺` per MWh,
/// less its maintenance charge `maintenance[k]` (€/year).
pub fn dispatch_profit(
    demand: f64,
    caps: &[f64],
    costs: &[f64],
    price: f64,
    maintenance: &[f64],
) -> Dispatch {
    let n = caps.len();
    let mut outputs = vec![0.0; n];
    let mut profits = vec![0.0; n];
    let (total_output, total_profit) = dispatch_into(
        demand,
        caps,
        costs,
        price,
        maintenance,
        &mut outputs,
        &mut profits,
    );
    Dispatch {
        outputs,
        profits,
        total_output,
        total_profit,
    }
}

/// Allocation-free [`dispatch_profit`]; returns the totals.
///
/// The marginal output is adjusted by at most a few ulps so that the
/// running sum of outputs lands exactly on `min(D⁺, C̄)`, where `C̄` is the
/// running sum of capacities in merit order. When rounding makes that sum
/// unreachable from the marginal output alone, the preceding full output is
/// lowered until the running sum moves by one ulp and the search repeats.
pub fn dispatch_into(
    demand: f64,
    caps: &[f64],
    costs: &[f64],
    price: f64,
    maintenance: &[f64],
    outputs: &mut [f64],
    profits: &mut [f64],
) -> (f64, f64) {
    let n = caps.len();
    let mut cum = 0.0;
    let mut served = 0.0;
    for k in 0..n {
        let next = cum + caps[k];
        outputs[k] = if demand <= cum {
            0.0
        } else if demand >= next {
            caps[k]
        } else {
            let (o, total) = land_on(demand, &mut outputs[..k], served);
            served = total - o;
            o
        };
        served += outputs[k];
        cum = next;
    }
    let mut total_profit = 0.0;
    for k in 0..n {
        profits[k] = outputs[k] * (price - costs[k]).max(0.0) * MWH_PER_GW_YEAR - maintenance[k];
        total_profit += profits[k];
    }
    (served, total_profit)
}

/// Marginal output `o` with `fl(served + o) == demand`, lowering earlier
/// outputs by single ulps if needed. Returns `o` and the final running sum.
fn land_on(demand: f64, before: &mut [f64], mut served: f64) -> (f64, f64) {
    let mut o = demand - served;
    for attempt in 0..=before.len().min(4) {
        for _ in 0..8 {
            let s = served + o;
            if s < demand {
                o = o.next_up();
            } else if s > demand {
                o = o.next_down();
            } else {
                return (o, s);
            }
        }
        let Some(j) = before.iter().rposition(|&x| x > 0.0) else {
            break;
        };
        if attempt == before.len().min(4) {
            break;
        }
        let old = served;
        for _ in 0..64 {
            before[j] = before[j].next_down();
            served = before.iter().fold(0.0, |acc, x| acc + x);
            if served != old {
                break;
            }
        }
        o = demand - served;
    }
    (o, served + o)
}
