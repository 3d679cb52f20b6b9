use crate::CliError;
use optswitch::numerics::{quantile_select, quantile_sorted};
use optswitch::switching::RegimeSet;
use std::path::Path;

/// Bins of the emitted per-year density tables.
pub const DENSITY_BINS: usize = 128;
/// Bins of the internal histogram used for yearly quantiles.
const FINE_BINS: usize = 1 << 15;

/// Per-year price histograms over `[0, cap]`; prices at the cap land in the
/// last bin.
#[derive(Debug, Clone)]
pub struct PriceHistograms {
    cap: f64,
    coarse: Vec<Vec<u64>>,
    fine: Vec<Vec<u32>>,
}

impl PriceHistograms {
    pub fn new(years: usize, cap: f64) -> Self {
        Self {
            cap,
            coarse: vec![vec![0; DENSITY_BINS]; years],
            fine: vec![vec![0; FINE_BINS]; years],
        }
    }

    pub fn years(&self) -> usize {
        self.coarse.len()
    }

    fn bin(&self, price: f64, bins: usize) -> usize {
        ((price / self.cap * bins as f64).floor().max(0.0) as usize).min(bins - 1)
    }

    pub fn add(&mut self, year: usize, price: f64) {
        let (c, f) = (self.bin(price, DENSITY_BINS), self.bin(price, FINE_BINS));
        self.coarse[year][c] += 1;
        self.fine[year][f] += 1;
    }

    pub fn counts(&self, year: usize) -> &[u64] {
        &self.coarse[year]
    }

    /// Normalized masses of one year, summing to one.
    pub fn masses(&self, year: usize) -> Vec<f64> {
        let total: u64 = self.coarse[year].iter().sum();
        self.coarse[year]
            .iter()
            .map(|&c| {
                if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                }
            })
            .collect()
    }

    pub fn bin_edges(&self, bin: usize) -> (f64, f64) {
        let w = self.cap / DENSITY_BINS as f64;
        (bin as f64 * w, (bin + 1) as f64 * w)
    }

    /// Quantile of one year's prices, interpolated inside the fine bin.
    pub fn quantile(&self, year: usize, level: f64) -> f64 {
        let hist = &self.fine[year];
        let total: u64 = hist.iter().map(|&c| c as u64).sum();
        if total == 0 {
            return f64::NAN;
        }
        let target = level * total as f64;
        let w = self.cap / FINE_BINS as f64;
        let mut acc = 0u64;
        for (b, &c) in hist.iter().enumerate() {
            let next = acc + c as u64;
            if c > 0 && next as f64 >= target {
                let frac = ((target - acc as f64) / c as f64).clamp(0.0, 1.0);
                return (b as f64 + frac) * w;
            }
            acc = next;
        }
        self.cap
    }

    /// The two largest local maxima of the 128-bin density of `year`.
    pub fn top_modes(&self, year: usize) -> Vec<(usize, f64)> {
        let m = self.masses(year);
        let mut peaks: Vec<(usize, f64)> = (0..m.len())
            .filter(|&b| {
                m[b] > 0.0 && (b == 0 || m[b] > m[b - 1]) && (b + 1 == m.len() || m[b] >= m[b + 1])
            })
            .map(|b| (b, m[b]))
            .collect();
        peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        peaks.truncate(2);
        peaks
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// `strategy,year,bin,price_lo_eur_per_mwh,price_hi_eur_per_mwh,count,mass`.
pub fn write_density(path: &Path, strategies: &[(&str, &PriceHistograms)]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "strategy",
        "year",
        "bin",
        "price_lo_eur_per_mwh",
        "price_hi_eur_per_mwh",
        "count",
        "mass",
    ])?;
    for (name, hist) in strategies {
        for year in 0..hist.years() {
            let masses = hist.masses(year);
            for (b, &c) in hist.counts(year).iter().enumerate() {
                let (lo, hi) = hist.bin_edges(b);
                w.write_record([
                    name.to_string(),
                    year.to_string(),
                    b.to_string(),
                    fmt(lo),
                    fmt(hi),
                    c.to_string(),
                    fmt(masses[b]),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Mean and quantiles of each regime coordinate across paths at one date.
#[derive(Debug, Clone)]
pub struct FleetRow {
    pub step: usize,
    pub time: f64,
    pub coordinate: usize,
    pub mean: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
}

/// Cross-sectional statistics of the regime coordinates held by `regimes`.
pub fn fleet_rows(set: &RegimeSet, step: usize, time: f64, regimes: &[u16]) -> Vec<FleetRow> {
    let dim = set.get(0).len();
    (0..dim)
        .map(|c| {
            let mut v: Vec<f64> = regimes.iter().map(|&r| set.get(r as usize)[c]).collect();
            let mean = optswitch::numerics::pairwise_sum(&v) / v.len() as f64;
            v.sort_by(f64::total_cmp);
            FleetRow {
                step,
                time,
                coordinate: c,
                mean,
                q10: quantile_sorted(&v, 0.1),
                median: quantile_sorted(&v, 0.5),
                q90: quantile_sorted(&v, 0.9),
            }
        })
        .collect()
}

/// `strategy,step,time_years,coordinate,unit,mean,q10,median,q90`.
pub fn write_fleet_paths(
    path: &Path,
    unit: &str,
    strategies: &[(&str, &[FleetRow])],
) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "strategy",
        "step",
        "time_years",
        "coordinate",
        "unit",
        "mean",
        "q10",
        "median",
        "q90",
    ])?;
    for (name, rows) in strategies {
        for r in rows.iter() {
            w.write_record([
                name.to_string(),
                r.step.to_string(),
                fmt(r.time),
                r.coordinate.to_string(),
                unit.to_string(),
                fmt(r.mean),
                fmt(r.q10),
                fmt(r.median),
                fmt(r.q90),
            ])?;
        }
    }
    w.flush().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Joint histogram of terminal regimes:
/// `strategy,regime,coord_0..,unit,paths,fraction`, occupied regimes only.
pub fn write_terminal_fleet(
    path: &Path,
    set: &RegimeSet,
    unit: &str,
    strategies: &[(&str, &[u16])],
) -> Result<(), CliError> {
    let dim = set.get(0).len();
    let mut w = writer(path)?;
    let mut header = vec!["strategy".to_string(), "regime".to_string()];
    header.extend((0..dim).map(|c| format!("coord_{c}")));
    header.extend([
        "unit".to_string(),
        "paths".to_string(),
        "fraction".to_string(),
    ]);
    w.write_record(&header)?;
    for (name, finals) in strategies {
        let mut counts = vec![0usize; set.len()];
        for &r in finals.iter() {
            counts[r as usize] += 1;
        }
        for (r, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
            let mut rec = vec![name.to_string(), r.to_string()];
            rec.extend(set.get(r).iter().map(|v| fmt(*v)));
            rec.extend([
                unit.to_string(),
                c.to_string(),
                fmt(c as f64 / finals.len() as f64),
            ]);
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Terminal fleet against the terminal peak-fuel price, by price decile:
/// `strategy,decile,fuel_lo,fuel_hi,paths,mean_capacity_gw_<tech>..`.
pub fn write_fleet_vs_fuel(
    path: &Path,
    set: &RegimeSet,
    strategies: &[(&str, &[u16], &[f64])],
) -> Result<(), CliError> {
    let dim = set.get(0).len();
    let mut w = writer(path)?;
    let mut header: Vec<String> = [
        "strategy",
        "decile",
        "peak_fuel_lo_eur_per_unit",
        "peak_fuel_hi_eur_per_unit",
        "paths",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..dim).map(|c| format!("mean_capacity_gw_{c}")));
    w.write_record(&header)?;
    for (name, finals, fuel) in strategies {
        let mut sorted = fuel.to_vec();
        let edges: Vec<f64> = (0..=10)
            .map(|k| quantile_select(&mut sorted, k as f64 / 10.0))
            .collect();
        let mut sums = vec![vec![0.0; dim]; 10];
        let mut counts = vec![0usize; 10];
        for (&r, &f) in finals.iter().zip(fuel.iter()) {
            let k = (1..10).filter(|&k| f >= edges[k]).count();
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(set.get(r as usize)) {
                *s += v;
            }
        }
        for k in 0..10 {
            let mut rec = vec![
                name.to_string(),
                k.to_string(),
                fmt(edges[k]),
                fmt(edges[k + 1]),
                counts[k].to_string(),
            ];
            rec.extend(sums[k].iter().map(|s| {
                if counts[k] == 0 {
                    String::new()
                } else {
                    fmt(s / counts[k] as f64)
                }
            }));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// `step,time_years,radius,mean_clamp_distance,standard_error,epsilon,..`.
pub fn write_audit(path: &Path, rows: &[crate::report::AuditRow]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "step",
        "time_years",
        "radius",
        "mean_clamp_distance",
        "standard_error",
        "epsilon",
        "distance_within_epsilon",
        "min_cell_probability",
        "probability_floor",
        "floor_respected",
    ])?;
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.step.to_string(),
            fmt(r.time_years),
            fmt(r.radius),
            fmt(r.mean_clamp_distance),
            fmt(r.standard_error),
            fmt(r.epsilon),
            r.distance_within_epsilon.to_string(),
            opt(r.min_cell_probability),
            opt(r.probability_floor),
            r.floor_respected.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
