use optswitch::localbasis::{
    brownian_cell_probability_floor, brownian_radius, build_partition, build_partition_in,
    localize, regress, Basis, LocalizationDomain, LocalizationRule, PartitionMode,
    TruncationBounds,
};
use optswitch::numerics::{mean_and_se, pairwise_sum};
use optswitch::pathgen::{CounterNoise, NoiseSource, RngKey, StateMatrix};
use proptest::prelude::*;

fn gaussian_pairs(m: usize, key: &str) -> (StateMatrix, Vec<f64>) {
    let noise = CounterNoise::new(RngKey::default().derive(key), 2);
    let mut x = Vec::with_capacity(m);
    let mut y = Vec::with_capacity(m);
    let mut v = [0.0; 2];
    for i in 0..m {
        noise.draw(0, i, &mut v);
        x.push(v[0]);
        y.push(v[0] + v[1]);
    }
    (StateMatrix::from_vec(m, 1, x), y)
}

/// Mean squared error of the estimate of `E[y|x] = x` under the law of `x`.
fn identity_mse(m: usize, k: usize, key: &str) -> f64 {
    let (x, y) = gaussian_pairs(m, key);
    let p = build_partition(&x, k, PartitionMode::Adaptive).unwrap();
    let est = regress(&x, &y, p, TruncationBounds::unbounded(), Basis::Constant).unwrap();
    let (xt, _) = gaussian_pairs(50_000, &format!("{key}-test"));
    let sq: Vec<f64> = xt
        .iter_rows()
        .map(|r| (est.evaluate(r) - r[0]).powi(2))
        .collect();
    pairwise_sum(&sq) / sq.len() as f64
}

#[test]
fn conditional_mean_of_gaussian_pair() {
    let err = identity_mse(100_000, 64, "pair");
    assert!(err <= 0.05, "mean squared error {err}");
}

#[test]
fn error_decreases_along_refinement_schedule() {
    let levels = [(1_000, 8), (16_000, 32), (256_000, 128)];
    let errs: Vec<f64> = levels
        .iter()
        .map(|&(m, k)| identity_mse(m, k, "ladder"))
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "errors {errs:?}");
}

#[test]
fn brownian_clamp_distance_is_below_epsilon() {
    let (t, eps) = (1.0, 0.01);
    let r = brownian_radius(t, eps, 1);
    let noise = CounterNoise::new(RngKey::default().derive("brownian-audit"), 1);
    let mut v = [0.0];
    let dist: Vec<f64> = (0..1_000_000)
        .map(|i| {
            noise.draw(0, i, &mut v);
            let w = v[0] * t.sqrt();
            (w - w.clamp(-r, r)).abs()
        })
        .collect();
    let (mean, se) = mean_and_se(&dist);
    assert!(mean <= eps + 2.0 * se, "E|W - clamp| = {mean} (se {se})");
}

#[test]
fn brownian_min_cell_probability_respects_floor() {
    let (t, eps) = (1.0, 0.01);
    let rule = LocalizationRule::Brownian {
        epsilon: eps,
        center: vec![0.0],
        scale: 1.0,
    };
    let noise = CounterNoise::new(RngKey::default().derive("brownian-cells"), 1);
    let m = 200_000;
    let s = StateMatrix::from_vec(m, 1, (0..m).map(|i| noise.noise_for(0, i)[0]).collect());
    let domain = rule.domain(t, &s);
    let r = brownian_radius(t, eps, 1);
    let k = (2.0 * r / 0.5).floor() as usize;
    let p = build_partition_in(&s, &domain, k, PartitionMode::Uniform).unwrap();
    let (min_edge, _) = p.edge_range();
    assert!(min_edge >= 0.5);
    let floor = brownian_cell_probability_floor(t, eps, 0.5, 1);
    assert!((floor - 0.00125).abs() < 1e-15);
    assert!(
        p.min_cell_probability() >= floor,
        "{} < {floor}",
        p.min_cell_probability()
    );
}

#[test]
fn cell_means_are_exact() {
    let (x, y) = gaussian_pairs(5_000, "means");
    let p = build_partition(&x, 16, PartitionMode::Adaptive).unwrap();
    let member: Vec<u32> = p.membership().to_vec();
    let est = regress(&x, &y, p, TruncationBounds::unbounded(), Basis::Constant).unwrap();
    for c in 0..16 {
        let ys: Vec<f64> = member
            .iter()
            .zip(&y)
            .filter(|(&k, _)| k as usize == c)
            .map(|(_, v)| *v)
            .collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        assert!((est.coefficients(c)[0] - mean).abs() <= 1e-13 * mean.abs().max(1.0));
    }
}

fn arb_box() -> impl Strategy<Value = LocalizationDomain> {
    prop::collection::vec((-10.0f64..10.0, 0.0f64..10.0), 1..4).prop_map(|v| LocalizationDomain {
        lo: v.iter().map(|(a, _)| *a).collect(),
        hi: v.iter().map(|(a, w)| a + w).collect(),
        epsilon: 0.01,
    })
}

proptest! {
    #[test]
    fn clamp_is_idempotent_and_contracting(dom in arb_box(), seed in 0usize..10_000) {
        let d = dom.dim();
        let noise = CounterNoise::new(RngKey::default(), d);
        let a: Vec<f64> = noise.noise_for(1, seed).iter().map(|v| v * 12.0).collect();
        let b: Vec<f64> = noise.noise_for(2, seed).iter().map(|v| v * 12.0).collect();
        let s = StateMatrix::from_vec(2, d, [a.clone(), b.clone()].concat());
        let once = localize(&s, &dom);
        let twice = localize(&once, &dom);
        prop_assert_eq!(&once, &twice);
        for j in 0..d {
            prop_assert!((once.row(0)[j] - once.row(1)[j]).abs() <= (a[j] - b[j]).abs());
        }
        prop_assert!(dom.contains(once.row(0)));
    }

    #[test]
    fn estimates_respect_truncation(
        ys in prop::collection::vec(-1e3f64..1e3, 64),
        lo in -100.0f64..0.0,
        width in 0.0f64..200.0,
        probe in -50.0f64..50.0,
        linear in any::<bool>(),
    ) {
        let x = StateMatrix::from_vec(64, 1, (0..64).map(|i| (i as f64).sin() * 10.0).collect());
        let p = build_partition(&x, 8, PartitionMode::Adaptive).unwrap();
        let bounds = TruncationBounds::new(lo, lo + width).unwrap();
        let basis = if linear { Basis::Linear } else { Basis::Constant };
        let est = regress(&x, &ys, p, bounds, basis).unwrap();
        let v = est.evaluate(&[probe]);
        prop_assert!(v >= lo && v <= lo + width);
    }
}
