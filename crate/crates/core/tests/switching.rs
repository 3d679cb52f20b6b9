use optswitch::localbasis::LocalizationRule;
use optswitch::pathgen::{
    ArithmeticBrownian, OrnsteinUhlenbeck, PathEnsemble, RngKey, StateMatrix, SweepConfig, TimeGrid,
};
use optswitch::switching::*;
use proptest::prelude::*;
use std::sync::Arc;

fn solve(
    inst: &ToyInstance,
    problem: &LinearRegimes,
    m: usize,
    k: usize,
    key: &str,
    cfg: SolverConfig,
) -> PolicySurface {
    let mut ens = PathEnsemble::forward(
        inst.spec.clone(),
        inst.grid.clone(),
        &SweepConfig::new(m),
        RngKey::default().derive(key),
    )
    .unwrap();
    let cfg = cfg
        .with_cells(k)
        .with_localization(LocalizationRule::Empirical { epsilon: 1e-3 });
    backward_induction(&mut ens, problem, &cfg).unwrap()
}

fn oracle(inst: &ToyInstance, problem: &LinearRegimes, nodes: usize) -> Vec<f64> {
    let cfg = OracleConfig {
        nodes,
        limits: InstanceLimits {
            max_steps: 1_000,
            max_regimes: 3,
            max_nodes: 1_000,
        },
        ..OracleConfig::default()
    };
    brute_force_value(inst.spec.as_ref(), &inst.grid, problem, &cfg)
        .unwrap()
        .values
}

#[test]
fn validate_rejects_free_switches_and_nonzero_diagonal() {
    let free = LinearRegimes::new(vec![0.0; 2], vec![0.0, 1.0], 0.0, 0.5);
    assert!(matches!(
        validate(&free, 1.0),
        Err(SwitchingError::InvalidCosts(_))
    ));

    struct Diagonal(RegimeSet);
    impl SwitchingProblem for Diagonal {
        fn regimes(&self) -> &RegimeSet {
            &self.0
        }
        fn discount_rate(&self) -> f64 {
            0.1
        }
        fn profit(&self, _: f64, _: &[f64], _: usize) -> f64 {
            0.0
        }
        fn cost(&self, _: f64, _: usize, _: usize) -> f64 {
            1.0
        }
    }
    let p = Diagonal(RegimeSet::indexed(2, false).unwrap());
    assert!(matches!(
        validate(&p, 1.0),
        Err(SwitchingError::InvalidCosts(_))
    ));
}

#[test]
fn validate_accepts_affine_costs_and_checks_discount() {
    let mut p = LinearRegimes::new(vec![0.0; 3], vec![0.0, 1.0, 2.0], 1.0, 0.5);
    p.proportional = 0.5;
    let kappa = validate(&p, 2.0).unwrap();
    assert!((kappa - (-0.5f64 * 2.0).exp() * 1.5).abs() < 1e-15);
    p.rho = 0.0;
    assert!(validate(&p, 2.0).is_err());
}

#[test]
fn duplicate_regimes_are_rejected() {
    let err = RegimeSet::new(vec![vec![1.0], vec![1.0]], false).unwrap_err();
    assert!(matches!(err, SwitchingError::InvalidRegimes(_)));
}

#[test]
fn terminal_layers() {
    let spec = ArithmeticBrownian::scalar(0.0, 0.0, 1.0);
    let states = StateMatrix::from_vec(3, 1, vec![-1.0, 0.5, 2.0]);
    let zero = LinearRegimes::new(vec![0.0; 2], vec![0.0; 2], 0.1, 0.5);
    let g = terminal_layer(&states, 2.0, &zero, &TerminalRule::Problem, &spec).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));

    let disc = zero.clone().with_terminal_slopes(vec![1.0, 1.0]);
    let g = terminal_layer(&states, 2.0, &disc, &TerminalRule::Problem, &spec).unwrap();
    for (p, x) in [-1.0, 0.5, 2.0].iter().enumerate() {
        assert_eq!(g[2 * p], (-0.5f64 * 2.0).exp() * x);
    }
}

#[test]
fn frozen_continuation_matches_discounted_integral() {
    let spec = OrnsteinUhlenbeck::scalar(0.0, 1.0, 0.0, 0.5);
    let p = LinearRegimes::new(vec![2.0, 3.0], vec![0.0, 0.0], 0.1, 0.5);
    let states = StateMatrix::from_vec(2, 1, vec![0.3, -0.7]);
    let (t, delta) = (4.0, 1.0);
    let rule = TerminalRule::FrozenContinuation {
        horizon: delta,
        substeps: 10,
        inner_paths: 8,
        key: RngKey::default(),
    };
    let g = terminal_layer(&states, t, &p, &rule, &spec).unwrap();
    let integral = ((-0.5 * t).exp() - (-0.5 * (t + delta)).exp()) / 0.5;
    for path in 0..2 {
        for (i, f) in [2.0, 3.0].iter().enumerate() {
            let want = integral * f;
            assert!(
                ((g[path * 2 + i] - want) / want).abs() < 0.01,
                "{} vs {want}",
                g[path * 2 + i]
            );
        }
    }
}

#[test]
fn terminal_rejects_non_finite_values() {
    let spec = ArithmeticBrownian::scalar(0.0, 0.0, 1.0);
    let p = LinearRegimes::new(vec![0.0], vec![0.0], 0.1, 0.5)
        .with_terminal_slopes(vec![f64::INFINITY]);
    let states = StateMatrix::from_vec(1, 1, vec![1.0]);
    let err = terminal_layer(&states, 1.0, &p, &TerminalRule::Problem, &spec).unwrap_err();
    assert!(matches!(
        err,
        SwitchingError::TerminalValueError { path: 0, regime: 0 }
    ));
}

/// With a single regime the recursion is plain discounted integration.
#[test]
fn single_regime_value_is_discounted_integral() {
    let (rho, t, n) = (0.5, 1.0, 200);
    let inst = ToyInstance {
        spec: Arc::new(ArithmeticBrownian::scalar(0.0, 0.0, 1.0)),
        grid: TimeGrid::new(t, n).unwrap(),
        problem: LinearRegimes::new(vec![1.0], vec![1.0], 0.1, rho),
    };
    let m = 4_000;
    // No clamping, so in-sample profits are those of the raw paths.
    let mut ens = PathEnsemble::forward(
        inst.spec.clone(),
        inst.grid.clone(),
        &SweepConfig::new(m),
        RngKey::default().derive("single"),
    )
    .unwrap();
    let surface = backward_induction(
        &mut ens,
        &inst.problem,
        &SolverConfig::default().with_cells(16),
    )
    .unwrap();
    let closed = (1.0 - (-rho * t).exp()) / rho;
    let sim = simulate_policy(
        Policy::Stay,
        inst.spec.as_ref(),
        &inst.grid,
        &inst.problem,
        &SimulationConfig::new(m, RngKey::default().derive("single"), 0),
        |_, _, _| {},
    )
    .unwrap();
    let (v, se) = (surface.values_t0()[0], sim.standard_error());
    assert!(
        (v - sim.mean()).abs() < 1e-12,
        "in-sample {v} vs path average {}",
        sim.mean()
    );
    assert!((v - closed).abs() <= 3.0 * se, "{v} vs {closed} (se {se})");
    let fresh = simulate_policy(
        Policy::Stay,
        inst.spec.as_ref(),
        &inst.grid,
        &inst.problem,
        &SimulationConfig::new(m, RngKey::default().derive("single-fresh"), 0),
        |_, _, _| {},
    )
    .unwrap();
    assert!((fresh.mean() - closed).abs() <= 3.0 * fresh.standard_error());
}

/// Switching into the profitable regime costs more than it can ever earn.
#[test]
fn prohibitive_cost_means_staying() {
    let inst = ToyInstance::ou_test();
    let rho = inst.problem.rho;
    let bound = inst.grid.horizon() / rho;
    let p = inst.problem.clone().with_fixed_cost(10.0 * bound);
    let mut cfg = SolverConfig::default();
    cfg.keep_actions = true;
    let s = solve(&inst, &p, 5_000, 16, "stay", cfg);
    for k in 0..s.decision_steps().len() {
        let a = s.action_matrix(k).unwrap();
        assert!(a.chunks(2).all(|row| row == [0, 1]));
    }
    assert_eq!(s.actions_t0(), &[0, 1]);
}

#[test]
fn solver_matches_lattice_oracle() {
    let inst = ToyInstance::ou_test();
    let truth = oracle(&inst, &inst.problem, 51);
    let s = solve(
        &inst,
        &inst.problem,
        40_000,
        64,
        "oracle",
        SolverConfig::default(),
    );
    for i in 0..2 {
        let gap = (s.values_t0()[i] - truth[i]).abs() / truth[i].abs();
        assert!(
            gap <= 0.05,
            "regime {i}: {} vs {} ({gap})",
            s.values_t0()[i],
            truth[i]
        );
    }
}

#[test]
fn oracle_refuses_large_instances() {
    let inst = ToyInstance::ou_with(1.0, 13).unwrap();
    let err = brute_force_value(
        inst.spec.as_ref(),
        &inst.grid,
        &inst.problem,
        &OracleConfig::default(),
    );
    assert!(matches!(err, Err(SwitchingError::InstanceTooLarge(_))));
    let inst = ToyInstance::ou_test();
    let cfg = OracleConfig {
        nodes: 52,
        ..OracleConfig::default()
    };
    let err = brute_force_value(inst.spec.as_ref(), &inst.grid, &inst.problem, &cfg);
    assert!(matches!(err, Err(SwitchingError::InstanceTooLarge(_))));
}

#[test]
fn out_of_sample_policies_are_feasible_lower_bounds() {
    let inst = ToyInstance::ou_test();
    let m = 20_000;
    let s = solve(
        &inst,
        &inst.problem,
        m,
        32,
        "train",
        SolverConfig::default(),
    );
    let run = |policy, key: &str| {
        simulate_policy(
            policy,
            inst.spec.as_ref(),
            &inst.grid,
            &inst.problem,
            &SimulationConfig::new(m, RngKey::default().derive(key), 0),
            |_, _, _| {},
        )
        .unwrap()
    };
    let optimal = run(Policy::Optimal(&s), "test");
    let nothing = run(Policy::Stay, "test");
    let combined = (optimal.standard_error().powi(2) + s.standard_errors_t0()[0].powi(2)).sqrt();
    assert!(
        optimal.mean() <= s.values_t0()[0] + 3.0 * combined,
        "{} vs {}",
        optimal.mean(),
        s.values_t0()[0]
    );
    assert!(optimal.mean() >= nothing.mean());
    assert!(optimal.switch_counts.iter().any(|&c| c > 0));
    assert_eq!(nothing.switch_histogram(), vec![m]);
}

#[test]
fn value_is_monotone_in_costs() {
    let inst = ToyInstance::ou_test();
    let values: Vec<f64> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&scale| {
            let p = inst
                .problem
                .clone()
                .with_fixed_cost(inst.problem.fixed * scale);
            solve(&inst, &p, 10_000, 32, "costs", SolverConfig::default()).values_t0()[0]
        })
        .collect();
    assert!(
        values[0] >= values[1] && values[1] >= values[2],
        "{values:?}"
    );
}

#[test]
fn dominant_regime_start_is_worth_more() {
    // Regime 1 earns one unit more than regime 0 at every state.
    let inst = ToyInstance::ou_test();
    let p = LinearRegimes::new(vec![0.0, 1.0], vec![1.0, 1.0], 0.05, 0.5);
    let mut cfg = SolverConfig::default().with_audit();
    cfg.keep_estimates = false;
    let s = solve(&inst, &p, 5_000, 16, "dominance", cfg);
    let t0 = s.audit().last().unwrap();
    assert_eq!(t0.step, 0);
    let k = p.cost(0.0, 0, 1);
    for row in t0.values.chunks(2) {
        assert!(row[1] >= row[0] - k);
    }
}

#[test]
fn truncation_error_decays_geometrically_with_horizon() {
    let rho = ToyInstance::ou_test().problem.rho;
    let v: Vec<f64> = [2.0, 4.0, 8.0]
        .iter()
        .map(|&t| {
            let inst = ToyInstance::ou_with(t, (10.0 * t) as usize).unwrap();
            oracle(&inst, &inst.problem, 51)[0]
        })
        .collect();
    let (d1, d2) = ((v[1] - v[0]).abs(), (v[2] - v[1]).abs());
    // Missing tail over [T, 2T] of a stationary profit: C·(e^{−ρT} − e^{−2ρT}).
    let profile = |t: f64| (-rho * t).exp() - (-2.0 * rho * t).exp();
    let c = d1 / profile(2.0);
    assert!(
        d2 <= c * (-rho * 4.0).exp(),
        "{d2} vs bound {}",
        c * (-rho * 4.0).exp()
    );
    let predicted = c * profile(4.0);
    assert!((d2 / predicted - 1.0).abs() < 0.2, "{d2} vs {predicted}");
}

#[test]
fn recursion_identity_replays_bitwise() {
    let inst = ToyInstance::ou_test();
    let cfg = SolverConfig::default().with_audit();
    let s = solve(&inst, &inst.problem, 3_000, 16, "audit", cfg);
    let p = &inst.problem;
    for layer in s.audit() {
        let t = inst.grid.time(layer.step);
        if !layer.decision {
            continue;
        }
        for (mi, row) in layer.values.chunks(2).enumerate() {
            for i in 0..2 {
                let mut best = f64::NEG_INFINITY;
                for j in 0..2 {
                    let g = layer.profit[mi * 2 + j] + layer.continuation[mi * 2 + j];
                    let v = if i == j { g } else { g - p.cost(t, i, j) };
                    best = best.max(v);
                }
                assert_eq!(
                    row[i].to_bits(),
                    best.to_bits(),
                    "step {} path {mi} regime {i}",
                    layer.step
                );
            }
        }
    }
    let terminal = s.terminal().unwrap();
    assert!(terminal.iter().all(|&v| v == 0.0));
}

#[test]
fn fast_and_reference_solves_agree_bitwise() {
    let inst = ToyInstance::ou_test();
    let p = LinearRegimes::new(
        vec![0.0, -0.1, -0.3, -0.6],
        vec![0.0, 0.5, 1.0, 1.5],
        0.02,
        0.5,
    )
    .irreversible(0.01);
    validate(&p, 1.0).unwrap();
    let mut fast = SolverConfig::default().with_audit();
    fast.max_method = MaxMethod::Fast;
    let mut slow = fast.clone();
    slow.max_method = MaxMethod::Reference;
    let a = solve(&inst, &p, 4_000, 16, "fast", fast);
    let b = solve(&inst, &p, 4_000, 16, "fast", slow);
    for (la, lb) in a.audit().iter().zip(b.audit()) {
        assert_eq!(la.values, lb.values);
        assert_eq!(la.actions, lb.actions);
    }
    // Irreversible: actions never lower the regime.
    for layer in a.audit() {
        for row in layer.actions.chunks(4) {
            assert!(row.iter().enumerate().all(|(i, &j)| j as usize >= i));
        }
    }
}

#[test]
fn fast_method_requires_declared_structure() {
    let inst = ToyInstance::ou_test();
    let mut cfg = SolverConfig::default().with_cells(8);
    cfg.max_method = MaxMethod::Fast;
    let mut ens = PathEnsemble::forward(
        inst.spec.clone(),
        inst.grid.clone(),
        &SweepConfig::new(100),
        RngKey::default(),
    )
    .unwrap();
    let err = backward_induction(&mut ens, &inst.problem, &cfg).unwrap_err();
    assert!(matches!(err, SwitchingError::UnsupportedProblem(_)));
}

#[test]
fn deterministic_schedule_tracks_mean_path() {
    let regimes = RegimeSet::grid(&[3, 3], &[0.0, 0.0], 1.0).unwrap();
    let path = vec![vec![0.2, 0.4], vec![1.4, 0.6], vec![1.2, 2.0]];
    let up = |_: usize, i: usize, j: usize| {
        let (a, b) = (unravel(i, &[3, 3]), unravel(j, &[3, 3]));
        a.iter().zip(&b).all(|(x, y)| y >= x)
    };
    assert_eq!(
        deterministic_schedule(&regimes, &path, 0, up),
        vec![0, 4, 5]
    );
}

#[test]
fn action_export_layout() {
    let inst = ToyInstance::ou_test();
    let mut cfg = SolverConfig::default();
    cfg.keep_actions = true;
    let s = solve(&inst, &inst.problem, 200, 4, "export", cfg);
    let bytes = s.actions_to_bytes();
    assert_eq!(&bytes[..4], b"SWPA");
    assert_eq!(bytes.len(), 20 + 10 * (4 + 200 * 2 * 2));
}

fn arb_separable() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|q| {
        (
            prop::collection::vec(0.0f64..1.0, q),
            prop::collection::vec(0.0f64..1.0, q),
            prop::collection::vec(-5.0f64..5.0, q),
        )
    })
}

proptest! {
    #[test]
    fn separable_fast_max_is_reference((k1, k2, g) in arb_separable()) {
        let q = g.len();
        let m = Maximizer::new(CostStructure::Separable { k1, k2 }, q, |_, _| 0.0);
        let (mut v1, mut a1, mut v2, mut a2) = (vec![0.0; q], vec![0u16; q], vec![0.0; q], vec![0u16; q]);
        m.fast(&g, &mut v1, &mut a1, &mut Vec::new()).unwrap();
        m.reference(&g, &mut v2, &mut a2);
        prop_assert_eq!(v1, v2);
        prop_assert_eq!(a1, a2);
    }

    #[test]
    fn grid_fast_max_is_reference(
        shape in prop::collection::vec(1usize..5, 1..4),
        fixed in prop::collection::vec(0.01f64..1.0, 3),
        prop_cost in prop::collection::vec(0.0f64..0.5, 3),
        base in 0.0f64..0.2,
        seed in any::<u64>(),
    ) {
        let d = shape.len();
        let q: usize = shape.iter().product();
        let noise = optswitch::pathgen::CounterNoise::new(RngKey::default(), q);
        let g = noise.noise_for((seed % 1000) as usize, (seed / 1000 % 1000) as usize);
        let m = Maximizer::new(
            CostStructure::Grid { shape: shape.clone(), fixed: fixed[..d].to_vec(), proportional: prop_cost[..d].to_vec(), base },
            q,
            |_, _| 0.0,
        );
        let (mut v1, mut a1, mut v2, mut a2) = (vec![0.0; q], vec![0u16; q], vec![0.0; q], vec![0u16; q]);
        m.fast(&g, &mut v1, &mut a1, &mut Vec::new()).unwrap();
        m.reference(&g, &mut v2, &mut a2);
        prop_assert_eq!(v1, v2);
        prop_assert_eq!(a1, a2);
    }

    #[test]
    fn values_dominate_staying(fixed in 0.01f64..0.5, key in 0u64..1000) {
        let inst = ToyInstance::ou_test();
        let p = inst.problem.clone().with_fixed_cost(fixed);
        let s = solve(&inst, &p, 300, 4, &key.to_string(), SolverConfig::default().with_audit());
        for layer in s.audit() {
            for (mi, row) in layer.values.chunks(2).enumerate() {
                for i in 0..2 {
                    let stay = layer.profit[mi * 2 + i] + layer.continuation[mi * 2 + i];
                    prop_assert!(row[i] >= stay);
                    if layer.actions[mi * 2 + i] as usize == i {
                        prop_assert_eq!(row[i], stay);
                    }
                }
            }
        }
    }

    #[test]
    fn affine_costs_satisfy_triangle(a in 0.01f64..2.0, b in 0.01f64..2.0, q in 2usize..6) {
        let mut p = LinearRegimes::new(vec![0.0; q], vec![0.0; q], a, 0.3);
        p.proportional = b;
        prop_assert!(validate(&p, 3.0).is_ok());
    }
}
