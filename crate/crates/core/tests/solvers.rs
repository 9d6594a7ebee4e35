use umco::*;

fn h(p: f64) -> f64 {
    binary_entropy(p).unwrap()
}

/// (alpha, beta) in {0.55, 0.65, ..., 0.95}^2 with alpha != beta.
fn bssc_grid() -> Vec<BsscParams> {
    let vals = [0.55, 0.65, 0.75, 0.85, 0.95];
    let mut out = Vec::new();
    for a in vals {
        for b in vals {
            if a != b {
                out.push(BsscParams::new(a, b).unwrap());
            }
        }
    }
    out
}

#[test]
fn closed_form_matches_value_iteration_on_grid() {
    for p in bssc_grid() {
        let closed = bssc_closed_form(p).unwrap();
        let rvi = relative_value_iteration(&bssc_channel(p), None, None, &InfiniteOptions::default()).unwrap();
        assert!(
            (closed.capacity - rvi.gain).abs() <= 1e-6,
            "{p:?}: {} vs {}",
            closed.capacity,
            rvi.gain
        );
        assert!(closed.warning.is_none());
    }
}

#[test]
fn closed_form_output_kernel_is_doubly_stochastic() {
    for p in bssc_grid() {
        let s = bssc_closed_form(p).unwrap();
        let k = induced_output_kernel(&bssc_channel(p), &s.policy().unwrap()).unwrap();
        assert!((k.prob(0, 0) - s.lambda).abs() < 1e-12);
        assert_eq!(k.prob(0, 0), k.prob(1, 1));
        assert_eq!(k.prob(0, 1), k.prob(1, 0));
    }
}

#[test]
fn occupancy_equals_nu() {
    for p in bssc_grid() {
        let s = bssc_closed_form(p).unwrap();
        let c = average_cost(&bssc_channel(p), &s.policy().unwrap(), &bssc_cost_function()).unwrap();
        assert!((c - s.nu).abs() <= 1e-9);
    }
}

#[test]
fn constrained_closed_form_saturates() {
    for p in bssc_grid() {
        let nu = bssc_closed_form(p).unwrap().nu;
        let caps: Vec<f64> = (0..=20)
            .map(|i| bssc_constrained_closed_form(p, i as f64 / 20.0).unwrap().capacity)
            .collect();
        for (i, w) in caps.windows(2).enumerate() {
            let k = (i + 1) as f64 / 20.0;
            if k <= nu {
                assert!(w[1] >= w[0] - 1e-15, "{p:?} decreases at {k}");
            } else {
                assert_eq!(w[1], caps[20]);
            }
        }
    }
}

#[test]
fn nofeedback_input_induces_feedback_policy_on_grid() {
    for p in bssc_grid() {
        let s = bssc_closed_form(p).unwrap();
        let markov = bssc_nofeedback_markov(p, s.nu).unwrap();
        let r = verify_nofb_induces_fb(
            &bssc_channel(p),
            &markov,
            &s.policy().unwrap(),
            &Distribution::uniform(2).unwrap(),
            50,
            1e-9,
        )
        .unwrap();
        assert!(r.holds, "{p:?}: max deviation {}", r.max_deviation);
    }
}

#[test]
fn numeric_curve_matches_closed_form() {
    let opts = ConstrainedOptions::default();
    let kappas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    for (a, b) in [(1.0, 0.5), (0.95, 0.8), (0.9, 0.6)] {
        let p = BsscParams::new(a, b).unwrap();
        let pts = capacity_cost_curve(&bssc_channel(p), &bssc_cost_function(), &kappas, &opts).unwrap();
        for pt in pts {
            let got = pt.result.unwrap().capacity;
            let want = bssc_constrained_closed_form(p, pt.kappa).unwrap().capacity;
            assert!(
                (got - want).abs() <= 1e-4,
                "({a},{b}) kappa {}: {got} vs {want}",
                pt.kappa
            );
        }
    }
}

#[test]
fn constrained_at_unconstrained_budget() {
    let p = BsscParams::new(1.0, 0.5).unwrap();
    let spec = CostSpec::new(bssc_cost_function(), 0.6).unwrap();
    let r = constrained_capacity(&bssc_channel(p), &spec, &ConstrainedOptions::default()).unwrap();
    assert!((r.capacity - 0.3219).abs() < 1e-4);
    assert!(r.binding);
    let spec = CostSpec::new(bssc_cost_function(), 0.0).unwrap();
    let r = constrained_capacity(&bssc_channel(p), &spec, &ConstrainedOptions::default()).unwrap();
    assert!(r.capacity.abs() < 1e-6 && r.binding);
}

#[test]
fn finite_horizon_average_approaches_gain() {
    let p = BsscParams::new(0.95, 0.8).unwrap();
    let ch = bssc_channel(p);
    let dp = solve_finite_horizon(&ch, 40, None, None, &InnerOptions::default()).unwrap();
    let c = bssc_closed_form(p).unwrap().capacity;
    for b in 0..2 {
        assert!((dp.values[0][b] / 41.0 - c).abs() < 1e-9);
    }
    let ftfi = ftfi_capacity(&dp, &Distribution::uniform(2).unwrap()).unwrap();
    assert!((ftfi / 41.0 - c).abs() < 1e-9);
}

/// Two closed classes: BSC(0.1) on {0, 1} and BSC(0.2) on {2, 3}.
fn two_class_channel() -> UnitMemoryChannel {
    let mut kernel = Vec::new();
    for b_prev in 0..4 {
        let (base, eps) = if b_prev < 2 { (0, 0.1) } else { (2, 0.2) };
        for a in 0..2 {
            let mut row = vec![0.0; 4];
            row[base + a] = 1.0 - eps;
            row[base + 1 - a] = eps;
            kernel.push(row);
        }
    }
    UnitMemoryChannel::new(2, 4, kernel.concat()).unwrap()
}

#[test]
fn reducible_channel_is_reported_and_checked() {
    let ch = two_class_channel();
    let opts = InfiniteOptions {
        max_iter: 500,
        ..Default::default()
    };
    let err = relative_value_iteration(&ch, None, None, &opts).unwrap_err();
    assert!(err.is_convergence_failure(), "{err}");
    let err = policy_iteration(
        &ch,
        &InputPolicy::uniform_for(&ch),
        None,
        None,
        &InfiniteOptions::policy_iteration(),
    )
    .unwrap_err();
    match err {
        Error::Reducible { closed_classes, .. } => assert_eq!(closed_classes, vec![vec![0, 1], vec![2, 3]]),
        other => panic!("{other}"),
    }

    let (g1, g2) = (1.0 - h(0.1), 1.0 - h(0.2));
    let candidate = GeneralizedCandidate {
        gains: vec![g1, g1, g2, g2],
        bias: vec![0.0; 4],
        policy: InputPolicy::uniform_for(&ch),
        multiplier: None,
        cost: None,
    };
    let report = generalized_dp_check(&ch, &candidate, 1e-12).unwrap();
    assert!(report.passed && !report.constant_gain);
    let mut wrong = candidate.clone();
    wrong.gains = vec![g1; 4];
    assert!(!generalized_dp_check(&ch, &wrong, 1e-9).unwrap().passed);
}

#[test]
fn exponent_curve_shape_on_test_channels() {
    let mut cases: Vec<(UnitMemoryChannel, InputPolicy)> = Vec::new();
    for (a, b) in [(0.95, 0.8), (1.0, 0.5), (0.7, 0.9)] {
        let p = BsscParams::new(a, b).unwrap();
        cases.push((bssc_channel(p), bssc_closed_form(p).unwrap().policy().unwrap()));
    }
    let bibo = bibo_umco(0.9, 0.2, 0.1, 0.4).unwrap();
    let pi = policy_iteration(
        &bibo,
        &InputPolicy::uniform_for(&bibo),
        None,
        None,
        &InfiniteOptions::policy_iteration(),
    )
    .unwrap();
    cases.push((bibo, pi.policy));

    let rhos: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    for (ch, pol) in &cases {
        let curve = exponent_curve(ch, pol, &rhos).unwrap();
        assert!(curve.monotonicity_violations.is_empty());
        assert_eq!(curve.samples[0].f_infinity, 0.0);

        let rates: Vec<f64> = (0..=40).map(|i| i as f64 * 0.01).collect();
        let er: Vec<f64> = rates
            .iter()
            .map(|&r| random_coding_exponent(ch, pol, r).unwrap().e_r)
            .collect();
        for w in er.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        for w in er.windows(3) {
            // equal spacing: the midpoint lies on or below the chord
            assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-8, "{w:?}");
        }
    }
}

#[test]
fn path_enumeration_matches_matrix_form() {
    let ch = bibo_umco(0.9, 0.2, 0.1, 0.4).unwrap();
    let pol = InputPolicy::uniform_for(&ch);
    for rho in [0.3, 1.0] {
        for b in 0..2 {
            let m = finite_horizon_exponent_oracle(&ch, &pol, rho, 10, b).unwrap();
            let p = finite_horizon_exponent_paths(&ch, &pol, rho, 10, b).unwrap();
            assert!((m - p).abs() <= 1e-12 * m.abs().max(1.0), "{m} vs {p}");
        }
    }
}

#[test]
fn bound_at_long_block() {
    let p = BsscParams::new(0.95, 0.8).unwrap();
    let ch = bssc_channel(p);
    let pol = bssc_closed_form(p).unwrap().policy().unwrap();
    let er = random_coding_exponent(&ch, &pol, 0.1).unwrap();
    let b = error_probability_bound(&ch, &pol, 0.1, 1000, false).unwrap();
    assert!((b.bound - (8.0 * (-1000.0 * er.e_r).exp2()).min(1.0)).abs() <= 1e-12 * b.bound.max(1e-300));
    assert!(!b.short_block);
    assert!(error_probability_bound(&ch, &pol, 0.1, 5, false).unwrap().short_block);
}

#[test]
fn flat_rows_still_meet_the_conditions() {
    // inputs at b_prev = 0 are nearly indistinguishable, so a tiny objective
    // gap leaves a large score residual unless the solver polishes
    let ch = UnitMemoryChannel::new(
        2,
        2,
        vec![
            0.530228021700658,
            0.4697719782993419,
            0.5354005048005798,
            0.46459949519942034,
            0.8635615270707545,
            0.13643847292924544,
            0.7346474879683065,
            0.2653525120316934,
        ],
    )
    .unwrap();
    let dp = solve_finite_horizon(&ch, 5, None, None, &InnerOptions::default()).unwrap();
    let r = verify_optimality_conditions(&ch, &dp, 1e-9).unwrap();
    assert!(r.passed, "worst violation {}", r.worst_violation);
}

#[test]
fn finite_horizon_values_differ_by_the_bias() {
    // V_0(b) = (n+1) g + h(b) + c, with c the same for every state
    let ch = bibo_umco(0.9, 0.2, 0.1, 0.4).unwrap();
    let sol = relative_value_iteration(&ch, None, None, &InfiniteOptions::default()).unwrap();
    let dp = solve_finite_horizon(&ch, 200, None, None, &InnerOptions::default()).unwrap();
    let c: Vec<f64> = (0..2)
        .map(|b| dp.values[0][b] - sol.bias[b] - 201.0 * sol.gain)
        .collect();
    assert!((c[0] - c[1]).abs() < 1e-8, "{c:?}");
    assert!((sol.bias[0] - sol.bias[1]).abs() > 0.4);
}
