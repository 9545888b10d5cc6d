use impulse_cc::discounted_policy::{count_sign_changes, limit_threshold, scan_free_boundary};
use impulse_cc::model::{segment_reward, time_to_reach, Weighting};
use impulse_cc::netsim::{simulate, PolicySpec, SimConfig, SimCriterion};
use impulse_cc::verify::{bellman_scan, fd_check, ScanSpec};
use impulse_cc::{
    solve_threshold_disc, threshold_avg, CriterionParams, DiscountedParams, FlowParams,
    NetworkSpec, RelativeValueProfile,
};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// `α` away from 1 and from the degenerate `2 - α - γ = 0`.
fn average_params() -> impl Strategy<Value = (FlowParams, CriterionParams)> {
    (
        0.05f64..2.0,
        0.1f64..0.9,
        prop_oneof![Just(0.0), Just(0.5), Just(1.0), 0.0f64..1.0],
        prop_oneof![0.1f64..0.9, 1.1f64..2.5],
        0.2f64..5.0,
    )
        .prop_filter("degenerate exponent", |(_, _, g, al, _)| {
            (2.0 - al - g).abs() > 0.05
        })
        .prop_map(|(a, b, g, al, l)| {
            (
                FlowParams::new(a, b, g).unwrap(),
                CriterionParams::average(al, l).unwrap(),
            )
        })
}

fn discounted_params() -> impl Strategy<Value = DiscountedParams> {
    (
        0.05f64..2.0,
        0.1f64..0.9,
        1.05f64..1.95,
        0.2f64..5.0,
        0.05f64..5.0,
    )
        .prop_map(|(a, b, alpha, lambda, rho)| DiscountedParams {
            a,
            b,
            alpha,
            lambda,
            rho,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cycle_average_is_the_gain((fp, cp) in average_params()) {
        let s = threshold_avg(&fp, &cp).unwrap();
        let lo = fp.b * s.x_bar;
        let r = segment_reward(lo, s.x_bar, &fp, &cp, Weighting::Average, 0.0).unwrap();
        let tau = time_to_reach(lo, s.x_bar, &fp).unwrap();
        prop_assert!(rel(r / tau, s.g) < 1e-9);
    }

    #[test]
    fn average_relative_value_has_accurate_slope((fp, cp) in average_params()) {
        let p = RelativeValueProfile::new(threshold_avg(&fp, &cp).unwrap());
        // The difference step is 1e-6 (1 + x); stay clear of the origin.
        let grid: Vec<f64> = (1..40)
            .map(|i| p.solution.x_bar * i as f64 / 40.0)
            .filter(|&x| x > 1e-3)
            .collect();
        prop_assume!(!grid.is_empty());
        prop_assert!(fd_check(&p, &grid, 1).unwrap() <= 1e-6);
    }

    #[test]
    fn threshold_nonincreasing_in_b(
        (fp, cp) in average_params(),
    ) {
        let mut last = f64::INFINITY;
        for i in 1..=9 {
            let f = FlowParams { b: i as f64 / 10.0, ..fp };
            let x = threshold_avg(&f, &cp).unwrap().x_bar;
            prop_assert!(x <= last * (1.0 + 1e-12));
            last = x;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn average_residual_scan_is_clean((fp, cp) in average_params()) {
        let p = RelativeValueProfile::new(threshold_avg(&fp, &cp).unwrap());
        let x_bar = p.solution.x_bar;
        let mut spec = ScanSpec::around(x_bar, fp.b, 10_000, 1e-8);
        spec.lo = x_bar * 1e-3;
        spec.hi = x_bar / fp.b.powi(6);
        // Residuals scale with the reward rate, which is large near 0 for α > 1.
        let scale = 1.0 + cp.alpha.max(1.0) * spec.lo.powf(1.0 - cp.alpha).abs();
        spec.tolerance *= scale;
        spec.equality_tolerance *= scale;
        let r = bellman_scan(&p, &spec).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn free_boundary_has_one_crossing(p in discounted_params()) {
        let scan = scan_free_boundary(&p, 1e-4, 1e4, 1250).unwrap();
        prop_assert_eq!(count_sign_changes(&scan), (1, 0));
    }

    #[test]
    fn discounted_residual_scan_is_clean(p in discounted_params()) {
        let vf = solve_threshold_disc(&p).unwrap().value_function();
        let spec = ScanSpec::standard(&vf, 1e-6);
        let r = bellman_scan(&vf, &spec).unwrap();
        // Values grow like x^{1-α}/(ρ(α-1)) near the origin; compare relative
        // to that scale.
        let scale = 1.0 + spec.lo.powf(1.0 - p.alpha) / (p.rho * (p.alpha - 1.0));
        prop_assert!(r.max_positive_residual <= 1e-6 * scale, "{:?}", r);
        prop_assert!(r.continuation_equality <= 1e-6 * scale, "{:?}", r);
        prop_assert!(r.intervention_equality <= 1e-6 * scale, "{:?}", r);
        prop_assert!(r.continuity_gap <= 1e-6 * scale, "{:?}", r);
    }

    #[test]
    fn discounted_threshold_below_pointwise_optimum_scale(p in discounted_params()) {
        // x̄ is positive and finite; the limit threshold exists.
        let s = solve_threshold_disc(&p).unwrap();
        prop_assert!(s.x_bar > 0.0 && s.x_bar.is_finite());
        prop_assert!(limit_threshold(&p).unwrap() > 0.0);
    }

    #[test]
    fn simulation_is_deterministic_and_permutation_invariant(
        x0 in proptest::collection::vec(0.01f64..2.0, 3),
        thresholds in proptest::collection::vec(0.1f64..1.0, 3),
        horizon in 1.0f64..30.0,
    ) {
        let fp = FlowParams::aimd(0.2, 0.5).unwrap();
        let routing = vec![vec![1, 0, 1], vec![1, 1, 0]];
        let cfg = SimConfig {
            network: NetworkSpec::new(routing.clone(), vec![1.0, 2.0], vec![fp; 3], 0.5).unwrap(),
            policies: thresholds.iter().map(|&x_bar| PolicySpec::Threshold { x_bar }).collect(),
            initial_rates: x0.clone(),
            horizon,
            criterion: SimCriterion::Average,
            seed: 0,
            warmup: 0.0,
        };
        let a = simulate(&cfg).unwrap();
        prop_assert_eq!(&a, &simulate(&cfg).unwrap());
        let perm = [1usize, 2, 0];
        let permuted = SimConfig {
            network: NetworkSpec::new(
                routing.iter().map(|row| perm.iter().map(|&i| row[i]).collect()).collect(),
                vec![1.0, 2.0],
                vec![fp; 3],
                0.5,
            ).unwrap(),
            policies: perm.iter().map(|&i| cfg.policies[i]).collect(),
            initial_rates: perm.iter().map(|&i| x0[i]).collect(),
            ..cfg.clone()
        };
        let b = simulate(&permuted).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            prop_assert_eq!(&a.flows[i], &b.flows[j]);
        }
        prop_assert!(rel(a.avg_reward, b.avg_reward) < 1e-12);
        let sum: f64 = a.flows.iter().map(|f| f.avg_reward).sum();
        prop_assert!(rel(a.avg_reward, sum) < 1e-9);
    }
}

#[test]
fn reference_free_boundary_has_one_crossing_on_dense_grid() {
    let fp = FlowParams::aimd(0.2, 0.5).unwrap();
    let cp = CriterionParams::discounted(1.3, 2.0, 1.0).unwrap();
    let p = DiscountedParams::new(&fp, &cp).unwrap();
    let scan = scan_free_boundary(&p, 1e-4, 1e4, 1250).unwrap();
    assert!(scan.len() >= 10_000);
    assert_eq!(count_sign_changes(&scan), (1, 0));
}

#[test]
fn transversality_proxy() {
    let fp = FlowParams::aimd(0.2, 0.5).unwrap();
    let cp = CriterionParams::discounted(1.3, 2.0, 1.0).unwrap();
    let p = DiscountedParams::new(&fp, &cp).unwrap();
    let vf = solve_threshold_disc(&p).unwrap().value_function();
    let x_bar = vf.solution.x_bar;
    let t = 100.0 / p.rho;
    let sup = (0..=200)
        .map(|i| {
            vf.value(p.b * x_bar * (1.0 / (p.b * p.b)).powf(i as f64 / 200.0))
                .unwrap()
                .abs()
        })
        .fold(0.0, f64::max);
    assert!((-p.rho * t).exp() * sup <= 1e-8);
}

#[test]
fn analytic_value_derivatives_match_differences() {
    let fp = FlowParams::aimd(0.2, 0.5).unwrap();
    let cp = CriterionParams::discounted(1.3, 2.0, 1.0).unwrap();
    let vf = solve_threshold_disc(&DiscountedParams::new(&fp, &cp).unwrap())
        .unwrap()
        .value_function();
    let x_bar = vf.solution.x_bar;
    let grid: Vec<f64> = (1..300)
        .map(|i| x_bar / 100.0 * (3200f64).powf(i as f64 / 300.0))
        .filter(|&x| {
            // Keep away from breakpoints.
            let r = (x / x_bar).ln() / 2f64.ln();
            x < x_bar * 0.999 || (r - r.round()).abs() > 1e-3
        })
        .collect();
    assert!(fd_check(&vf, &grid, 1).unwrap() <= 1e-5);
}
