use impulse_cc::netsim::{simulate, PolicySpec, SimConfig, SimCriterion};
use impulse_cc::verify::{bellman_scan, ScanSpec};
use impulse_cc::{
    solve_threshold_disc, threshold_avg, CriterionParams, DiscountedParams, FlowParams,
    RelativeValueProfile,
};
use serde::{de::DeserializeOwned, Serialize};

fn roundtrip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(v: &T) {
    let json = serde_json::to_string(v).unwrap();
    let back: T = serde_json::from_str(&json).unwrap();
    assert_eq!(&back, v, "{json}");
}

#[test]
fn average_solution_and_scan() {
    let fp = FlowParams::aimd(0.2, 0.5).unwrap();
    let cp = CriterionParams::average(1.3, 2.0).unwrap();
    let s = threshold_avg(&fp, &cp).unwrap();
    roundtrip(&s);
    let p = RelativeValueProfile::new(s);
    roundtrip(&bellman_scan(&p, &ScanSpec::standard(&p, 1e-8)).unwrap());
}

#[test]
fn discounted_summary() {
    let fp = FlowParams::aimd(0.2, 0.5).unwrap();
    let cp = CriterionParams::discounted(1.3, 2.0, 1.0).unwrap();
    let s = solve_threshold_disc(&DiscountedParams::new(&fp, &cp).unwrap()).unwrap();
    roundtrip(&s.summary());
}

#[test]
fn simulation_reports() {
    let fp = FlowParams::aimd(0.2, 0.5).unwrap();
    for (policy, criterion) in [
        (PolicySpec::Threshold { x_bar: 0.8 }, SimCriterion::Average),
        (
            PolicySpec::FixedPeriod { tau: 2.0 },
            SimCriterion::Discounted { rho: 0.5 },
        ),
        (
            PolicySpec::FixedPeriod { tau: f64::INFINITY },
            SimCriterion::Average,
        ),
        (
            PolicySpec::Red {
                min_th: 0.6,
                max_th: 1.0,
                p_max: 0.5,
                dt: 0.1,
            },
            SimCriterion::Average,
        ),
        (PolicySpec::None, SimCriterion::Discounted { rho: 1.0 }),
    ] {
        let cfg = SimConfig::single(fp, 1.3, 2.0, policy, 0.3, 25.0, criterion).unwrap();
        roundtrip(&cfg);
        roundtrip(&simulate(&cfg).unwrap());
    }
}

#[test]
fn infinite_period_is_spelled_out() {
    let json = serde_json::to_string(&PolicySpec::FixedPeriod { tau: f64::INFINITY }).unwrap();
    assert_eq!(json, r#"{"kind":"fixed_period","tau":"inf"}"#);
    let p: PolicySpec = serde_json::from_str(r#"{"kind":"fixed_period","tau":3}"#).unwrap();
    assert_eq!(p, PolicySpec::FixedPeriod { tau: 3.0 });
}
