use std::sync::Arc;

use proptest::prelude::*;

use epflow_core::bumpkit::build_w;
use epflow_core::flowsim::ChartMetric;
use epflow_core::suspension::{
    abramov_check, min_ball_frequency, reparam, suspend, suspended_average, wrap01, AbramovParams, BaseMap,
    SlowDownSpec, Speed, SpeedFn, GOLDEN,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_cocycle(y in 0.0f64..1.0, s0 in 0.0f64..1.0, s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let alpha: SpeedFn = Arc::new(|p: &[f64]| 0.5 + 0.3 * p[1] * p[1] + 0.1 * p[0]);
        let flow = reparam(suspend(BaseMap::golden_rotation()).unwrap(), Speed::Custom(alpha)).unwrap();
        let a = |p: &[f64]| 1.0 + p[0] * p[1];
        let x = [y, s0];
        let whole = flow.theta(&a, &x, s + t).unwrap();
        let first = flow.advance_theta(&x, s, &a).unwrap();
        let rest = flow.theta(&a, &first.point, t).unwrap();
        prop_assert!((whole - first.theta - rest).abs() < 1e-6);
    }

    #[test]
    fn theta_of_constant(c in 0.1f64..3.0, t in 0.0f64..5.0) {
        let flow = reparam(suspend(BaseMap::golden_rotation()).unwrap(), Speed::Constant(0.7)).unwrap();
        let th = flow.theta(&|_| c, &[0.2, 0.4], t).unwrap();
        prop_assert!((th - c * t).abs() < 1e-8 * (1.0 + c * t));
    }

    #[test]
    fn slowdown_respects_lower_bound(y in 0.0f64..1.0) {
        let w = build_w(&[0.3, 0.1, 0.03, 0.01], 2).unwrap();
        let sd = SlowDownSpec::new(vec![0.0, 0.5], w, 0.2).unwrap();
        let flow = reparam(suspend(BaseMap::golden_rotation()).unwrap(), Speed::SlowDown(sd)).unwrap();
        let g = flow.gamma_return(&[y]);
        prop_assert!(g >= flow.gamma_lower_bound(&[y]) * (1.0 - 1e-9));
        prop_assert!(g >= 1.0);
    }

    #[test]
    fn cat_metric_is_symmetric(a in prop::array::uniform3(0.0f64..1.0), b in prop::array::uniform3(0.0f64..1.0)) {
        let m = suspend(BaseMap::cat()).unwrap().metric();
        prop_assert!((m.dist(&a, &b) - m.dist(&b, &a)).abs() < 1e-12);
        prop_assert_eq!(m.dist(&a, &a), 0.0);
    }
}

#[test]
fn time_one_is_the_base_map() {
    let sp = suspend(BaseMap::cat()).unwrap();
    for k in 0..100 {
        let y = [k as f64 / 100.0, wrap01(k as f64 * GOLDEN)];
        let q = sp.unit_flow(&[y[0], y[1], 0.0], 1.0);
        let want = [wrap01(2.0 * y[0] + y[1]), wrap01(y[0] + y[1])];
        assert!((q[0] - want[0]).abs() < 1e-12 && (q[1] - want[1]).abs() < 1e-12);
    }
}

#[test]
fn invariance_residual_of_averages() {
    let sp = suspend(BaseMap::golden_rotation()).unwrap();
    let one = |_: &[f64]| 1.0;
    let g = |p: &[f64]| (6.0 * p[0]).sin() + p[1] * p[1];
    let shifted = |p: &[f64]| {
        let q = sp.unit_flow(p, 1.0);
        g(&q)
    };
    let a = suspended_average(&sp, &one, &g, &[0.1, 0.0], 2000.0).unwrap();
    let b = suspended_average(&sp, &one, &shifted, &[0.1, 0.0], 2000.0).unwrap();
    assert!((a.value - b.value).abs() <= 2e-3);
}

#[test]
fn identity_base_has_no_entropy() {
    let params = AbramovParams {
        seeds: 512,
        ..AbramovParams::default()
    };
    let r = abramov_check(&BaseMap::Identity { dim: 2 }, 1.5, &params).unwrap();
    assert!(r.h_flow <= 0.05);
    assert!(abramov_check(&BaseMap::cat(), 5.0, &params).is_err());
}

#[test]
fn ball_frequency_of_golden_rotation() {
    let f = min_ball_frequency(&BaseMap::golden_rotation(), 0.1, 100_000).unwrap();
    assert!((0.15..=0.25).contains(&f));
}
