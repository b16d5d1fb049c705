use std::f64::consts::PI;

use proptest::prelude::*;

use epflow_core::diskflow::{
    build_ladder, census, sphere_census, strip_count, z1_time, CensusOptions, DiskField, DiskVariant, LogReal,
};
use epflow_core::flowsim::{
    integrate, occupation, separated_entropy, ChartBounds, Euclidean, FieldSampler, FlatTorus, FlowField,
    FnField,
};

fn swirl() -> FnField<impl Fn(&[f64], &mut [f64])> {
    FnField::new(2, |x: &[f64], o: &mut [f64]| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        o[0] = -x[1] + 0.1 * x[0] * (1.0 - r2);
        o[1] = x[0] + 0.1 * x[1] * (1.0 - r2);
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_property(x in -1.0f64..1.0, y in -1.0f64..1.0, s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let f = swirl();
        let whole = integrate(&f, &[x, y], s + t, 1e-11).unwrap();
        let first = integrate(&f, &[x, y], s, 1e-11).unwrap();
        let second = integrate(&f, first.end(), t, 1e-11).unwrap();
        let (a, b) = (whole.end(), second.end());
        prop_assert!(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() < 1e-8);
    }

    #[test]
    fn census_is_monotone_in_t(ln_a in 0.0f64..30.0, gap in 0.0f64..30.0) {
        let f = DiskField::new(DiskVariant::Z1, build_ladder(8).unwrap());
        let lo = census(&f, LogReal::from_ln(ln_a), CensusOptions::default());
        let hi = census(&f, LogReal::from_ln(ln_a + gap), CensusOptions::default());
        prop_assert!(hi.count >= lo.count);
    }

    /// Multiplying a field by a positive speed leaves its orbit as a point
    /// set unchanged.
    #[test]
    fn orbit_sets_agree_under_time_change(r0 in 0.3f64..0.9, c in 0.2f64..0.8) {
        let unit = FnField::new(2, |x: &[f64], o: &mut [f64]| { o[0] = -x[1]; o[1] = x[0]; });
        let slow = FnField::new(2, move |x: &[f64], o: &mut [f64]| {
            let a = c + 0.3 * x[0] * x[0];
            o[0] = -a * x[1];
            o[1] = a * x[0];
        });
        let a = integrate(&unit, &[r0, 0.0], 2.0 * PI, 1e-10).unwrap();
        let b = integrate(&slow, &[r0, 0.0], 2.0, 1e-10).unwrap();
        // each point of the slow arc lies on the unit circle of radius r0
        for i in 0..b.len() {
            let p = b.state(i);
            prop_assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - r0).abs() < 1e-4);
        }
        prop_assert!(a.len() > 1);
    }
}

#[test]
fn census_counts_and_sphere() {
    let f = DiskField::new(DiskVariant::Z1, build_ladder(6).unwrap());
    let t = z1_time(3);
    let strips = strip_count(&f, t);
    assert_eq!(strips, (2u32.pow(5) + 1 + 2u32.pow(9) + 1).into());
    assert_eq!(sphere_census(&f, t), strips * 2u32 + 3u32);
    let bare = census(
        &f,
        t,
        CensusOptions {
            fixed_point: false,
            boundary_circle: false,
        },
    );
    assert_eq!(bare.count, strip_count(&f, t));
}

#[test]
fn occupation_is_additive() {
    let f = swirl();
    let x0 = [0.4, 0.2];
    let left = occupation(&f, &x0, 15.0, |x| x[0] < -0.2, None, 1e-10).unwrap();
    let right = occupation(&f, &x0, 15.0, |x| x[0] > 0.3, None, 1e-10).unwrap();
    let both = occupation(&f, &x0, 15.0, |x| x[0] < -0.2 || x[0] > 0.3, None, 1e-10).unwrap();
    assert!((left.j + right.j - both.j).abs() < 1e-7);
}

#[test]
fn separated_sets_grow_with_t() {
    // doubling map written as a flow on the circle: x' = x ln 2, read mod 1
    let f = FnField::new(1, |x: &[f64], o: &mut [f64]| o[0] = x[0] * std::f64::consts::LN_2)
        .with_bounds(ChartBounds::Unbounded);
    let s = FieldSampler {
        field: &f,
        tol: 1e-10,
    };
    let seeds: Vec<Vec<f64>> = (0..400).map(|k| vec![k as f64 / 400.0]).collect();
    let torus = FlatTorus { period: 1.0 };
    let mut last = 0;
    for t in 1..=5 {
        let e = separated_entropy(&s, &seeds, t as f64, 0.05, &torus).unwrap();
        assert!(e.cardinality >= last);
        last = e.cardinality;
    }
    let flat = separated_entropy(&s, &seeds, 3.0, 0.05, &Euclidean).unwrap();
    assert!(flat.cardinality >= 1);
}

#[test]
fn disk_field_leaves_no_chart() {
    let f = DiskField::new(DiskVariant::Z0, build_ladder(4).unwrap());
    assert!(matches!(f.bounds(), ChartBounds::Ball { .. }));
    assert!(f.eval([1.2, 0.0]).is_err());
}
