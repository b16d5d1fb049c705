use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use epflow_core::bumpkit::gamma0;
use epflow_core::diskflow::{build_ladder, DiskField, DiskVariant};
use epflow_core::flowsim::{integrate, FlowField};
use epflow_core::tearkit::{
    delta, return_ratio, rho_curve, sigma_curve, EmbeddedDiskFields, RotatedField, TearField, TearVariant,
    H1_X1,
};

fn eval(f: &impl FlowField, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    f.eval(x, &mut out);
    out
}

/// Rotation by `angle` in the `(x_i, x_j)` plane.
fn givens(x: &[f64], i: usize, j: usize, angle: f64) -> Vec<f64> {
    let (c, s) = (angle.cos(), angle.sin());
    let mut y = x.to_vec();
    y[i] = c * x[i] - s * x[j];
    y[j] = s * x[i] + c * x[j];
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rotation_equivariance(
        p in prop::array::uniform5(-1.8f64..1.8),
        angle in 0.0f64..6.3,
        i in 1usize..5,
        j in 1usize..5,
    ) {
        prop_assume!(i != j);
        for variant in [TearVariant::Z, TearVariant::Z1] {
            let f = RotatedField::new(variant, 5).unwrap();
            let lhs = eval(&f, &givens(&p, i, j, angle));
            let rhs = givens(&eval(&f, &p), i, j, angle);
            for (a, b) in lhs.iter().zip(&rhs) {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn mirror_antisymmetry(p in prop::array::uniform5(-1.9f64..1.9)) {
        let f = RotatedField::new(TearVariant::Z1, 5).unwrap();
        let mut q = p;
        q[0] = -p[0];
        let a = eval(&f, &p);
        let b = eval(&f, &q);
        prop_assert!((a[0] - b[0]).abs() < 1e-12 * (1.0 + a[0].abs()));
        for k in 1..5 {
            prop_assert!((a[k] + b[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_is_monotone_along_curves(s1 in -1.9f64..1.9, ds in 1e-3f64..0.1, a in 0.0f64..1.0, b in 0.0f64..2.0) {
        let s2 = s1 + ds;
        prop_assert!(delta(rho_curve(a, s2))[0] > delta(rho_curve(a, s1))[0]);
        let (p, q) = (delta(sigma_curve(b, s1)), delta(sigma_curve(b, s2)));
        prop_assert!(q[0] > p[0]);
        prop_assert!((p[1] - b).abs() < 1e-12 && (q[1] - b).abs() < 1e-12);
    }
}

#[test]
fn zero_set_is_the_lens() {
    let z = TearField::new(TearVariant::Z);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let p = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let v = z.planar(p);
        let speed = v[0].hypot(v[1]);
        let in_lens = p[0].abs() <= 1.0 && p[1].abs() <= gamma0(p[0]);
        if in_lens {
            assert_eq!(speed, 0.0, "{p:?}");
        } else {
            assert!(speed > 1e-14, "{p:?} {speed}");
        }
        assert!(v[0] >= 0.0);
    }
    assert_eq!(z.planar([0.3, 0.0]), [0.0, 0.0]);
}

#[test]
fn constant_pair_has_unit_ratio() {
    let z = RotatedField::new(TearVariant::Z, 5).unwrap();
    let samples: Vec<Vec<f64>> = [0.5, 1.2, 2.0]
        .iter()
        .map(|r| vec![H1_X1, *r, 0.0, 0.0, 0.0])
        .collect();
    let r = return_ratio(&z, &z, &samples, 1e4, 1e-9).unwrap();
    assert_eq!(r.used, 3);
    assert!((r.min_ratio - 1.0).abs() < 1e-12 && (r.max_ratio - 1.0).abs() < 1e-12);
}

#[test]
fn far_samples_have_nearly_equal_transit_times() {
    let z = RotatedField::new(TearVariant::Z, 5).unwrap();
    let z1 = RotatedField::new(TearVariant::Z1, 5).unwrap();
    let samples: Vec<Vec<f64>> = [1.0, 1.3, 1.6, 2.0, 2.4]
        .iter()
        .map(|r| vec![H1_X1, 0.0, *r, 0.0, 0.0])
        .collect();
    let r = return_ratio(&z, &z1, &samples, 1e4, 1e-9).unwrap();
    assert!(r.min_ratio >= 0.9 && r.max_ratio <= 1.1, "{r:?}");
}

#[test]
fn no_recurrence_between_the_disks() {
    let disk = DiskField::new(DiskVariant::Z2, build_ladder(5).unwrap());
    let e = EmbeddedDiskFields::new(disk, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 100 {
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.8..0.8)).collect();
        if !EmbeddedDiskFields::in_d2(&x) || EmbeddedDiskFields::in_d1(&x) {
            continue;
        }
        let tr = integrate(&e, &x, 0.5, 1e-9).unwrap();
        let sums: Vec<f64> = (0..tr.len()).map(|i| tr.state(i)[2..].iter().sum()).collect();
        for (i, w) in sums.windows(2).enumerate() {
            if EmbeddedDiskFields::in_d2(tr.state(i + 1)) {
                assert!(w[1] > w[0]);
            }
        }
        checked += 1;
    }
}
