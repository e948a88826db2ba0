mod common;

use std::f64::consts::PI;

use auvnav::so3::{exp_so3, from_euler, log_so3, skew, to_euler, Rotation};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn vector(bound: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-bound..bound).prop_map(Vector3::from)
}

/// Rotation vectors with magnitude in `(lo, hi)`.
fn rotation_vector(lo: f64, hi: f64) -> impl Strategy<Value = Vector3<f64>> {
    (vector(1.0), lo..hi).prop_filter_map("degenerate axis", |(v, m)| {
        let n = v.norm();
        (n > 1e-3).then(|| v * (m / n))
    })
}

#[test]
fn pi_rotation_log_has_magnitude_pi() {
    let r = Rotation::from_matrix(Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0))).unwrap();
    let phi = log_so3(&r);
    assert!((phi.norm() - PI).abs() < 1e-9);
    assert!((exp_so3(&phi).matrix() - r.matrix()).norm() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exp_log_round_trip(phi in rotation_vector(1e-6, PI - 0.01)) {
        prop_assert!((log_so3(&exp_so3(&phi)) - phi).norm() < 1e-9);
    }

    #[test]
    fn exp_matches_rodrigues(phi in rotation_vector(0.0, 3.0)) {
        let r = exp_so3(&phi);
        prop_assert!((r.matrix() - common::rodrigues(&phi)).norm() < 1e-12);
        prop_assert!(r.orthonormality_residual() < 1e-12);
        prop_assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exp_inverse_is_negation(phi in vector(3.0)) {
        prop_assert!((exp_so3(&phi) * exp_so3(&-phi)).matrix().relative_eq(&Matrix3::identity(), 1e-12, 1e-12));
    }

    #[test]
    fn first_order_consistency(phi in rotation_vector(1e-8, 1e-4)) {
        let linear = Matrix3::identity() + skew(&phi);
        prop_assert!((exp_so3(&phi).matrix() - linear).norm() < phi.norm_squared());
    }

    #[test]
    fn skew_is_cross_product(a in vector(10.0), b in vector(10.0)) {
        let s = skew(&a);
        prop_assert_eq!(s, -s.transpose());
        prop_assert!((s * b - a.cross(&b)).norm() < 1e-12);
        prop_assert!((s * a).norm() < 1e-12);
    }

    #[test]
    fn euler_round_trip(roll in -3.1f64..3.1, pitch in -1.5f64..1.5, heading in -3.1f64..3.1) {
        let e = to_euler(&from_euler(roll, pitch, heading));
        prop_assert!((e.roll - roll).abs() < 1e-9);
        prop_assert!((e.pitch - pitch).abs() < 1e-9);
        prop_assert!((e.heading - heading).abs() < 1e-9);
        prop_assert!(!e.gimbal_lock);
    }

    #[test]
    fn heading_of_pure_yaw(psi in -3.14f64..3.14) {
        let e = to_euler(&exp_so3(&Vector3::new(0.0, 0.0, psi)));
        prop_assert!((e.heading - psi).abs() < 1e-12);
        prop_assert!(e.heading > -PI && e.heading <= PI);
    }
}
