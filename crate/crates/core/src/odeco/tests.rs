use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_relative_eq;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn max_abs(m: &Dense15) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

#[test]
fn lz_matches_finite_difference_of_rotation() {
    let h = 1e-5;
    let plus = BandRotation::from_matrix3(&rot_z(h)).to_dense();
    let minus = BandRotation::from_matrix3(&rot_z(-h)).to_dense();
    let fd = (plus - minus) / (2.0 * h);
    let (_, _, lz) = angular_ops();
    assert!(max_abs(&(fd - lz)) < 1e-8, "{}", max_abs(&(fd - lz)));
}

#[test]
fn lx_ly_match_finite_difference_of_rotation() {
    let h = 1e-5;
    let (lx, ly, _) = angular_ops();
    let fdx = (BandRotation::from_matrix3(&rot_x(h)).to_dense() - BandRotation::from_matrix3(&rot_x(-h)).to_dense())
        / (2.0 * h);
    let fdy = (BandRotation::from_matrix3(&rot_y(h)).to_dense() - BandRotation::from_matrix3(&rot_y(-h)).to_dense())
        / (2.0 * h);
    assert!(max_abs(&(fdx - lx)) < 1e-8);
    assert!(max_abs(&(fdy - ly)) < 1e-8);
}

#[test]
fn generators_are_antisymmetric_and_band_blocked() {
    let (lx, ly, lz) = angular_ops();
    for l in [&lx, &ly, &lz] {
        assert!(max_abs(&(l + l.transpose())) < 1e-12);
        for i in 0..NUM_COEFFS {
            for j in 0..NUM_COEFFS {
                let band = |k: usize| if k == 0 { 0 } else if k < 6 { 2 } else { 4 };
                if band(i) != band(j) {
                    assert_eq!(l[(i, j)], 0.0);
                }
            }
        }
        // Band 0 is rotation invariant.
        assert!(l.row(0).iter().all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn commutators_close_with_documented_sign() {
    let (lx, ly, lz) = angular_ops();
    let c = COMMUTATOR_SIGN;
    assert!(max_abs(&(lx * ly - ly * lx - lz * c)) < 1e-10);
    assert!(max_abs(&(ly * lz - lz * ly - lx * c)) < 1e-10);
    assert!(max_abs(&(lz * lx - lx * lz - ly * c)) < 1e-10);
}

#[test]
fn closed_form_exponentials_match_pade() {
    let (lx, ly, lz) = angular_ops();
    for (angle, l, closed) in [
        (0.7, lx, tables().exp_x(0.7)),
        (-1.3, ly, tables().exp_y(-1.3)),
        (2.9, lz, tables().exp_z(2.9)),
    ] {
        let expm = (l * angle).exp();
        assert!(max_abs(&(expm - closed.to_dense())) < 1e-10, "angle {angle}");
    }
}

#[test]
fn rotation_operator_is_orthogonal_for_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let theta = [0; 3].map(|_| rng.random_range(-PI..PI));
        let r = rotation_operator(theta).to_dense();
        assert!(max_abs(&(r.transpose() * r - Dense15::identity())) < 1e-10);
    }
}

#[test]
fn rotation_operator_agrees_with_three_space_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let theta = [0; 3].map(|_| rng.random_range(-PI..PI));
        let r3 = euler_matrix(theta);
        let direct = BandRotation::from_matrix3(&r3).to_dense();
        let composed = rotation_operator(theta).to_dense();
        assert!(max_abs(&(direct - composed)) < 1e-10);
        let back = euler_from_matrix(&r3);
        assert!((euler_matrix(back) - r3).abs().max() < 1e-12);
    }
}

#[test]
fn euler_extraction_handles_gimbal_lock() {
    for b in [FRAC_PI_2, -FRAC_PI_2] {
        let r3 = euler_matrix([0.4, b, -0.3]);
        let back = euler_from_matrix(&r3);
        assert!((euler_matrix(back) - r3).abs().max() < 1e-12);
    }
}

#[test]
fn canonical_tensor_reconstructs_quartic_pointwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let lambda = [0; 3].map(|_| rng.random_range(0.1..5.0));
        let f = canonical_tensor(lambda);
        for _ in 0..20 {
            let d = random_unit(&mut rng);
            let exact = lambda[0] * d.x.powi(4) + lambda[1] * d.y.powi(4) + lambda[2] * d.z.powi(4);
            assert!((f.evaluate(&d) - exact).abs() < 1e-10);
        }
    }
}

#[test]
fn rotation_is_equivariant_with_polynomial_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let theta = [0; 3].map(|_| rng.random_range(-PI..PI));
        let lambda = [0; 3].map(|_| rng.random_range(0.1..5.0));
        let r3 = euler_matrix(theta);
        let f = canonical_tensor(lambda).rotated(&rotation_operator(theta));
        let d = random_unit(&mut rng);
        let local = r3.transpose() * d;
        let exact = lambda[0] * local.x.powi(4) + lambda[1] * local.y.powi(4) + lambda[2] * local.z.powi(4);
        assert!((f.evaluate(&d) - exact).abs() < 1e-10);
    }
}

#[test]
fn isotropic_tensor_is_octahedrally_invariant() {
    let f = canonical_tensor([1.0, 1.0, 1.0]);
    let quarter = [0.0, FRAC_PI_2, PI, -FRAC_PI_2];
    let mut seen = Vec::<Matrix3<f64>>::new();
    for &a in &quarter {
        for &b in &quarter {
            for &c in &quarter {
                let r3 = euler_matrix([a, b, c]);
                if seen.iter().any(|s| (s - r3).abs().max() < 1e-9) {
                    continue;
                }
                seen.push(r3);
                let g = f.rotated(&rotation_operator([a, b, c]));
                assert!((g - f).norm() < 1e-10);
            }
        }
    }
    assert_eq!(seen.len(), 24);
}

#[test]
fn quarter_turn_about_z_swaps_x_and_y_stretch() {
    let a = canonical_tensor([1.0, 3.0, 2.0]).rotated(&tables().exp_z(FRAC_PI_2));
    let b = canonical_tensor([3.0, 1.0, 2.0]);
    assert!((a - b).norm() < 1e-12);
}

#[test]
fn normal_rotation_maps_z_lobe_to_normal() {
    for n in [Vector3::z(), -Vector3::z(), Vector3::x(), Vector3::new(1.0, 2.0, -2.0) / 3.0] {
        let f = boundary_tensor(&n, 0.3, [1.0, 1.0, 4.0]).unwrap();
        // The largest stretch lies along the normal.
        assert_relative_eq!(f.evaluate(&n), 4.0, epsilon = 1e-10);
    }
    assert!(normal_rotation(&Vector3::new(1.0, 1.0, 0.0)).is_err());
}

#[test]
fn boundary_tensor_with_isotropic_tangent_ignores_theta_z() {
    let n = Vector3::new(0.0, 0.6, 0.8);
    let a = boundary_tensor(&n, 0.0, [2.0, 2.0, 1.0]).unwrap();
    let b = boundary_tensor(&n, 1.1, [2.0, 2.0, 1.0]).unwrap();
    // Not exactly invariant (quartics are only 4-fold symmetric), but equal
    // under quarter turns.
    let c = boundary_tensor(&n, FRAC_PI_2, [2.0, 2.0, 1.0]).unwrap();
    assert!((a - c).norm() < 1e-10);
    assert!((a - b).norm() > 1e-3);
}

#[test]
fn symmetric_matrix_roundtrip_breaks_ties_canonically() {
    let (theta, lambda) = from_symmetric_matrix(&Matrix3::identity());
    assert_eq!(lambda, [1.0, 1.0, 1.0]);
    assert!((euler_matrix(theta) - Matrix3::identity()).abs().max() < 1e-12);

    let s = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 1.0));
    let (theta, lambda) = from_symmetric_matrix(&s);
    assert_eq!(lambda, [2.0, 1.0, 1.0]);
    let back = symmetric_matrix(&euler_matrix(theta), lambda);
    assert!((back - s).abs().max() < 1e-12);
}

#[test]
fn cache_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tables.bin");
    let built = load_or_build_tables(&path).unwrap();
    let loaded = load_tables(&path).unwrap();
    assert_eq!(built, loaded);
    std::fs::write(&path, b"garbage").unwrap();
    assert!(load_tables(&path).is_err());
}

proptest! {
    #[test]
    fn rotation_preserves_norm(a in -PI..PI, b in -PI..PI, c in -PI..PI,
                               l0 in 0.01f64..10.0, l1 in 0.01f64..10.0, l2 in 0.01f64..10.0) {
        let f = canonical_tensor([l0, l1, l2]);
        let g = f.rotated(&rotation_operator([a, b, c]));
        prop_assert!((f.norm() - g.norm()).abs() < 1e-10 * f.norm().max(1.0));
    }

    #[test]
    fn signed_permutations_of_axes_reproduce_tensor(a in -PI..PI, b in -PI..PI, c in -PI..PI,
                                                    l0 in 0.01f64..10.0, l1 in 0.01f64..10.0, l2 in 0.01f64..10.0) {
        // Flipping two axes is a rotation; quartics are even, so the tensor is unchanged.
        let r3 = euler_matrix([a, b, c]);
        let flip = r3 * Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0));
        let f = canonical_tensor([l0, l1, l2]).rotated(&rotation_operator([a, b, c]));
        let g = canonical_tensor([l0, l1, l2]).rotated(&rotation_operator(euler_from_matrix(&flip)));
        prop_assert!((f - g).norm() < 1e-9);
    }

    #[test]
    fn symmetric_matrix_roundtrip(a in -PI..PI, b in -1.5f64..1.5, c in -PI..PI,
                                  l0 in 0.1f64..10.0, l1 in 0.1f64..10.0, l2 in 0.1f64..10.0) {
        let s = symmetric_matrix(&euler_matrix([a, b, c]), [l0, l1, l2]);
        let (theta, lambda) = from_symmetric_matrix(&s);
        prop_assert!(lambda[0] >= lambda[1] && lambda[1] >= lambda[2]);
        let back = symmetric_matrix(&euler_matrix(theta), lambda);
        prop_assert!((back - s).abs().max() < 1e-9 * s.abs().max());
    }
}
