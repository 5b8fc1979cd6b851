use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::energy::VertexFrame;
use crate::mesh::{estimate_curvature, shapes, BoundaryData};

const C: f64 = 64.0 * PI / 315.0;

#[test]
fn g_examples() {
    for k in 1..=3 {
        assert_relative_eq!(g_k([1.0, 1.0, 1.0], k), 4.0 * C, max_relative = 1e-15);
    }
    assert_relative_eq!(g_k([2.0, 1.0, 1.0], 3), 13.0 * C, max_relative = 1e-15);
}

#[test]
fn flat_twist_free_is_zero() {
    assert_eq!(predicted_gradient_norm([3.0, 2.0, 1.0], 0.3, 0.0, 0.0, 0.0).total(), 0.0);
}

#[test]
fn phi_landscape_extremal_on_axes() {
    let f = |phi: f64| predicted_gradient_norm([2.0, 1.0, 1.0], phi, 1.0, 0.3, 0.0).curvature_term;
    let samples: Vec<f64> = (0..=180).map(|i| f(i as f64 * PI / 180.0)).collect();
    let (min, max) = samples
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    assert_relative_eq!(min, f(0.0), max_relative = 1e-14);
    assert_relative_eq!(max, f(FRAC_PI_2), max_relative = 1e-14);
}

#[test]
fn predicate_examples() {
    assert_eq!(curvature_alignment_predicate([2.0, 1.0, 1.0]), Alignment::AlignLargeLobeToMinCurv);
    assert_eq!(curvature_alignment_predicate([1.0, 1.0, 5.0]), Alignment::NoPreference);
    assert_eq!(curvature_alignment_predicate([2.0, 1.0, 2.5]), Alignment::NoPreference);
    assert_eq!(curvature_alignment_predicate([2.0, 1.0, 4.0]), Alignment::AlignLargeLobeToMaxCurv);
}

#[test]
fn cylinder_oracle_matches_prediction() {
    for (lambda, phi, twist) in [([2.0, 1.0, 1.0], 0.0, 0.0), ([3.0, 2.0, 1.0], 0.7, 0.5), ([1.0, 1.0, 1.0], 1.1, 2.0)] {
        let o = PatchOracle::cylinder(lambda, 0.8, phi, twist, 1e-4);
        assert!(o.relative_error() < 0.02, "{lambda:?} {phi}: {o:?}");
    }
}

#[test]
fn sphere_oracle_matches_prediction() {
    for phi in [0.0, 0.5, FRAC_PI_2] {
        let o = PatchOracle::sphere_equator([2.0, 1.0, 1.0], 1.3, phi, 1e-4);
        assert!(o.relative_error() < 0.02, "{phi}: {o:?}");
    }
}

#[test]
fn fig6_argmin() {
    let scan = pair_energy_scan([2.0, 1.0, 1.0], 0.6 * PI, 64);
    let (i, j) = scan.argmin();
    assert!(scan.near_zero(i) && scan.near_zero(j), "({i}, {j})");
}

#[test]
fn argmin_over_lambda_delta_grid() {
    let failures = checks::feature_pair_failures(64);
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn scan_mirror_symmetry() {
    let n = 24;
    let scan = pair_energy_scan([3.0, 2.0, 1.0], 0.7 * PI, n);
    for i in 0..n {
        for j in 0..n {
            let m = scan.at((n - i) % n, (n - j) % n);
            assert!((scan.at(i, j) - m).abs() < 1e-10, "({i},{j})");
        }
    }
}

#[test]
fn coplanar_co_rotation_invariant() {
    let n = 32;
    let scan = pair_energy_scan([2.0, 1.0, 1.0], PI, n);
    for shift in 0..n {
        let base = scan.at(0, shift);
        for i in 0..n {
            let v = scan.at(i, (i + shift) % n);
            assert!((v - base).abs() < 1e-10 * base.max(1.0), "shift {shift}, i {i}");
        }
    }
}

#[test]
fn isotropic_scan_quarter_periodic() {
    let n = 32;
    let q = n / 2;
    let scan = pair_energy_scan([1.0, 1.0, 1.0], 0.6 * PI, n);
    for i in 0..n {
        for j in 0..n {
            let base = scan.at(i, j);
            assert!((scan.at((i + q) % n, j) - base).abs() < 1e-10);
            assert!((scan.at(i, (j + q) % n) - base).abs() < 1e-10);
        }
    }
}

#[test]
fn all_checks_pass() {
    for outcome in run_all_checks() {
        assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
    }
}

#[test]
fn sphere_constant_octahedral_no_preference() {
    let mesh = shapes::icosphere_ball(3, 1.0);
    let b = BoundaryData::build(&mesh).unwrap();
    let curvature = estimate_curvature(&mesh, &b);
    let frames = vec![VertexFrame::interior([0.1, 0.2, 0.3], [1.0; 3]); mesh.num_vertices()];
    let report = boundary_conformity_report(&mesh, &frames, &curvature, None);
    assert!(report.boundary.is_empty());
    assert_eq!(report.no_preference, curvature.iter().count());
    assert_eq!(report.median_deg, None);
}

#[test]
fn cylinder_axis_field_conforms() {
    let mesh = shapes::cylinder(0.5, 3.0, 8, 24);
    let b = BoundaryData::build(&mesh).unwrap();
    let curvature = estimate_curvature(&mesh, &b);
    let frames: Vec<VertexFrame> = mesh
        .vertices()
        .iter()
        .map(|p| {
            let n = nalgebra::Vector3::new(p.x, p.y, 0.0);
            let n = if n.norm() > 1e-9 { n.normalize() } else { nalgebra::Vector3::x() };
            let r = tangent_frame(&n, &nalgebra::Vector3::z(), 0.0);
            VertexFrame::interior(crate::odeco::euler_from_matrix(&r), [2.0, 1.0, 0.5])
        })
        .collect();
    let report = boundary_conformity_report(&mesh, &frames, &curvature, None);
    assert!(report.boundary.len() > 50);
    assert!(report.median_deg.unwrap() < 5.0, "{:?}", report.median_deg);
    assert!(report.boundary.iter().all(|d| (0.0..=90.0).contains(&d.degrees)));
}

proptest! {
    #[test]
    fn g_pair_swap_symmetric(a in 0.01f64..50.0, b in 0.01f64..50.0, c in 0.01f64..50.0) {
        prop_assert_eq!(g_k([a, b, c], 1), g_k([a, c, b], 1));
        prop_assert_eq!(g_k([a, b, c], 2), g_k([c, b, a], 2));
        prop_assert_eq!(g_k([a, b, c], 3), g_k([b, a, c], 3));
        prop_assert!(g_k([a, b, c], 1) >= 0.0);
    }

    #[test]
    fn isotropic_curvature_term_phi_free(l in 0.1f64..20.0, phi in -PI..PI, k1 in -3.0f64..3.0, k2 in -3.0f64..3.0) {
        let a = predicted_gradient_norm([l; 3], phi, k1, k2, 0.0).curvature_term;
        let b = predicted_gradient_norm([l; 3], 0.0, k1, k2, 0.0).curvature_term;
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}
