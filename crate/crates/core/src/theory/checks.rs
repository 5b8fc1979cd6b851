//! Numerical self-checks of the shape-conformity results, shared by the
//! `check` command and the test suites.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{
    curvature_alignment_predicate, frame_tensor, g_k, pair_energy_scan, predicted_gradient_norm, tangent_frame,
    Alignment, BoundaryEnergyPrediction,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Finite-difference `||grad f||^2` on an analytic surface patch next to the
/// closed-form prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchOracle {
    pub finite_difference: f64,
    pub predicted: BoundaryEnergyPrediction,
}

impl PatchOracle {
    pub fn relative_error(&self) -> f64 {
        let p = self.predicted.total();
        (self.finite_difference - p).abs() / p.abs().max(1e-12)
    }

    /// Cylinder of `radius` about z. The x lobe sits at `phi0` from the axis
    /// (the minimum-curvature direction) and turns about the normal at
    /// `twist_rate` per unit length along the axis.
    pub fn cylinder(lambda: [f64; 3], radius: f64, phi0: f64, twist_rate: f64, h: f64) -> Self {
        let field = |s: f64, t: f64| {
            let a = s / radius;
            let n = Vector3::new(a.cos(), a.sin(), 0.0);
            frame_tensor(&tangent_frame(&n, &Vector3::z(), phi0 + twist_rate * t), lambda)
        };
        let ds = (field(h, 0.0) - field(-h, 0.0)) * (0.5 / h);
        let dt = (field(0.0, h) - field(0.0, -h)) * (0.5 / h);
        Self {
            finite_difference: ds.norm_squared() + dt.norm_squared(),
            predicted: predicted_gradient_norm(lambda, phi0, 1.0 / radius, 0.0, twist_rate * twist_rate),
        }
    }

    /// Sphere of `radius` at an equator point, x lobe at `phi0` from the
    /// meridian; the meridian frame has no twist on the equator.
    pub fn sphere_equator(lambda: [f64; 3], radius: f64, phi0: f64, h: f64) -> Self {
        let field = |s: f64, t: f64| {
            let (u, v) = (s / radius, t / radius);
            let n = Vector3::new(v.cos() * u.cos(), v.cos() * u.sin(), v.sin());
            let meridian = Vector3::new(-v.sin() * u.cos(), -v.sin() * u.sin(), v.cos());
            frame_tensor(&tangent_frame(&n, &meridian, phi0), lambda)
        };
        let ds = (field(h, 0.0) - field(-h, 0.0)) * (0.5 / h);
        let dt = (field(0.0, h) - field(0.0, -h)) * (0.5 / h);
        let k = 1.0 / radius;
        Self {
            finite_difference: ds.norm_squared() + dt.norm_squared(),
            predicted: predicted_gradient_norm(lambda, phi0, k, k, 0.0),
        }
    }
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn check_g_symmetry() -> CheckOutcome {
    let iso = [1.7; 3];
    let equal = g_k(iso, 1) == g_k(iso, 2) && g_k(iso, 2) == g_k(iso, 3);
    let swapped = [[2.0, 1.0, 0.5], [0.5, 3.0, 1.0]].iter().all(|&[a, b, c]| {
        g_k([a, b, c], 1) == g_k([a, c, b], 1) && g_k([a, b, c], 2) == g_k([c, b, a], 2) && g_k([a, b, c], 3) == g_k([b, a, c], 3)
    });
    outcome(
        "g_k isotropy and pair symmetry",
        equal && swapped,
        format!("g(1.7,1.7,1.7) = {:.6}", g_k(iso, 1)),
    )
}

fn check_boundary_energy_prediction() -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for lambda in [[2.0, 1.0, 1.0], [5.0, 1.0, 1.0], [3.0, 2.0, 1.0], [1.0, 1.0, 4.0]] {
        for phi in [0.0, 0.4, FRAC_PI_2, 2.3] {
            for twist in [0.0, 0.7] {
                worst = worst.max(PatchOracle::cylinder(lambda, 1.5, phi, twist, 1e-4).relative_error());
            }
            worst = worst.max(PatchOracle::sphere_equator(lambda, 2.0, phi, 1e-4).relative_error());
        }
    }
    outcome(
        "gradient-norm prediction vs finite differences (cylinder, sphere)",
        worst < 0.02,
        format!("max relative error {worst:.2e} (tolerance 2e-2)"),
    )
}

fn check_isotropic_phi_independence() -> CheckOutcome {
    let values: Vec<f64> = (0..32)
        .map(|i| predicted_gradient_norm([1.3; 3], i as f64 * PI / 32.0, 2.0, 0.5, 0.0).curvature_term)
        .collect();
    let spread = values.iter().copied().fold(f64::MIN, f64::max) - values.iter().copied().fold(f64::MAX, f64::min);
    outcome(
        "isotropic curvature term independent of phi",
        spread <= 1e-12 * values[0],
        format!("spread {spread:.2e}"),
    )
}

/// Angle in `[0, pi)` of the larger tangential lobe that minimizes the
/// finite-difference energy on a cylinder.
fn cylinder_optimal_large_lobe(lambda: [f64; 3], n: usize) -> f64 {
    let (best, _) = (0..n)
        .map(|i| {
            let phi = i as f64 * PI / n as f64;
            (phi, PatchOracle::cylinder(lambda, 1.0, phi, 0.0, 1e-4).finite_difference)
        })
        .fold((0.0, f64::INFINITY), |acc, (p, e)| if e < acc.1 { (p, e) } else { acc });
    let offset = if lambda[0] >= lambda[1] { 0.0 } else { FRAC_PI_2 };
    (best + offset).rem_euclid(PI)
}

fn check_alignment_predicate() -> CheckOutcome {
    let n = 72;
    let cell = PI / n as f64;
    let mut failures = Vec::new();
    let cases = [
        [2.0, 1.0, 1.0],
        [5.0, 1.0, 1.0],
        [1.0, 3.0, 0.5],
        [3.0, 2.0, 1.0],
        [2.0, 1.0, 3.0],
        [1.0, 2.0, 4.0],
    ];
    for lambda in cases {
        let expected = match curvature_alignment_predicate(lambda) {
            Alignment::AlignLargeLobeToMinCurv => 0.0,
            Alignment::AlignLargeLobeToMaxCurv => FRAC_PI_2,
            Alignment::NoPreference => continue,
        };
        let found = cylinder_optimal_large_lobe(lambda, n);
        let diff = (found - expected).rem_euclid(PI);
        if diff.min(PI - diff) > cell + 1e-12 {
            failures.push(format!("{lambda:?}: optimum at {:.1} deg", found.to_degrees()));
        }
    }
    let landscape_ok = {
        let lambda = [2.0, 1.0, 1.0];
        let f = |phi: f64| predicted_gradient_norm(lambda, phi, 1.0, 0.2, 0.0).curvature_term;
        let d = 1e-5;
        let flat = |phi: f64| ((f(phi + d) - f(phi - d)) / (2.0 * d)).abs() < 1e-6;
        flat(0.0) && flat(FRAC_PI_2) && f(0.0) < f(FRAC_PI_2)
    };
    outcome(
        "curvature alignment rule vs finite-difference scan",
        failures.is_empty() && landscape_ok,
        if failures.is_empty() {
            format!("{} cases agree; phi-landscape extremal at 0 and pi/2", cases.len())
        } else {
            failures.join("; ")
        },
    )
}

/// Dihedral pair scans over a lambda/delta grid; returns failures.
pub(crate) fn feature_pair_failures(grid_n: usize) -> Vec<String> {
    let mut failures = Vec::new();
    for lambda in [[2.0, 1.0, 1.0], [5.0, 1.0, 1.0], [3.0, 2.0, 1.0]] {
        for delta in [0.3, 0.5, 0.6, 0.8] {
            let scan = pair_energy_scan(lambda, delta * PI, grid_n);
            let (i, j) = scan.argmin();
            if !(scan.near_zero(i) && scan.near_zero(j)) {
                failures.push(format!("lambda {lambda:?}, delta {delta}pi: argmin ({i}, {j})"));
            }
        }
    }
    failures
}

fn check_feature_pair_scan() -> CheckOutcome {
    let failures = feature_pair_failures(64);
    outcome(
        "feature pair energy minimized with major lobes on the edge",
        failures.is_empty(),
        if failures.is_empty() {
            "12 lambda/delta cases, 64x64 grid: argmin at (0, 0) mod pi".into()
        } else {
            failures.join("; ")
        },
    )
}

/// Runs every theory check.
pub fn run_all_checks() -> Vec<CheckOutcome> {
    vec![
        check_g_symmetry(),
        check_boundary_energy_prediction(),
        check_isotropic_phi_independence(),
        check_alignment_predicate(),
        check_feature_pair_scan(),
    ]
}
