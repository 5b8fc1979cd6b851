//! Shape-conformity theory as executable checks: the closed-form boundary
//! gradient energy, the curvature alignment rule, the dihedral pair scan,
//! and a conformity report for optimized fields.

mod checks;
mod report;

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::odeco::{euler_from_matrix, rotation_operator, tables, OdecoVec};

pub use checks::{run_all_checks, CheckOutcome, PatchOracle};
pub use report::{boundary_conformity_report, ConformityReport, VertexDeviation};

const G_SCALE: f64 = 64.0 * PI / 315.0;
const TIE_TOL: f64 = 1e-9;

/// `g_k(lambda)` with index pairs `{y,z}`, `{x,z}`, `{x,y}` for `k = 1, 2, 3`.
pub fn g_k(lambda: [f64; 3], k: usize) -> f64 {
    let (m, n) = match k {
        1 => (1, 2),
        2 => (0, 2),
        3 => (0, 1),
        _ => panic!("g_k is defined for k = 1, 2, 3 (got {k})"),
    };
    let (a, b) = (lambda[m], lambda[n]);
    G_SCALE * (4.0 * (a - b).powi(2) + (a + b).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEnergyPrediction {
    pub curvature_term: f64,
    pub twist_term: f64,
    pub g: [f64; 3],
    pub lambda: [f64; 3],
    pub phi: f64,
    pub k_max: f64,
    pub k_min: f64,
    pub omega: f64,
}

impl BoundaryEnergyPrediction {
    pub fn total(&self) -> f64 {
        self.curvature_term + self.twist_term
    }
}

/// Predicted `||grad f||^2` of a normal-aligned field whose x lobe makes angle
/// `phi` with the minimum-curvature direction and twists about the normal
/// with squared rate `omega`.
pub fn predicted_gradient_norm(lambda: [f64; 3], phi: f64, k_max: f64, k_min: f64, omega: f64) -> BoundaryEnergyPrediction {
    let g = [g_k(lambda, 1), g_k(lambda, 2), g_k(lambda, 3)];
    let (c2, s2) = (phi.cos().powi(2), phi.sin().powi(2));
    let curvature_term = (c2 * g[0] + s2 * g[1]) * k_max * k_max + (s2 * g[0] + c2 * g[1]) * k_min * k_min;
    BoundaryEnergyPrediction {
        curvature_term,
        twist_term: g[2] * omega,
        g,
        lambda,
        phi,
        k_max,
        k_min,
        omega,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    AlignLargeLobeToMinCurv,
    AlignLargeLobeToMaxCurv,
    NoPreference,
}

/// Preferred tangential alignment for tangential ratios `lambda[0..2]` and
/// normal ratio `lambda[2]`.
pub fn curvature_alignment_predicate(lambda: [f64; 3]) -> Alignment {
    let [x, y, z] = lambda;
    let scale = x.abs().max(y.abs()).max(z.abs()).max(1.0);
    let threshold = 5.0 / 6.0 * (x + y);
    if (x - y).abs() <= TIE_TOL * scale || (z - threshold).abs() <= TIE_TOL * scale {
        Alignment::NoPreference
    } else if z < threshold {
        Alignment::AlignLargeLobeToMinCurv
    } else {
        Alignment::AlignLargeLobeToMaxCurv
    }
}

/// Tensor with lobes along the columns of `frame`.
pub(crate) fn frame_tensor(frame: &Matrix3<f64>, lambda: [f64; 3]) -> OdecoVec {
    let theta = euler_from_matrix(frame);
    OdecoVec(rotation_operator(theta).apply(&tables().canonical(&lambda)))
}

/// Right-handed frame with z along `n` and x at angle `phi` from `e` (a unit
/// vector orthogonal to `n`) towards `n x e`.
pub(crate) fn tangent_frame(n: &Vector3<f64>, e: &Vector3<f64>, phi: f64) -> Matrix3<f64> {
    let t = n.cross(e);
    let x = e * phi.cos() + t * phi.sin();
    let y = n.cross(&x);
    Matrix3::from_columns(&[x, y, *n])
}

/// `||f_1 - f_2||^2` over a grid of in-plane angles for two normal-aligned
/// tensors on planes meeting along the x axis at dihedral angle `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScan {
    pub n: usize,
    /// `phi_i = i * pi / n`.
    pub phis: Vec<f64>,
    /// Row-major: `values[i * n + j]` is the energy at `(phi_i, phi_j)`.
    pub values: Vec<f64>,
}

impl PairScan {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn argmin(&self) -> (usize, usize) {
        let k = (0..self.values.len())
            .min_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap();
        (k / self.n, k % self.n)
    }

    /// Whether index `i` is within one cell of 0 modulo the period.
    pub fn near_zero(&self, i: usize) -> bool {
        i <= 1 || i + 1 >= self.n
    }
}

pub fn pair_energy_scan(lambda: [f64; 3], dihedral_delta: f64, grid_n: usize) -> PairScan {
    assert!(grid_n >= 8, "grid_n must be at least 8");
    assert!(dihedral_delta > 0.0 && dihedral_delta <= PI, "dihedral angle must be in (0, pi]");
    let e = Vector3::x();
    let n1 = Vector3::z();
    let n2 = Vector3::new(0.0, dihedral_delta.sin(), -dihedral_delta.cos());
    let phis: Vec<f64> = (0..grid_n).map(|i| i as f64 * PI / grid_n as f64).collect();
    let side = |n: &Vector3<f64>| -> Vec<OdecoVec> {
        phis.iter().map(|&p| frame_tensor(&tangent_frame(n, &e, p), lambda)).collect()
    };
    let (f1, f2) = (side(&n1), side(&n2));
    let values = f1
        .iter()
        .flat_map(|a| f2.iter().map(move |b| (*a - *b).norm_squared()))
        .collect();
    PairScan { n: grid_n, phis, values }
}

#[cfg(test)]
mod tests;
