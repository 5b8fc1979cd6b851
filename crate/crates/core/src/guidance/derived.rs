use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::energy::{LambdaTarget, VertexFrame};
use crate::error::{Error, Result};
use crate::mesh::io::{ArrayKind, VtkData};
use crate::mesh::CurvatureField;
use crate::odeco::{from_symmetric_matrix, OdecoVec};

/// Relative amount a pinned normal ratio is moved off the degenerate value
/// `5/6 (lambda_x + lambda_y)`.
pub const DEGENERATE_NUDGE: f64 = 1e-3;

/// Anisotropy ratio `|K_max / K_min|` with curvatures ordered by magnitude.
///
/// A vanishing minor curvature (`|K_min| < 1e-8 |K_max|`) yields infinity;
/// a flat point (both below `1e-12`) yields 1.
pub fn curvature_ratio(k1: f64, k2: f64) -> f64 {
    let (big, small) = if k1.abs() >= k2.abs() { (k1.abs(), k2.abs()) } else { (k2.abs(), k1.abs()) };
    if big < 1e-12 {
        1.0
    } else if small < 1e-8 * big {
        f64::INFINITY
    } else {
        big / small
    }
}

/// Stretch targets from principal curvatures: `lambda_x` is the clamped
/// curvature ratio, `lambda_y = 1`, and `lambda_z` is free unless pinned.
pub fn curvature_guidance(
    curvature: &CurvatureField,
    vertices: impl IntoIterator<Item = usize>,
    clamp: (f64, f64),
    lambda_z: Option<f64>,
) -> Vec<(usize, LambdaTarget)> {
    let (lo, hi) = clamp;
    vertices
        .into_iter()
        .filter_map(|v| curvature.get(v).map(|c| (v, c)))
        .map(|(v, c)| {
            let lx = curvature_ratio(c.k_max, c.k_min).clamp(lo, hi);
            let ly = 1.0;
            let lz = lambda_z.map(|z| {
                let degenerate = 5.0 / 6.0 * (lx + ly);
                if (z - degenerate).abs() < 1e-6 {
                    degenerate * (1.0 - DEGENERATE_NUDGE)
                } else {
                    z
                }
            });
            (
                v,
                LambdaTarget {
                    value: [lx, ly, lz.unwrap_or(0.0)],
                    mask: [true, true, lz.is_some()],
                    weight: 1.0,
                },
            )
        })
        .collect()
}

/// How raw eigenvalues become stretch ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMap {
    #[default]
    Identity,
    /// Logarithmic map of eigenvalue magnitudes onto the clamp range.
    LogClamp,
}

/// Per-vertex initialization and fidelity reference derived from a raw field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldInit {
    pub theta: Vec<[f64; 3]>,
    pub lambda: Vec<[f64; 3]>,
    pub reference: Vec<OdecoVec>,
}

/// Converts a per-vertex symmetric 3x3 field into Euler angles, stretch
/// ratios and the realized reference tensors.
pub fn field_guidance(raw: &[Matrix3<f64>], map: ValueMap, clamp: (f64, f64)) -> Result<FieldInit> {
    for (v, s) in raw.iter().enumerate() {
        let scale = s.abs().max().max(1.0);
        if (s - s.transpose()).abs().max() > 1e-9 * scale {
            return Err(Error::Guidance(format!("field matrix at vertex {v} is not symmetric")));
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::Guidance(format!("field matrix at vertex {v} is not finite")));
        }
    }
    let mapped: Vec<Matrix3<f64>> = match map {
        ValueMap::Identity => raw.to_vec(),
        ValueMap::LogClamp => log_clamp(raw, clamp),
    };
    let mut init = FieldInit {
        theta: Vec::with_capacity(raw.len()),
        lambda: Vec::with_capacity(raw.len()),
        reference: Vec::with_capacity(raw.len()),
    };
    for s in &mapped {
        let (theta, lambda) = from_symmetric_matrix(s);
        init.reference.push(VertexFrame::interior(theta, lambda).realize());
        init.theta.push(theta);
        init.lambda.push(lambda);
    }
    Ok(init)
}

fn log_clamp(raw: &[Matrix3<f64>], (lo, hi): (f64, f64)) -> Vec<Matrix3<f64>> {
    let eigs: Vec<_> = raw.iter().map(|s| SymmetricEigen::new((s + s.transpose()) * 0.5)).collect();
    let magnitudes = eigs.iter().flat_map(|e| e.eigenvalues.iter().map(|x| x.abs()));
    let (mut e_min, mut e_max) = (f64::INFINITY, 0.0f64);
    for m in magnitudes.filter(|m| *m > 0.0) {
        e_min = e_min.min(m);
        e_max = e_max.max(m);
    }
    let span = if e_max > e_min { (e_max / e_min).ln() } else { 0.0 };
    let map = |e: f64| {
        let m = e.abs();
        if span == 0.0 || m <= 0.0 {
            lo
        } else {
            (lo + (hi - lo) * (m / e_min).ln() / span).clamp(lo, hi)
        }
    };
    eigs.iter()
        .map(|e| {
            let d = Matrix3::from_diagonal(&e.eigenvalues.map(map));
            e.eigenvectors * d * e.eigenvectors.transpose()
        })
        .collect()
}

/// Extracts a per-vertex 3x3 field from VTK point data: the named array, or
/// the first 9-component tensor array.
pub fn field_from_vtk(data: &VtkData, name: Option<&str>) -> Result<Vec<Matrix3<f64>>> {
    let array = match name {
        Some(n) => data
            .point_data
            .get(n)
            .ok_or_else(|| Error::Guidance(format!("no point array named {n}")))?,
        None => data
            .point_data
            .values()
            .find(|a| a.kind == ArrayKind::Tensors || a.components == 9)
            .ok_or_else(|| Error::Guidance("no 3x3 tensor point array in field file".into()))?,
    };
    if array.components != 9 {
        return Err(Error::Guidance(format!(
            "array {} has {} components, expected 9",
            array.name, array.components
        )));
    }
    let n = data.points.len();
    if array.values.len() != 9 * n {
        return Err(Error::Guidance(format!("array {} does not cover all {n} points", array.name)));
    }
    Ok((0..n).map(|i| Matrix3::from_row_slice(array.tuple(i))).collect())
}
