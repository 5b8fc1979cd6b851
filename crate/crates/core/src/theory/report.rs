use serde::{Deserialize, Serialize};

use super::{curvature_alignment_predicate, Alignment};
use crate::energy::VertexFrame;
use crate::mesh::{CurvatureField, FeatureData, TetMesh};

/// Relative principal-curvature gap below which a vertex is treated as
/// umbilic and left out of the statistics.
pub const CURVATURE_GAP_FLOOR: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexDeviation {
    pub vertex: usize,
    /// Unsigned acute angle in degrees, always within `[0, 90]`.
    pub degrees: f64,
    pub alignment: Alignment,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConformityReport {
    pub boundary: Vec<VertexDeviation>,
    pub features: Vec<VertexDeviation>,
    /// Boundary vertices whose stretching ratios express no curvature preference.
    pub no_preference: usize,
    /// Boundary vertices skipped because the surface is (nearly) umbilic or
    /// the curvature fit failed.
    pub umbilic: usize,
    pub median_deg: Option<f64>,
    pub p90_deg: Option<f64>,
    pub feature_median_deg: Option<f64>,
}

fn acute_degrees(a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>) -> f64 {
    let c = (a.dot(b) / (a.norm() * b.norm())).abs().min(1.0);
    c.acos().to_degrees()
}

fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (rank.floor() as usize, rank.ceil() as usize);
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64))
}

/// Measures how well an optimized field follows the boundary shape.
///
/// At each curved boundary vertex the larger tangential lobe is compared with
/// the principal direction preferred by the alignment rule; at feature
/// vertices the major lobe is compared with the edge tangent.
pub fn boundary_conformity_report(
    mesh: &TetMesh,
    frames: &[VertexFrame],
    curvature: &CurvatureField,
    features: Option<&FeatureData>,
) -> ConformityReport {
    let mut report = ConformityReport::default();
    let is_feature = |v: usize| features.is_some_and(|f| f.is_feature_vertex(v) || f.is_corner(v));
    for (v, k) in curvature.iter() {
        if v >= mesh.num_vertices() || is_feature(v) {
            continue;
        }
        let frame = &frames[v];
        let r = frame.rotation3();
        let normal = k.dir_max.cross(&k.dir_min);
        let normal_col = (0..3)
            .max_by(|&a, &b| r.column(a).dot(&normal).abs().total_cmp(&r.column(b).dot(&normal).abs()))
            .unwrap_or(2);
        let tangential: Vec<usize> = (0..3).filter(|&c| c != normal_col).collect();
        let (a, b) = (tangential[0], tangential[1]);
        let lambda = [frame.lambda[a], frame.lambda[b], frame.lambda[normal_col]];
        let alignment = curvature_alignment_predicate(lambda);
        if alignment == Alignment::NoPreference {
            report.no_preference += 1;
            continue;
        }
        let scale = k.k_max.abs().max(k.k_min.abs());
        if k.degenerate || scale < 1e-12 || (k.k_max - k.k_min).abs() <= CURVATURE_GAP_FLOOR * scale {
            report.umbilic += 1;
            continue;
        }
        let target = match alignment {
            Alignment::NoPreference => unreachable!(),
            // Order by magnitude so that concave patches are treated like
            // their convex mirror images.
            Alignment::AlignLargeLobeToMinCurv if k.k_min.abs() <= k.k_max.abs() => k.dir_min,
            Alignment::AlignLargeLobeToMinCurv => k.dir_max,
            Alignment::AlignLargeLobeToMaxCurv if k.k_min.abs() <= k.k_max.abs() => k.dir_max,
            Alignment::AlignLargeLobeToMaxCurv => k.dir_min,
        };
        let large = if lambda[0] >= lambda[1] { a } else { b };
        report.boundary.push(VertexDeviation {
            vertex: v,
            degrees: acute_degrees(&r.column(large).into_owned(), &target),
            alignment,
        });
    }
    if let Some(f) = features {
        for (v, t) in f.tangents.iter().enumerate() {
            let Some(t) = t else { continue };
            if v >= frames.len() || f.is_corner(v) {
                continue;
            }
            let frame = &frames[v];
            let major = (0..3).max_by(|&a, &b| frame.lambda[a].total_cmp(&frame.lambda[b])).unwrap_or(0);
            report.features.push(VertexDeviation {
                vertex: v,
                degrees: acute_degrees(&frame.rotation3().column(major).into_owned(), t),
                alignment: Alignment::NoPreference,
            });
        }
    }
    let mut angles: Vec<f64> = report.boundary.iter().map(|d| d.degrees).collect();
    angles.sort_by(f64::total_cmp);
    report.median_deg = percentile(&angles, 0.5);
    report.p90_deg = percentile(&angles, 0.9);
    let mut feat: Vec<f64> = report.features.iter().map(|d| d.degrees).collect();
    feat.sort_by(f64::total_cmp);
    report.feature_median_deg = percentile(&feat, 0.5);
    report
}
