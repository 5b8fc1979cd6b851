use nalgebra::{DMatrix, DVector};

use super::{BoundaryData, TetMesh, Vec3};

/// Principal curvatures at a boundary vertex, positive where the surface
/// bends away from its outward normal (convex).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexCurvature {
    pub k_max: f64,
    pub k_min: f64,
    /// Unit tangent of maximal curvature (mu).
    pub dir_max: Vec3,
    /// Unit tangent of minimal curvature (nu).
    pub dir_min: Vec3,
    /// Set when the quadric fit was under-determined even on the 3-ring and
    /// zero curvature was substituted.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct CurvatureField {
    per_vertex: Vec<Option<VertexCurvature>>,
}

impl CurvatureField {
    /// Wraps precomputed per-vertex curvatures (`None` for interior vertices).
    pub fn from_vec(per_vertex: Vec<Option<VertexCurvature>>) -> Self {
        Self { per_vertex }
    }

    pub fn get(&self, v: usize) -> Option<&VertexCurvature> {
        self.per_vertex.get(v).and_then(|c| c.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &VertexCurvature)> {
        self.per_vertex
            .iter()
            .enumerate()
            .filter_map(|(v, c)| c.as_ref().map(|c| (v, c)))
    }

    pub fn degenerate_count(&self) -> usize {
        self.iter().filter(|(_, c)| c.degenerate).count()
    }
}

/// Estimates principal curvatures at every boundary vertex by fitting a
/// height-field quadric over its 2-ring in the tangent frame.
pub fn estimate_curvature(mesh: &TetMesh, boundary: &BoundaryData) -> CurvatureField {
    let per_vertex = (0..mesh.num_vertices())
        .map(|v| {
            if !mesh.is_boundary(v) {
                return None;
            }
            let normal = boundary.normal(v);
            let fitted = [2, 3].iter().find_map(|&rings| {
                let ring = boundary.ring(v, rings);
                fit_quadric(mesh.vertices(), v, &ring, &normal)
            });
            Some(fitted.unwrap_or_else(|| {
                log::warn!("curvature fit under-determined at vertex {v}; using zero curvature");
                let (e1, e2) = tangent_frame(&normal);
                VertexCurvature {
                    k_max: 0.0,
                    k_min: 0.0,
                    dir_max: e1,
                    dir_min: e2,
                    degenerate: true,
                }
            }))
        })
        .collect();
    CurvatureField { per_vertex }
}

/// Orthonormal tangent pair for a unit normal.
pub(crate) fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

fn fit_quadric(pos: &[Vec3], v: usize, ring: &[usize], normal: &Vec3) -> Option<VertexCurvature> {
    if ring.len() < 5 {
        return None;
    }
    let (e1, e2) = tangent_frame(normal);
    let origin = pos[v];
    let scale = ring.iter().map(|&u| (pos[u] - origin).norm()).fold(0.0, f64::max);
    let mut a = DMatrix::zeros(ring.len(), 5);
    let mut rhs = DVector::zeros(ring.len());
    for (row, &u) in ring.iter().enumerate() {
        let q = (pos[u] - origin) / scale;
        let (x, y) = (q.dot(&e1), q.dot(&e2));
        a.set_row(row, &nalgebra::RowSVector::<f64, 5>::from([x * x, x * y, y * y, x, y]));
        rhs[row] = q.dot(normal);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() < 1e-8 * smax {
        return None;
    }
    let c = svd.solve(&rhs, 0.0).ok()?;
    // Undo the normalisation: h(x) = scale * h'(x / scale).
    let (qa, qb, qc, qd, qe) = (c[0] / scale, c[1] / scale, c[2] / scale, c[3], c[4]);

    let (e, f, g) = (1.0 + qd * qd, qd * qe, 1.0 + qe * qe);
    let w = (1.0 + qd * qd + qe * qe).sqrt();
    // Second fundamental form w.r.t. the inward normal, so convex is positive.
    let (l, m, nn) = (-2.0 * qa / w, -qb / w, -2.0 * qc / w);
    // det(II - k I) = 0
    let qa2 = e * g - f * f;
    let qb2 = -(l * g + nn * e - 2.0 * m * f);
    let qc2 = l * nn - m * m;
    let disc = (qb2 * qb2 - 4.0 * qa2 * qc2).max(0.0).sqrt();
    let k_max = (-qb2 + disc) / (2.0 * qa2);
    let k_min = (-qb2 - disc) / (2.0 * qa2);

    let xu = e1 + normal * qd;
    let xv = e2 + normal * qe;
    let direction = |k: f64| {
        let r1 = (m - k * f, -(l - k * e));
        let r2 = (nn - k * g, -(m - k * f));
        // Both candidates solve (II - k I)(alpha, beta) = 0; keep the better conditioned.
        let (p, q) = if r1.0.hypot(r1.1) >= r2.0.hypot(r2.1) { r1 } else { r2 };
        let t = if p.hypot(q) < 1e-12 { xu } else { xu * p + xv * q };
        let t = t - normal * normal.dot(&t);
        t.normalize()
    };
    let dir_max = if (k_max - k_min).abs() < 1e-12 * (k_max.abs() + 1.0) {
        e1
    } else {
        direction(k_max)
    };
    let dir_min = normal.cross(&dir_max);
    Some(VertexCurvature {
        k_max,
        k_min,
        dir_max,
        dir_min,
        degenerate: false,
    })
}
