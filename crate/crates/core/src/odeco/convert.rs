use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::rotation::{euler_from_matrix, euler_matrix};

/// Relative gap below which eigenvalues are treated as repeated.
const TIE_TOL: f64 = 1e-9;

/// Splits a symmetric matrix into an Euler triple and descending eigenvalues,
/// breaking ties toward the canonical axes.
pub fn from_symmetric_matrix(s: &Matrix3<f64>) -> ([f64; 3], [f64; 3]) {
    from_symmetric_matrix_near(s, &Matrix3::identity())
}

/// Like [`from_symmetric_matrix`], but repeated eigenvalues pick the
/// eigenvectors closest to the columns of `reference` (a rotation).
pub fn from_symmetric_matrix_near(s: &Matrix3<f64>, reference: &Matrix3<f64>) -> ([f64; 3], [f64; 3]) {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.map(|i| eig.eigenvalues[i]);
    let vectors = order.map(|i| eig.eigenvectors.column(i).into_owned());

    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
    for k in 1..3 {
        if (values[k - 1] - values[k]).abs() <= TIE_TOL * scale {
            clusters.last_mut().unwrap().push(k);
        } else {
            clusters.push(vec![k]);
        }
    }

    let refs: [Vector3<f64>; 3] = [0, 1, 2].map(|i| reference.column(i).into_owned());
    let mut used = [false; 3];
    let mut frame = [Vector3::zeros(); 3];
    for cluster in &clusters {
        let basis: Vec<Vector3<f64>> = cluster.iter().map(|&k| vectors[k]).collect();
        let project = |r: &Vector3<f64>| basis.iter().fold(Vector3::zeros(), |acc, b| acc + b * b.dot(r));
        let mut chosen: Vec<Vector3<f64>> = Vec::new();
        for (slot_in_cluster, &slot) in cluster.iter().enumerate() {
            // Reference column with the largest projection onto the eigenspace;
            // ties resolve to the lowest index.
            let mut best: Option<(usize, f64)> = None;
            for (i, r) in refs.iter().enumerate() {
                if used[i] {
                    continue;
                }
                let mut p = project(r);
                for c in &chosen {
                    p -= c * c.dot(&p);
                }
                let len = p.norm();
                if best.is_none_or(|(_, l)| len > l + 1e-12) {
                    best = Some((i, len));
                }
            }
            let (ri, len) = best.expect("three reference axes for three slots");
            used[ri] = true;
            let v = if len > 1e-6 {
                let mut p = project(&refs[ri]);
                for c in &chosen {
                    p -= c * c.dot(&p);
                }
                p.normalize()
            } else {
                let mut p = basis[slot_in_cluster];
                for c in &chosen {
                    p -= c * c.dot(&p);
                }
                let p = p.normalize();
                if p.dot(&refs[ri]) < 0.0 { -p } else { p }
            };
            chosen.push(v);
            frame[slot] = v;
        }
    }
    let mut r = Matrix3::from_columns(&frame);
    if r.determinant() < 0.0 {
        r.set_column(2, &(-frame[2]));
    }
    (euler_from_matrix(&r), values)
}

/// `R diag(lambda) R^T`.
pub fn symmetric_matrix(rotation: &Matrix3<f64>, lambda: [f64; 3]) -> Matrix3<f64> {
    rotation * Matrix3::from_diagonal(&Vector3::from(lambda)) * rotation.transpose()
}

/// Glyph axes: the columns of the Euler rotation scaled by `lambda`.
pub fn glyph_frame(theta: [f64; 3], lambda: [f64; 3]) -> [Vector3<f64>; 3] {
    let r = euler_matrix(theta);
    [0, 1, 2].map(|i| r.column(i) * lambda[i])
}
