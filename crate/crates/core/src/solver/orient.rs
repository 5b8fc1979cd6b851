use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix3;

use super::diffusion::Solver;
use crate::energy::VertexFrame;
use crate::error::Result;
use crate::mesh::TetMesh;
use crate::odeco::{euler_from_matrix, euler_matrix, from_symmetric_matrix_near, symmetric_matrix};

/// Relative change of the proxy field below which the rounds stop.
const SETTLE_TOL: f64 = 1e-6;

/// Seeds free orientations by alternating a heat step on the matrix proxy
/// `R diag(lambda) R^T` with a projection back onto each vertex's admissible
/// frames (stretch unchanged).
///
/// Every round moves each vertex toward the orientation that best matches its
/// diffused neighbourhood, so coherent regions can flip as a whole, which the
/// per-vertex perturbations of the later trials cannot do. Vertices without
/// free orientation act as fixed boundary values. Returns the number of
/// rounds run.
pub fn initialize_orientations(
    mesh: &TetMesh,
    frames: &mut [VertexFrame],
    diffusion_time: f64,
    max_rounds: usize,
) -> Result<usize> {
    let n = mesh.num_vertices();
    if max_rounds == 0 || frames.iter().all(|f| f.class.theta_slots().is_empty()) {
        return Ok(0);
    }
    let pinned: Vec<bool> = frames.iter().map(|f| f.class.theta_slots().is_empty()).collect();
    let h = mesh.mean_edge_length();
    let t = diffusion_time * h * h;
    let solver = Solver::new(mesh, &pinned, t)?;
    const ENTRIES: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

    // Free orientations start undetermined: each proxy is averaged over the
    // rotations the vertex may still make, so only normals, feature tangents
    // and fixed frames carry direction into the first round.
    let mut proxies: Vec<Matrix3<f64>> = frames
        .iter()
        .zip(&pinned)
        .map(|(f, &fixed)| if fixed { symmetric_matrix(&f.rotation3(), f.lambda) } else { rotation_average(f) })
        .collect();
    let scale = proxies.iter().map(|s| s.amax()).fold(f64::MIN_POSITIVE, f64::max);
    for round in 1..=max_rounds {
        let mut smoothed = vec![Matrix3::zeros(); n];
        for &(r, c) in &ENTRIES {
            let u0: Vec<f64> = proxies.iter().map(|s| s[(r, c)]).collect();
            for (s, x) in smoothed.iter_mut().zip(solver.solve(mesh, &u0, t)) {
                s[(r, c)] = x;
                s[(c, r)] = x;
            }
        }
        let mut change: f64 = 0.0;
        for (v, frame) in frames.iter_mut().enumerate() {
            if pinned[v] || !project(frame, &smoothed[v], scale) {
                continue;
            }
            let updated = symmetric_matrix(&frame.rotation3(), frame.lambda);
            change = change.max((updated - proxies[v]).amax());
            proxies[v] = updated;
        }
        log::debug!("orientation round {round}: max proxy change {change:.3e}");
        if change <= SETTLE_TOL * scale {
            return Ok(round);
        }
    }
    Ok(max_rounds)
}

fn rotation_average(frame: &VertexFrame) -> Matrix3<f64> {
    let l = frame.lambda;
    match &frame.axis {
        Some(axis) => {
            let a = axis.matrix3.column(2);
            let aa = a * a.transpose();
            aa * l[2] + (Matrix3::identity() - aa) * (0.5 * (l[0] + l[1]))
        }
        None => Matrix3::identity() * ((l[0] + l[1] + l[2]) / 3.0),
    }
}

/// Rotates `frame` to maximise `<R diag(lambda) R^T, target>`; returns false
/// when the target leaves the orientation undetermined.
fn project(frame: &mut VertexFrame, target: &Matrix3<f64>, scale: f64) -> bool {
    let l = frame.lambda;
    let lscale = l.iter().fold(f64::MIN_POSITIVE, |m, x| m.max(x.abs()));
    match &frame.axis {
        Some(axis) => {
            let (u, w) = (axis.matrix3.column(0), axis.matrix3.column(1));
            let (p00, p01, p11) = ((target * u).dot(&u), (target * w).dot(&u), (target * w).dot(&w));
            let amplitude = (p00 - p11).hypot(2.0 * p01);
            if (l[0] - l[1]).abs() <= 1e-9 * lscale || amplitude <= 1e-9 * scale {
                return false;
            }
            let mut phi = 0.5 * (2.0 * p01).atan2(p00 - p11);
            if l[0] < l[1] {
                phi += FRAC_PI_2;
            }
            // The in-plane tensor is invariant under a half turn: stay on the
            // branch nearest the current angle.
            let current = frame.theta[2];
            frame.theta[2] = current + (phi - current + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
            true
        }
        None => {
            if l.iter().all(|x| (x - l[0]).abs() <= 1e-9 * lscale) {
                return false;
            }
            // Slots in order of decreasing stretch receive eigenvectors in
            // order of decreasing eigenvalue.
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| l[b].total_cmp(&l[a]));
            let current = frame.rotation3();
            let reference = Matrix3::from_columns(&order.map(|k| current.column(k).into_owned()));
            let (theta, _) = from_symmetric_matrix_near(target, &reference);
            let sorted = euler_matrix(theta);
            let mut columns = [current.column(0).into_owned(); 3];
            for (j, &k) in order.iter().enumerate() {
                let c = sorted.column(j).into_owned();
                columns[k] = if c.dot(&current.column(k)) < 0.0 { -c } else { c };
            }
            let mut r = Matrix3::from_columns(&columns);
            if r.determinant() < 0.0 {
                let k = order[2];
                r.set_column(k, &(-columns[k]));
            }
            frame.theta = euler_from_matrix(&r);
            true
        }
    }
}
