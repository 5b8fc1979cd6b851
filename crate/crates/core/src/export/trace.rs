use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FieldArchive;
use crate::mesh::TetMesh;
use crate::{Error, Result};

type Vec3 = Vector3<f64>;

/// Eigenvalue gap below which the major direction is considered undefined.
pub const DEGENERACY_GAP: f64 = 1e-6;
const INSIDE_TOL: f64 = 1e-9;
const MAX_WALK: usize = 64;
const BISECTIONS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub n_seeds: usize,
    /// Step length in world units.
    pub step: f64,
    /// Step cap per direction.
    pub max_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BoundaryExit,
    StepCap,
    Degenerate,
}

/// A curve traced both ways from `seed`; `points` runs from the backward end
/// to the forward end.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub seed: Vec3,
    pub points: Vec<Vec3>,
    pub backward: Termination,
    pub forward: Termination,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurveSet {
    pub curves: Vec<Curve>,
}

impl CurveSet {
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        let mut next = 1;
        for c in &self.curves {
            for p in &c.points {
                let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
            }
            if c.points.len() >= 2 {
                let ids: Vec<String> = (next..next + c.points.len()).map(|i| i.to_string()).collect();
                let _ = writeln!(s, "l {}", ids.join(" "));
            }
            next += c.points.len();
        }
        s
    }

    pub fn write_obj(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_obj()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) enum Sample {
    Outside,
    Degenerate,
    Direction(Vec3),
}

/// A line field sampled at points; `hint` carries locality between queries.
pub(crate) trait DirectionField: Sync {
    fn sample(&self, p: &Vec3, hint: &mut Option<usize>) -> Sample;
}

/// Major eigenvector of a symmetric matrix, or `None` if the top two
/// eigenvalues are closer than [`DEGENERACY_GAP`].
pub(crate) fn major_direction(m: &Matrix3<f64>) -> Option<Vec3> {
    let eig = SymmetricEigen::new(*m);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    if eig.eigenvalues[order[0]] - eig.eigenvalues[order[1]] < DEGENERACY_GAP {
        return None;
    }
    Some(eig.eigenvectors.column(order[0]).normalize())
}

struct Locator<'a> {
    mesh: &'a TetMesh,
}

impl Locator<'_> {
    fn inside(bary: &[f64; 4]) -> bool {
        bary.iter().all(|&b| b >= -INSIDE_TOL)
    }

    /// Containing tet and barycentric coordinates, walking from `hint`.
    /// A walk that leaves through a boundary face means the point is outside;
    /// without a hint, or when the walk does not settle, all tets are scanned.
    fn locate(&self, p: &Vec3, hint: Option<usize>) -> Option<(usize, [f64; 4])> {
        if let Some(mut t) = hint {
            for _ in 0..MAX_WALK {
                let b = self.mesh.barycentric(t, p);
                if Self::inside(&b) {
                    return Some((t, b));
                }
                let k = (0..4).min_by(|&i, &j| b[i].total_cmp(&b[j])).unwrap();
                t = self.mesh.tet_neighbors()[t][k]?;
            }
        }
        (0..self.mesh.tets().len()).find_map(|t| {
            let b = self.mesh.barycentric(t, p);
            Self::inside(&b).then_some((t, b))
        })
    }
}

struct MeshField<'a> {
    locator: Locator<'a>,
    glyphs: Vec<Matrix3<f64>>,
}

impl DirectionField for MeshField<'_> {
    fn sample(&self, p: &Vec3, hint: &mut Option<usize>) -> Sample {
        let Some((t, b)) = self.locator.locate(p, *hint) else {
            return Sample::Outside;
        };
        *hint = Some(t);
        let tet = self.locator.mesh.tets()[t];
        let m = (0..4).fold(Matrix3::zeros(), |acc, i| acc + self.glyphs[tet[i]] * b[i]);
        match major_direction(&m) {
            Some(d) => Sample::Direction(d),
            None => Sample::Degenerate,
        }
    }
}

fn oriented(s: Sample, reference: &Vec3) -> std::result::Result<Vec3, Termination> {
    match s {
        Sample::Outside => Err(Termination::BoundaryExit),
        Sample::Degenerate => Err(Termination::Degenerate),
        Sample::Direction(d) => Ok(if d.dot(reference) < 0.0 { -d } else { d }),
    }
}

/// Follows the line field from `start` with RK4, choosing at each stage the
/// eigenvector sign closest to the previous direction. Exits are clipped to
/// the boundary by bisection along the last direction.
pub(crate) fn trace_one_way(
    field: &impl DirectionField,
    start: &Vec3,
    initial: &Vec3,
    step: f64,
    max_steps: usize,
) -> (Vec<Vec3>, Termination) {
    let mut hint = None;
    let mut points = Vec::new();
    let mut p = *start;
    let mut dir = *initial;
    for _ in 0..max_steps {
        let stages = (|| {
            let k1 = oriented(field.sample(&p, &mut hint), &dir)?;
            let mut h2 = hint;
            let k2 = oriented(field.sample(&(p + k1 * (0.5 * step)), &mut h2), &k1)?;
            let k3 = oriented(field.sample(&(p + k2 * (0.5 * step)), &mut h2), &k2)?;
            let k4 = oriented(field.sample(&(p + k3 * step), &mut h2), &k3)?;
            Ok((k1, (k1 + k2 * 2.0 + k3 * 2.0 + k4) / 6.0))
        })();
        let (k1, incr) = match stages {
            Ok(v) => v,
            Err(Termination::BoundaryExit) => {
                // Clip along the current direction to the last inside point.
                let probe = oriented(field.sample(&p, &mut hint), &dir).unwrap_or(dir);
                let (mut lo, mut hi) = (0.0, step);
                for _ in 0..BISECTIONS {
                    let mid = 0.5 * (lo + hi);
                    let mut h = hint;
                    if matches!(field.sample(&(p + probe * mid), &mut h), Sample::Outside) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                if lo > 0.0 {
                    points.push(p + probe * lo);
                }
                return (points, Termination::BoundaryExit);
            }
            Err(t) => return (points, t),
        };
        let next = p + incr * step;
        let mut h = hint;
        if matches!(field.sample(&next, &mut h), Sample::Outside) {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..BISECTIONS {
                let mid = 0.5 * (lo + hi);
                let mut h = hint;
                if matches!(field.sample(&(p + incr * (step * mid)), &mut h), Sample::Outside) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            if lo > 0.0 {
                points.push(p + incr * (step * lo));
            }
            return (points, Termination::BoundaryExit);
        }
        hint = h;
        dir = if incr.norm() > 0.0 { incr.normalize() } else { k1 };
        p = next;
        points.push(p);
    }
    (points, Termination::StepCap)
}

pub(crate) fn trace_both_ways(field: &impl DirectionField, seed: &Vec3, step: f64, max_steps: usize) -> Curve {
    let mut hint = None;
    let initial = match field.sample(seed, &mut hint) {
        Sample::Direction(d) => d,
        Sample::Degenerate => {
            return Curve {
                seed: *seed,
                points: vec![*seed],
                backward: Termination::Degenerate,
                forward: Termination::Degenerate,
            }
        }
        Sample::Outside => {
            return Curve {
                seed: *seed,
                points: vec![],
                backward: Termination::BoundaryExit,
                forward: Termination::BoundaryExit,
            }
        }
    };
    let (fwd, forward) = trace_one_way(field, seed, &initial, step, max_steps);
    let (bwd, backward) = trace_one_way(field, seed, &-initial, step, max_steps);
    let mut points: Vec<Vec3> = bwd.into_iter().rev().collect();
    points.push(*seed);
    points.extend(fwd);
    Curve {
        seed: *seed,
        points,
        backward,
        forward,
    }
}

/// Uniform point in a tet via normalized exponential weights.
fn sample_in_tet(mesh: &TetMesh, t: usize, rng: &mut ChaCha8Rng) -> Vec3 {
    let w: [f64; 4] = std::array::from_fn(|_| -(1.0 - rng.random::<f64>()).ln());
    let sum: f64 = w.iter().sum();
    let tet = mesh.tets()[t];
    (0..4).fold(Vec3::zeros(), |acc, i| acc + mesh.vertices()[tet[i]] * (w[i] / sum))
}

/// Traces major-lobe integral curves from seeds drawn uniformly by volume.
/// Each seed has its own random stream, so the result does not depend on
/// the thread count.
pub fn trace_integral_curves(archive: &FieldArchive, opts: &TraceOptions) -> Result<CurveSet> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::Invalid(format!("trace step must be positive (got {})", opts.step)));
    }
    let mesh = &archive.mesh;
    let field = MeshField {
        locator: Locator { mesh },
        glyphs: archive.glyph_matrices(),
    };
    let mut cumulative = Vec::with_capacity(mesh.tets().len());
    let mut acc = 0.0;
    for v in mesh.tet_volumes() {
        acc += v.abs();
        cumulative.push(acc);
    }
    let curves = (0..opts.n_seeds)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let u = rng.random::<f64>() * acc;
            let t = cumulative.partition_point(|&c| c < u).min(cumulative.len() - 1);
            let seed = sample_in_tet(mesh, t, &mut rng);
            trace_both_ways(&field, &seed, opts.step, opts.max_steps)
        })
        .collect();
    Ok(CurveSet { curves })
}
