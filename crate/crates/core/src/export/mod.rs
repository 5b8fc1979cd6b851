//! Field archives (VTK), glyph geometry and integral curves (OBJ).

mod glyphs;
mod trace;

use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::energy::{self, EnergyBreakdown, Penalty, VertexClass, VertexFrame};
use crate::mesh::io::{read_vtk, write_vtk, ArrayKind, PointArray};
use crate::mesh::TetMesh;
use crate::odeco::{symmetric_matrix, AxisRotation, OdecoVec};
use crate::{Error, Result};

pub use glyphs::{export_glyphs, GlyphMesh, GlyphStyle};
pub use trace::{trace_integral_curves, Curve, CurveSet, Termination, TraceOptions};

/// Largest allowed difference between stored and regenerated coefficients.
pub const REGENERATION_TOL: f64 = 1e-12;

fn class_code(class: VertexClass) -> f64 {
    match class {
        VertexClass::Interior => 0.0,
        VertexClass::Boundary => 1.0,
        VertexClass::FeatureEdge => 2.0,
        VertexClass::Corner => 3.0,
        VertexClass::HardFixed => 4.0,
    }
}

fn class_from_code(code: f64) -> Option<VertexClass> {
    Some(match code as i64 {
        0 => VertexClass::Interior,
        1 => VertexClass::Boundary,
        2 => VertexClass::FeatureEdge,
        3 => VertexClass::Corner,
        4 => VertexClass::HardFixed,
        _ => return None,
    })
}

/// An optimized field together with its mesh.
#[derive(Debug, Clone)]
pub struct FieldArchive {
    pub mesh: TetMesh,
    pub frames: Vec<VertexFrame>,
}

impl FieldArchive {
    pub fn new(mesh: TetMesh, frames: Vec<VertexFrame>) -> Result<Self> {
        if frames.len() != mesh.num_vertices() {
            return Err(Error::Invalid(format!(
                "{} frames for a mesh with {} vertices",
                frames.len(),
                mesh.num_vertices()
            )));
        }
        Ok(Self { mesh, frames })
    }

    pub fn coefficients(&self) -> Vec<OdecoVec> {
        energy::realize(&self.frames)
    }

    /// `R diag(lambda) R^T` per vertex.
    pub fn glyph_matrices(&self) -> Vec<Matrix3<f64>> {
        self.frames.iter().map(|f| symmetric_matrix(&f.rotation3(), f.lambda)).collect()
    }

    /// Smoothness energy of the stored field (no penalty).
    pub fn energy(&self) -> EnergyBreakdown {
        energy::evaluate(&self.mesh, &self.frames, Penalty::None)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let n = self.frames.len();
        let mut theta = Vec::with_capacity(3 * n);
        let mut lambda = Vec::with_capacity(3 * n);
        let mut axis = Vec::with_capacity(3 * n);
        let mut locked = Vec::with_capacity(3 * n);
        let mut major = Vec::with_capacity(3 * n);
        for f in &self.frames {
            theta.extend_from_slice(&f.theta);
            lambda.extend_from_slice(&f.lambda);
            axis.extend_from_slice(f.axis.as_ref().map_or(&[0.0; 3], |a| a.axis.as_ref()));
            locked.extend(f.lambda_locked.iter().map(|&l| if l { 1.0 } else { 0.0 }));
            let k = (0..3).max_by(|&a, &b| f.lambda[a].total_cmp(&f.lambda[b])).unwrap_or(0);
            major.extend(f.rotation3().column(k).iter());
        }
        let classes = self.frames.iter().map(|f| class_code(f.class)).collect();
        let coefficients = self.coefficients().iter().flat_map(|c| c.0.iter().copied()).collect();
        let glyphs = self
            .glyph_matrices()
            .iter()
            .flat_map(|m| m.transpose().iter().copied().collect::<Vec<_>>())
            .collect();
        let energy = self.energy();
        let title = format!("odeco field; smoothness {}", energy.smoothness);
        write_vtk(
            path,
            &self.mesh,
            &title,
            &[
                PointArray::new("smoothness", ArrayKind::Scalars, 1, energy.per_vertex_smoothness),
                PointArray::new("class", ArrayKind::Scalars, 1, classes),
                PointArray::new("major", ArrayKind::Vectors, 3, major),
                PointArray::new("glyph", ArrayKind::Tensors, 9, glyphs),
                PointArray::new("theta", ArrayKind::Field, 3, theta),
                PointArray::new("lambda", ArrayKind::Field, 3, lambda),
                PointArray::new("axis", ArrayKind::Field, 3, axis),
                PointArray::new("lambda_locked", ArrayKind::Field, 3, locked),
                PointArray::new("coefficients", ArrayKind::Field, 15, coefficients),
            ],
        )
    }

    /// Loads an archive and checks that the stored coefficients are
    /// reproduced by the stored parameters.
    pub fn load(path: &Path) -> Result<Self> {
        let mut data = read_vtk(path)?;
        let mut take = |name: &str, comps: usize| -> Result<PointArray> {
            let a = data
                .point_data
                .remove(name)
                .ok_or_else(|| Error::Invalid(format!("{}: missing point array {name:?}", path.display())))?;
            if a.components != comps {
                return Err(Error::Invalid(format!(
                    "{}: array {name:?} has {} components, expected {comps}",
                    path.display(),
                    a.components
                )));
            }
            Ok(a)
        };
        let theta = take("theta", 3)?;
        let lambda = take("lambda", 3)?;
        let axis = take("axis", 3)?;
        let locked = take("lambda_locked", 3)?;
        let class = take("class", 1)?;
        let coefficients = take("coefficients", 15)?;
        let mesh = data.into_mesh(path)?;
        let n = mesh.num_vertices();
        for a in [&theta, &lambda, &axis, &locked, &class, &coefficients] {
            if a.values.len() != a.components * n {
                return Err(Error::Invalid(format!("{}: array {:?} has the wrong length", path.display(), a.name)));
            }
        }
        let mut frames = Vec::with_capacity(n);
        for v in 0..n {
            let t: [f64; 3] = theta.tuple(v).try_into().unwrap();
            let l: [f64; 3] = lambda.tuple(v).try_into().unwrap();
            let c = class_from_code(class.values[v])
                .ok_or_else(|| Error::Invalid(format!("{}: vertex {v} has unknown class", path.display())))?;
            let mut frame = match c {
                VertexClass::Interior => VertexFrame::interior(t, l),
                VertexClass::HardFixed => VertexFrame::hard_fixed(t, l),
                _ => {
                    let a = AxisRotation::new(&Vector3::from_column_slice(axis.tuple(v)))?;
                    VertexFrame::aligned(c, a, t[2], l)
                }
            };
            if c != VertexClass::HardFixed {
                let lk = locked.tuple(v);
                frame.lambda_locked = [lk[0] != 0.0, lk[1] != 0.0, lk[2] != 0.0];
            }
            frames.push(frame);
        }
        let archive = Self { mesh, frames };
        for (v, c) in archive.coefficients().iter().enumerate() {
            let stored = coefficients.tuple(v);
            let diff = c.0.iter().zip(stored).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if diff > REGENERATION_TOL {
                return Err(Error::Invalid(format!(
                    "{}: vertex {v} coefficients differ from their parameters by {diff:e}",
                    path.display()
                )));
            }
        }
        Ok(archive)
    }
}
