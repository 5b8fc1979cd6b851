use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::FieldArchive;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlyphStyle {
    Cuboid,
    Ellipsoid,
}

const ELLIPSOID_RINGS: usize = 8;
const ELLIPSOID_SEGMENTS: usize = 12;

/// Polygon soup of glyph primitives, one block of vertices per glyph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlyphMesh {
    pub vertices: Vec<Vector3<f64>>,
    /// Zero-based vertex indices per polygon.
    pub faces: Vec<Vec<usize>>,
    /// Source mesh vertex of each glyph.
    pub glyph_vertices: Vec<usize>,
    pub vertices_per_glyph: usize,
}

impl GlyphMesh {
    pub fn glyph_count(&self) -> usize {
        self.glyph_vertices.len()
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} glyphs", self.glyph_count());
        for p in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
        }
        for f in &self.faces {
            let ids: Vec<String> = f.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(s, "f {}", ids.join(" "));
        }
        s
    }

    pub fn write_obj(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_obj()).map_err(|e| Error::io(path, e))
    }
}

fn unit_primitive(style: GlyphStyle) -> (Vec<Vector3<f64>>, Vec<Vec<usize>>) {
    match style {
        GlyphStyle::Cuboid => {
            let corners = (0..8)
                .map(|i| {
                    let s = |bit: usize| if i & bit != 0 { 1.0 } else { -1.0 };
                    Vector3::new(s(1), s(2), s(4))
                })
                .collect();
            let faces = vec![
                vec![0, 4, 6, 2],
                vec![1, 3, 7, 5],
                vec![0, 1, 5, 4],
                vec![2, 6, 7, 3],
                vec![0, 2, 3, 1],
                vec![4, 5, 7, 6],
            ];
            (corners, faces)
        }
        GlyphStyle::Ellipsoid => {
            let mut pts = vec![Vector3::new(0.0, 0.0, -1.0)];
            for r in 1..ELLIPSOID_RINGS {
                let polar = PI * r as f64 / ELLIPSOID_RINGS as f64;
                for s in 0..ELLIPSOID_SEGMENTS {
                    let az = 2.0 * PI * s as f64 / ELLIPSOID_SEGMENTS as f64;
                    pts.push(Vector3::new(polar.sin() * az.cos(), polar.sin() * az.sin(), -polar.cos()));
                }
            }
            pts.push(Vector3::new(0.0, 0.0, 1.0));
            let ring = |r: usize, s: usize| 1 + (r - 1) * ELLIPSOID_SEGMENTS + s % ELLIPSOID_SEGMENTS;
            let top = pts.len() - 1;
            let mut faces = Vec::new();
            for s in 0..ELLIPSOID_SEGMENTS {
                faces.push(vec![0, ring(1, s + 1), ring(1, s)]);
                for r in 1..ELLIPSOID_RINGS - 1 {
                    faces.push(vec![ring(r, s), ring(r, s + 1), ring(r + 1, s + 1), ring(r + 1, s)]);
                }
                faces.push(vec![ring(ELLIPSOID_RINGS - 1, s), ring(ELLIPSOID_RINGS - 1, s + 1), top]);
            }
            (pts, faces)
        }
    }
}

/// One oriented primitive per `subsample`-th vertex. Semi-axes follow the
/// lobe axes scaled by `lambda`, rescaled per glyph so that the longest is
/// `size` (half the mean edge length when `None`).
pub fn export_glyphs(archive: &FieldArchive, subsample: usize, style: GlyphStyle, size: Option<f64>) -> GlyphMesh {
    let size = size.unwrap_or_else(|| 0.5 * archive.mesh.mean_edge_length());
    let (unit, unit_faces) = unit_primitive(style);
    let mut out = GlyphMesh {
        vertices_per_glyph: unit.len(),
        ..Default::default()
    };
    for (v, frame) in archive.frames.iter().enumerate().step_by(subsample.max(1)) {
        let r = frame.rotation3();
        let largest = frame.lambda.iter().copied().fold(0.0, f64::max);
        let scale = if largest > 0.0 { size / largest } else { 0.0 };
        let center = archive.mesh.vertices()[v];
        let base = out.vertices.len();
        for u in &unit {
            let local = Vector3::new(u.x * frame.lambda[0], u.y * frame.lambda[1], u.z * frame.lambda[2]) * scale;
            out.vertices.push(center + r * local);
        }
        out.faces
            .extend(unit_faces.iter().map(|f| f.iter().map(|i| base + i).collect::<Vec<_>>()));
        out.glyph_vertices.push(v);
    }
    out
}
