use std::collections::{BTreeMap, VecDeque};

use super::{sorted_pair, TetMesh, Vec3};
use crate::error::{Error, Result};

pub const DEFAULT_FEATURE_ANGLE_DEG: f64 = 40.0;

/// Boundary surface of a tet mesh: vertex normals and surface connectivity.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    normals: Vec<Vec3>,
    face_normals: Vec<Vec3>,
    /// Boundary edges (sorted pair) with their two incident boundary faces.
    surface_edges: Vec<([usize; 2], [usize; 2])>,
    surface_neighbors: Vec<Vec<usize>>,
}

/// Sharp-feature classification of the boundary.
#[derive(Debug, Clone, Default)]
pub struct FeatureData {
    /// Mesh edge indices of feature edges.
    pub feature_edges: Vec<usize>,
    /// Unit tangent per feature vertex (corners included), `None` elsewhere.
    pub tangents: Vec<Option<Vec3>>,
    pub corners: Vec<usize>,
}

impl FeatureData {
    pub fn is_corner(&self, v: usize) -> bool {
        self.corners.binary_search(&v).is_ok()
    }

    pub fn is_feature_vertex(&self, v: usize) -> bool {
        self.tangents.get(v).is_some_and(|t| t.is_some())
    }

    /// Marks extra corner vertices. A vertex without a tangent gets the
    /// supplied one (or the z axis when none is given).
    pub fn add_corners(&mut self, corners: impl IntoIterator<Item = (usize, Option<Vec3>)>) {
        for (v, tangent) in corners {
            if let Some(t) = tangent {
                self.tangents[v] = Some(t.normalize());
            } else if self.tangents[v].is_none() {
                self.tangents[v] = Some(Vec3::z());
            }
            if let Err(pos) = self.corners.binary_search(&v) {
                self.corners.insert(pos, v);
            }
        }
    }
}

impl BoundaryData {
    /// Extracts boundary normals (angle-weighted) and surface connectivity.
    pub fn build(mesh: &TetMesh) -> Result<Self> {
        let n = mesh.num_vertices();
        let pos = mesh.vertices();
        let mut normals = vec![Vec3::zeros(); n];
        let mut face_normals = Vec::with_capacity(mesh.boundary_faces().len());
        let mut edge_faces: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (fi, f) in mesh.boundary_faces().iter().enumerate() {
            let p = f.map(|v| pos[v]);
            let fnormal = (p[1] - p[0]).cross(&(p[2] - p[0])).normalize();
            face_normals.push(fnormal);
            for k in 0..3 {
                let a = p[(k + 1) % 3] - p[k];
                let b = p[(k + 2) % 3] - p[k];
                let angle = a.angle(&b);
                normals[f[k]] += fnormal * angle;
                edge_faces.entry(sorted_pair(f[k], f[(k + 1) % 3])).or_default().push(fi);
            }
        }
        for nrm in normals.iter_mut() {
            if nrm.norm() > 0.0 {
                *nrm = nrm.normalize();
            }
        }
        let bad: Vec<(usize, usize)> = edge_faces
            .iter()
            .filter(|(_, faces)| faces.len() > 2)
            .map(|(e, _)| *e)
            .collect();
        if !bad.is_empty() {
            return Err(Error::NonManifold(bad));
        }
        let mut surface_neighbors = vec![Vec::new(); n];
        let mut surface_edges = Vec::with_capacity(edge_faces.len());
        for (e, faces) in edge_faces {
            if faces.len() != 2 {
                return Err(Error::Mesh(format!("boundary edge {e:?} has a single face")));
            }
            surface_neighbors[e.0].push(e.1);
            surface_neighbors[e.1].push(e.0);
            surface_edges.push(([e.0, e.1], [faces[0], faces[1]]));
        }
        Ok(Self {
            normals,
            face_normals,
            surface_edges,
            surface_neighbors,
        })
    }

    /// Unit normal at a boundary vertex; zero for interior vertices.
    pub fn normal(&self, v: usize) -> Vec3 {
        self.normals[v]
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn face_normals(&self) -> &[Vec3] {
        &self.face_normals
    }

    /// Neighbors of `v` along boundary edges (empty for interior vertices).
    pub fn surface_neighbors(&self, v: usize) -> &[usize] {
        &self.surface_neighbors[v]
    }

    /// Vertices within `rings` boundary-edge hops of `v`, excluding `v`.
    pub fn ring(&self, v: usize, rings: usize) -> Vec<usize> {
        let mut seen = vec![v];
        let mut frontier = vec![v];
        for _ in 0..rings {
            let mut next = Vec::new();
            for &u in &frontier {
                for &w in &self.surface_neighbors[u] {
                    if !seen.contains(&w) {
                        seen.push(w);
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        seen.remove(0);
        seen
    }

    /// Feature edges are boundary edges whose face normals differ by more than
    /// `threshold_deg`, i.e. whose dihedral angle deviates from flat by that much.
    pub fn detect_features(&self, mesh: &TetMesh, threshold_deg: f64) -> FeatureData {
        let n = mesh.num_vertices();
        let pos = mesh.vertices();
        let threshold = threshold_deg.to_radians();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut feature_edges = Vec::new();
        for (e, faces) in &self.surface_edges {
            let turn = self.face_normals[faces[0]].angle(&self.face_normals[faces[1]]);
            if turn > threshold {
                feature_edges.push(mesh.edge_index(e[0], e[1]).expect("boundary edge is a mesh edge"));
                incident[e[0]].push(e[1]);
                incident[e[1]].push(e[0]);
            }
        }
        feature_edges.sort_unstable();
        for list in incident.iter_mut() {
            list.sort_unstable();
        }
        let corners: Vec<usize> = (0..n).filter(|&v| incident[v].len() >= 3).collect();

        let dir = |from: usize, to: usize| (pos[to] - pos[from]).normalize();
        let mut tangents: Vec<Option<Vec3>> = (0..n)
            .map(|v| match incident[v].as_slice() {
                [] => None,
                [a] => Some(dir(v, *a)),
                [a, b] => {
                    let t = dir(v, *a) - dir(v, *b);
                    Some(if t.norm() > 1e-12 { t.normalize() } else { dir(v, *a) })
                }
                // Corners take one incident edge direction.
                [a, ..] => Some(dir(v, *a)),
            })
            .collect();

        // Make tangents sign-consistent along feature chains.
        let mut visited = vec![false; n];
        for start in 0..n {
            if visited[start] || tangents[start].is_none() || incident[start].len() >= 3 {
                continue;
            }
            visited[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                let tu = tangents[u].unwrap();
                for &w in &incident[u] {
                    if visited[w] || incident[w].len() >= 3 {
                        continue;
                    }
                    visited[w] = true;
                    if let Some(tw) = tangents[w].as_mut() {
                        if tw.dot(&tu) < 0.0 {
                            *tw = -*tw;
                        }
                    }
                    queue.push_back(w);
                }
            }
        }

        FeatureData {
            feature_edges,
            tangents,
            corners,
        }
    }
}
