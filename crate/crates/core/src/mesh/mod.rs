//! Tetrahedral meshes and the geometric quantities the field energy needs.
//!
//! A [`TetMesh`] is immutable once built. Construction fixes tet orientation,
//! extracts the unique edge set and the boundary surface, and assembles the
//! cotangent stiffness weights and lumped vertex masses.

mod boundary;
mod curvature;
pub mod io;
pub mod shapes;

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use boundary::{BoundaryData, FeatureData, DEFAULT_FEATURE_ANGLE_DEG};
pub use curvature::{estimate_curvature, CurvatureField, VertexCurvature};

pub type Vec3 = Vector3<f64>;

/// Per-tet cotangent contributions are clamped to this magnitude.
pub const COT_CLAMP: f64 = 20.0;

/// Local edges of a tet as (a, b, opposite c, opposite d).
const TET_EDGES: [[usize; 4]; 6] = [
    [0, 1, 2, 3],
    [0, 2, 1, 3],
    [0, 3, 1, 2],
    [1, 2, 0, 3],
    [1, 3, 0, 2],
    [2, 3, 0, 1],
];

/// Outward-oriented faces of a positively oriented tet; face `k` is opposite
/// local vertex `k`.
const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

#[derive(Debug, Clone)]
pub struct TetMesh {
    vertices: Vec<Vec3>,
    tets: Vec<[usize; 4]>,
    edges: Vec<[usize; 2]>,
    edge_lookup: HashMap<(usize, usize), usize>,
    /// CSR vertex adjacency: neighbors of `v` are `adj[adj_offsets[v]..adj_offsets[v+1]]`
    /// as (neighbor, edge index), sorted by neighbor.
    adj_offsets: Vec<usize>,
    adj: Vec<(usize, usize)>,
    boundary_faces: Vec<[usize; 3]>,
    boundary_flags: Vec<bool>,
    /// Neighbor tet across each local face, `None` on the boundary.
    tet_neighbors: Vec<[Option<usize>; 4]>,
    cotan_weights: Vec<f64>,
    lumped_mass: Vec<f64>,
    volumes: Vec<f64>,
}

impl TetMesh {
    /// Builds a mesh, reordering negatively oriented tets.
    pub fn new(vertices: Vec<Vec3>, tets: Vec<[usize; 4]>) -> Result<Self> {
        let n = vertices.len();
        if tets.is_empty() {
            return Err(Error::Mesh("mesh has no tetrahedra".into()));
        }
        let mut tets = tets;
        for (t, tet) in tets.iter_mut().enumerate() {
            if let Some(&bad) = tet.iter().find(|&&v| v >= n) {
                return Err(Error::Mesh(format!(
                    "tet {t} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
            match orient_tet(&vertices, tet) {
                Orientation::Positive => {}
                Orientation::Flipped => tet.swap(2, 3),
                Orientation::Degenerate => {
                    return Err(Error::Mesh(format!("tet {t} {tet:?} has zero volume")))
                }
            }
        }

        let mut edge_lookup = HashMap::new();
        let mut edges = Vec::new();
        for tet in &tets {
            for e in TET_EDGES {
                let key = sorted_pair(tet[e[0]], tet[e[1]]);
                edge_lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
            }
        }
        // Deterministic edge order independent of tet traversal.
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.sort_by_key(|&i| edges[i]);
        let edges: Vec<[usize; 2]> = order.iter().map(|&i| edges[i]).collect();
        let edge_lookup: HashMap<(usize, usize), usize> = edges
            .iter()
            .enumerate()
            .map(|(i, e)| ((e[0], e[1]), i))
            .collect();

        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e[0]] += 1;
            degree[e[1]] += 1;
        }
        let mut adj_offsets = vec![0usize; n + 1];
        for v in 0..n {
            adj_offsets[v + 1] = adj_offsets[v] + degree[v];
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![(0usize, 0usize); adj_offsets[n]];
        for (ei, e) in edges.iter().enumerate() {
            adj[fill[e[0]]] = (e[1], ei);
            fill[e[0]] += 1;
            adj[fill[e[1]]] = (e[0], ei);
            fill[e[1]] += 1;
        }
        for v in 0..n {
            adj[adj_offsets[v]..adj_offsets[v + 1]].sort_unstable();
        }

        // Face incidence: sorted key -> list of (tet, local face).
        let mut faces: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::new();
        for (t, tet) in tets.iter().enumerate() {
            for (k, f) in TET_FACES.iter().enumerate() {
                let mut key = [tet[f[0]], tet[f[1]], tet[f[2]]];
                key.sort_unstable();
                faces.entry(key).or_default().push((t, k));
            }
        }
        let mut tet_neighbors = vec![[None; 4]; tets.len()];
        let mut boundary_faces = Vec::new();
        let mut face_keys: Vec<&[usize; 3]> = faces.keys().collect();
        face_keys.sort_unstable();
        for key in face_keys {
            let inc = &faces[key];
            match inc.as_slice() {
                [(t, k)] => {
                    let tet = tets[*t];
                    let f = TET_FACES[*k];
                    boundary_faces.push([tet[f[0]], tet[f[1]], tet[f[2]]]);
                }
                [(t0, k0), (t1, k1)] => {
                    tet_neighbors[*t0][*k0] = Some(*t1);
                    tet_neighbors[*t1][*k1] = Some(*t0);
                }
                _ => {
                    return Err(Error::Mesh(format!(
                        "face {key:?} is shared by {} tets",
                        inc.len()
                    )))
                }
            }
        }
        let mut boundary_flags = vec![false; n];
        for f in &boundary_faces {
            for &v in f {
                boundary_flags[v] = true;
            }
        }

        let mut cotan_weights = vec![0.0; edges.len()];
        let mut lumped_mass = vec![0.0; n];
        let mut volumes = Vec::with_capacity(tets.len());
        for tet in &tets {
            let p = tet.map(|v| vertices[v]);
            let vol = signed_volume(&p);
            volumes.push(vol);
            for &v in tet {
                lumped_mass[v] += vol / 4.0;
            }
            for e in TET_EDGES {
                let (a, b, c, d) = (e[0], e[1], e[2], e[3]);
                let opposite_len = (p[d] - p[c]).norm();
                let cot = dihedral_cot(&p[c], &p[d], &p[a], &p[b]).clamp(-COT_CLAMP, COT_CLAMP);
                let ei = edge_lookup[&sorted_pair(tet[a], tet[b])];
                cotan_weights[ei] += opposite_len * cot / 6.0;
            }
        }

        Ok(Self {
            vertices,
            tets,
            edges,
            edge_lookup,
            adj_offsets,
            adj,
            boundary_faces,
            boundary_flags,
            tet_neighbors,
            cotan_weights,
            lumped_mass,
            volumes,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&sorted_pair(a, b)).copied()
    }

    /// Neighbors of `v` as (neighbor vertex, edge index), sorted by neighbor.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[self.adj_offsets[v]..self.adj_offsets[v + 1]]
    }

    pub fn boundary_faces(&self) -> &[[usize; 3]] {
        &self.boundary_faces
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary_flags
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_flags[v]
    }

    pub fn tet_neighbors(&self) -> &[[Option<usize>; 4]] {
        &self.tet_neighbors
    }

    /// Per-edge cotangent weights `w_ij`, indexed like [`Self::edges`].
    pub fn cotan_weights(&self) -> &[f64] {
        &self.cotan_weights
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn tet_volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn mean_edge_length(&self) -> f64 {
        let total: f64 = self
            .edges
            .iter()
            .map(|e| (self.vertices[e[1]] - self.vertices[e[0]]).norm())
            .sum();
        total / self.edges.len() as f64
    }

    /// Applies `L u` for the cotangent Laplacian `L = D - W` (positive semidefinite).
    pub fn laplacian_apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (e, w) in self.edges.iter().zip(&self.cotan_weights) {
            let d = w * (u[e[0]] - u[e[1]]);
            out[e[0]] += d;
            out[e[1]] -= d;
        }
        out
    }

    /// Barycentric coordinates of `p` in tet `t`.
    pub fn barycentric(&self, t: usize, p: &Vec3) -> [f64; 4] {
        let q = self.tets[t].map(|v| self.vertices[v]);
        barycentric(&q, p)
    }

    /// Axis-aligned bounding box (min, max).
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

enum Orientation {
    Positive,
    Flipped,
    Degenerate,
}

fn orient_tet(vertices: &[Vec3], tet: &[usize; 4]) -> Orientation {
    let p = tet.map(|v| vertices[v]);
    let vol6 = 6.0 * signed_volume(&p);
    let scale = TET_EDGES
        .iter()
        .map(|e| (p[e[1]] - p[e[0]]).norm())
        .fold(0.0, f64::max);
    if !(vol6.abs() > 1e-12 * scale.powi(3)) {
        Orientation::Degenerate
    } else if vol6 > 0.0 {
        Orientation::Positive
    } else {
        Orientation::Flipped
    }
}

pub(crate) fn signed_volume(p: &[Vec3; 4]) -> f64 {
    (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0])) / 6.0
}

pub(crate) fn barycentric(q: &[Vec3; 4], p: &Vec3) -> [f64; 4] {
    let vol = signed_volume(q);
    let sub = |k: usize| {
        let mut r = *q;
        r[k] = *p;
        signed_volume(&r) / vol
    };
    [sub(0), sub(1), sub(2), sub(3)]
}

/// Cotangent of the dihedral angle at edge (c, d) between the faces containing
/// `a` and `b`.
fn dihedral_cot(c: &Vec3, d: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let axis = (d - c).normalize();
    let ua = (a - c) - axis * axis.dot(&(a - c));
    let ub = (b - c) - axis * axis.dot(&(b - c));
    let cos = ua.dot(&ub);
    let sin = ua.cross(&ub).norm();
    if sin == 0.0 {
        if cos >= 0.0 {
            COT_CLAMP
        } else {
            -COT_CLAMP
        }
    } else {
        cos / sin
    }
}

pub(crate) fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}
