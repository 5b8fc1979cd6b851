use std::collections::BTreeMap;

use nalgebra::DVector;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};
use crate::mesh::TetMesh;

/// Stretch value used for a component that no source constrains.
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Spreads sparse stretch values over the mesh with one implicit-Euler heat
/// step, `(M + t L) u = M u0`, holding source vertices fixed.
///
/// Each component is diffused independently; a source only pins the
/// components its mask selects. Free vertices start from the mean source
/// value so a single source yields a constant field. Negative cotangent
/// weights are dropped from the operator, which keeps the system an M-matrix
/// and the result inside the range of the sources.
pub fn diffuse_lambda(
    mesh: &TetMesh,
    sources: &BTreeMap<usize, ([f64; 3], [bool; 3])>,
    diffusion_time: f64,
) -> Result<Vec<[f64; 3]>> {
    if sources.is_empty() {
        return Err(Error::Solver("stretch diffusion needs at least one source vertex".into()));
    }
    if let Some(&v) = sources.keys().find(|&&v| v >= mesh.num_vertices()) {
        return Err(Error::Solver(format!("diffusion source {v} is not a mesh vertex")));
    }
    let n = mesh.num_vertices();
    let h = mesh.mean_edge_length();
    let t = diffusion_time * h * h;
    let mut out = vec![[DEFAULT_LAMBDA; 3]; n];
    let mut factor_cache: Vec<(Vec<bool>, Solver)> = Vec::new();

    for c in 0..3 {
        let pinned: Vec<bool> = (0..n).map(|v| sources.get(&v).is_some_and(|(_, m)| m[c])).collect();
        let values: Vec<f64> = sources.values().filter(|(_, m)| m[c]).map(|(l, _)| l[c]).collect();
        if values.is_empty() {
            continue;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut u0 = vec![mean; n];
        for (&v, (l, m)) in sources {
            if m[c] {
                u0[v] = l[c];
            }
        }
        let solver = match factor_cache.iter().position(|(p, _)| *p == pinned) {
            Some(i) => &factor_cache[i].1,
            None => {
                factor_cache.push((pinned.clone(), Solver::new(mesh, &pinned, t)?));
                &factor_cache.last().unwrap().1
            }
        };
        let u = solver.solve(mesh, &u0, t);
        for v in 0..n {
            out[v][c] = u[v];
        }
    }
    Ok(out)
}

/// Cholesky factor of the free-vertex block of `M + t L`.
pub(super) struct Solver {
    free_index: Vec<Option<usize>>,
    factor: Option<CscCholesky<f64>>,
}

impl Solver {
    pub(super) fn new(mesh: &TetMesh, pinned: &[bool], t: f64) -> Result<Self> {
        let n = mesh.num_vertices();
        let mut free_index = vec![None; n];
        let mut m = 0;
        for v in 0..n {
            if !pinned[v] {
                free_index[v] = Some(m);
                m += 1;
            }
        }
        if m == 0 {
            return Ok(Self { free_index, factor: None });
        }
        let mass = mesh.lumped_mass();
        let w = mesh.cotan_weights();
        let mut coo = CooMatrix::new(m, m);
        for v in 0..n {
            let Some(i) = free_index[v] else { continue };
            let mut diag = mass[v];
            for &(u, e) in mesh.neighbors(v) {
                let we = t * w[e].max(0.0);
                diag += we;
                if let Some(j) = free_index[u] {
                    coo.push(i, j, -we);
                }
            }
            coo.push(i, i, diag);
        }
        let csc = CscMatrix::from(&coo);
        let factor = CscCholesky::factor(&csc)
            .map_err(|e| Error::Solver(format!("diffusion system is not positive definite: {e}")))?;
        Ok(Self {
            free_index,
            factor: Some(factor),
        })
    }

    pub(super) fn solve(&self, mesh: &TetMesh, u0: &[f64], t: f64) -> Vec<f64> {
        let Some(factor) = &self.factor else { return u0.to_vec() };
        let mass = mesh.lumped_mass();
        let w = mesh.cotan_weights();
        let m = self.free_index.iter().flatten().count();
        let mut rhs = DVector::zeros(m);
        for (v, idx) in self.free_index.iter().enumerate() {
            let Some(i) = *idx else { continue };
            rhs[i] = mass[v] * u0[v];
            for &(u, e) in mesh.neighbors(v) {
                if self.free_index[u].is_none() {
                    rhs[i] += t * w[e].max(0.0) * u0[u];
                }
            }
        }
        let x = factor.solve(&rhs);
        let mut u = u0.to_vec();
        for (v, idx) in self.free_index.iter().enumerate() {
            if let Some(i) = *idx {
                u[v] = x[i];
            }
        }
        u
    }
}
