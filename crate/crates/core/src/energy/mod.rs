//! Smoothness, guidance and fidelity energies with analytic gradients.
//!
//! The total objective is `E_s + psi * E_lambda` when designing a field and
//! `E_s + kappa * E_dis` when smoothing an input field. All evaluation is a
//! pure function of `(mesh, frames)`; per-vertex work runs on rayon and is
//! reduced in vertex order, so results are bitwise reproducible.

mod frame;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::TetMesh;
use crate::odeco::{tables, Coeffs, OdecoVec};

pub use frame::{VertexClass, VertexFrame};

/// Which parameters the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofMode {
    All,
    /// Stretch frozen; orientations only.
    ThetaOnly,
}

/// Flat ordering of free parameters: by vertex, then theta slots before
/// lambda slots. Slots `0..3` are theta components, `3..6` lambda components.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    offsets: Vec<usize>,
    slots: Vec<(usize, usize)>,
}

impl ParamLayout {
    pub fn new(frames: &[VertexFrame], mode: DofMode) -> Self {
        let mut offsets = Vec::with_capacity(frames.len() + 1);
        let mut slots = Vec::new();
        for (v, f) in frames.iter().enumerate() {
            offsets.push(slots.len());
            if f.class == VertexClass::HardFixed {
                continue;
            }
            slots.extend(f.class.theta_slots().iter().map(|&k| (v, k)));
            if mode == DofMode::All {
                slots.extend((0..3).filter(|&c| !f.lambda_locked[c]).map(|c| (v, 3 + c)));
            }
        }
        offsets.push(slots.len());
        Self { offsets, slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// `(vertex, slot)` for each parameter index.
    pub fn slots(&self) -> &[(usize, usize)] {
        &self.slots
    }

    /// Parameter index range owned by vertex `v`.
    pub fn vertex_range(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub fn is_lambda(&self, i: usize) -> bool {
        self.slots[i].1 >= 3
    }

    pub fn pack(&self, frames: &[VertexFrame]) -> Vec<f64> {
        self.slots.iter().map(|&(v, s)| read_slot(&frames[v], s)).collect()
    }

    pub fn unpack(&self, x: &[f64], frames: &mut [VertexFrame]) {
        assert_eq!(x.len(), self.slots.len(), "parameter vector length mismatch");
        for (&(v, s), &value) in self.slots.iter().zip(x) {
            if s < 3 {
                frames[v].theta[s] = value;
            } else {
                frames[v].lambda[s - 3] = value;
            }
        }
    }

    fn gather(&self, local: &[[f64; 6]]) -> Vec<f64> {
        self.slots.iter().map(|&(v, s)| local[v][s]).collect()
    }
}

fn read_slot(f: &VertexFrame, s: usize) -> f64 {
    if s < 3 {
        f.theta[s]
    } else {
        f.lambda[s - 3]
    }
}

/// A soft stretch target at one vertex. Components with `mask[c] == false`
/// are free (for example the normal-direction ratio under curvature guidance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaTarget {
    pub value: [f64; 3],
    pub mask: [bool; 3],
    /// Multiplier on top of the global weight.
    pub weight: f64,
}

impl LambdaTarget {
    pub fn full(value: [f64; 3]) -> Self {
        Self {
            value,
            mask: [true; 3],
            weight: 1.0,
        }
    }
}

/// The penalty paired with the smoothness energy.
#[derive(Debug, Clone, Copy)]
pub enum Penalty<'a> {
    None,
    /// Design mode: `psi * sum ||lambda_i - target_i||^2` over targeted vertices.
    Guidance { targets: &'a [Option<LambdaTarget>], psi: f64 },
    /// Smoothing mode: `kappa * sum ||f_i - f_in_i||^2`.
    Fidelity { reference: &'a [OdecoVec], kappa: f64 },
}

impl Penalty<'_> {
    pub fn weight(&self) -> f64 {
        match *self {
            Penalty::None => 0.0,
            Penalty::Guidance { psi, .. } => psi,
            Penalty::Fidelity { kappa, .. } => kappa,
        }
    }
}

/// Energies at one state. `penalty` is unweighted; `total = smoothness + weight * penalty`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub smoothness: f64,
    pub penalty: f64,
    pub weight: f64,
    pub per_vertex_smoothness: Vec<f64>,
}

impl EnergyBreakdown {
    /// Smoothness divided by the vertex count, for comparing meshes.
    pub fn normalized_smoothness(&self) -> f64 {
        self.smoothness / self.per_vertex_smoothness.len().max(1) as f64
    }

    pub fn normalized_total(&self) -> f64 {
        self.total / self.per_vertex_smoothness.len().max(1) as f64
    }
}

/// Realized tensors for every vertex.
pub fn realize(frames: &[VertexFrame]) -> Vec<OdecoVec> {
    let t = tables();
    frames.par_iter().map(|f| f.realize_with(t)).collect()
}

/// `(E_s, per-vertex E_s^i)` with `E_s^i = 1/2 sum_j w_ij ||f_i - f_j||^2`.
pub fn smoothness_energy(mesh: &TetMesh, field: &[OdecoVec]) -> (f64, Vec<f64>) {
    let w = mesh.cotan_weights();
    let edge_terms: Vec<f64> = mesh
        .edges()
        .par_iter()
        .zip(w.par_iter())
        .map(|(&[a, b], &wij)| wij * (field[a].0 - field[b].0).norm_squared())
        .collect();
    let total = edge_terms.iter().sum();
    let per_vertex = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|v| mesh.neighbors(v).iter().map(|&(_, e)| 0.5 * edge_terms[e]).sum())
        .collect();
    (total, per_vertex)
}

/// Unweighted guidance energy over targeted vertices.
pub fn guidance_energy(frames: &[VertexFrame], targets: &[Option<LambdaTarget>]) -> f64 {
    frames
        .iter()
        .zip(targets)
        .filter_map(|(f, t)| t.as_ref().map(|t| (f, t)))
        .map(|(f, t)| {
            (0..3)
                .filter(|&c| t.mask[c])
                .map(|c| t.weight * (f.lambda[c] - t.value[c]).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Unweighted fidelity energy `sum ||f_i - f_in_i||^2`.
pub fn distortion_energy(field: &[OdecoVec], reference: &[OdecoVec]) -> f64 {
    field.iter().zip(reference).map(|(a, b)| (a.0 - b.0).norm_squared()).sum()
}

/// Energy without a gradient.
pub fn evaluate(mesh: &TetMesh, frames: &[VertexFrame], penalty: Penalty<'_>) -> EnergyBreakdown {
    let field = realize(frames);
    breakdown(mesh, frames, &field, penalty)
}

fn breakdown(mesh: &TetMesh, frames: &[VertexFrame], field: &[OdecoVec], penalty: Penalty<'_>) -> EnergyBreakdown {
    let (smoothness, per_vertex_smoothness) = smoothness_energy(mesh, field);
    let penalty_value = match penalty {
        Penalty::None => 0.0,
        Penalty::Guidance { targets, .. } => guidance_energy(frames, targets),
        Penalty::Fidelity { reference, .. } => distortion_energy(field, reference),
    };
    let weight = penalty.weight();
    EnergyBreakdown {
        total: smoothness + weight * penalty_value,
        smoothness,
        penalty: penalty_value,
        weight,
        per_vertex_smoothness,
    }
}

/// Total energy and its gradient with respect to the parameters in `layout`.
pub fn total_energy_and_gradient(
    mesh: &TetMesh,
    frames: &[VertexFrame],
    layout: &ParamLayout,
    penalty: Penalty<'_>,
) -> (EnergyBreakdown, Vec<f64>) {
    let t = tables();
    let field = realize(frames);
    let energy = breakdown(mesh, frames, &field, penalty);
    let w = mesh.cotan_weights();

    let local: Vec<[f64; 6]> = (0..frames.len())
        .into_par_iter()
        .map(|v| {
            let frame = &frames[v];
            if frame.class == VertexClass::HardFixed || layout.vertex_range(v).is_empty() {
                return [0.0; 6];
            }
            // dE/df_v
            let mut g = Coeffs::zeros();
            for &(u, e) in mesh.neighbors(v) {
                g += (field[v].0 - field[u].0) * (2.0 * w[e]);
            }
            if let Penalty::Fidelity { reference, kappa } = penalty {
                g += (field[v].0 - reference[v].0) * (2.0 * kappa);
            }
            let mut out = [0.0; 6];
            let canonical = t.canonical(&frame.lambda);
            let lambda_adj = match &frame.axis {
                Some(axis) => {
                    let ez = t.exp_z(frame.theta[2]);
                    let w1 = ez.apply(&canonical);
                    let h = axis.band.apply_transpose(&g);
                    out[2] = h.dot(&(t.lz * w1));
                    ez.apply_transpose(&h)
                }
                None => {
                    let ex = t.exp_x(frame.theta[0]);
                    let ey = t.exp_y(frame.theta[1]);
                    let ez = t.exp_z(frame.theta[2]);
                    let w1 = ez.apply(&canonical);
                    let w2 = ey.apply(&w1);
                    out[0] = g.dot(&(t.lx * ex.apply(&w2)));
                    let h = ex.apply_transpose(&g);
                    out[1] = h.dot(&(t.ly * w2));
                    let h2 = ey.apply_transpose(&h);
                    out[2] = h2.dot(&(t.lz * w1));
                    ez.apply_transpose(&h2)
                }
            };
            let dl = t.stretch.transpose() * lambda_adj;
            out[3..6].copy_from_slice(dl.as_slice());
            if let Penalty::Guidance { targets, psi } = penalty {
                if let Some(target) = &targets[v] {
                    for c in 0..3 {
                        if target.mask[c] {
                            out[3 + c] += 2.0 * psi * target.weight * (frame.lambda[c] - target.value[c]);
                        }
                    }
                }
            }
            out
        })
        .collect();
    (energy, layout.gather(&local))
}
