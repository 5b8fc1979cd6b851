use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::ParamLayout;

/// Per-vertex noise scale `(E_s^i / max E_s^i + 1)^2`. An all-zero energy
/// gives a uniform factor of 1.
pub fn perturbation_scale(per_vertex_energy: &[f64]) -> Vec<f64> {
    let max = per_vertex_energy.iter().copied().fold(0.0f64, f64::max);
    per_vertex_energy
        .iter()
        .map(|&e| {
            let ratio = if max > 0.0 { e / max } else { 0.0 };
            (ratio + 1.0).powi(2)
        })
        .collect()
}

/// One draw of `gamma_i = scale_i * U(-epsilon, epsilon)` per vertex.
pub fn perturbation_amount(per_vertex_energy: &[f64], epsilon: f64, rng: &mut impl Rng) -> Vec<f64> {
    perturbation_scale(per_vertex_energy)
        .into_iter()
        .map(|s| s * uniform(rng, epsilon))
        .collect()
}

fn uniform(rng: &mut impl Rng, epsilon: f64) -> f64 {
    if epsilon > 0.0 {
        rng.random_range(-epsilon..epsilon)
    } else {
        0.0
    }
}

/// Key of an independent random stream: every `(seed, stage, trial)` gets its
/// own ChaCha key, every vertex its own stream within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub stage: u64,
    pub trial: u64,
}

impl StreamKey {
    pub fn rng(&self, vertex: usize) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stage.to_le_bytes());
        key[16..24].copy_from_slice(&self.trial.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(vertex as u64);
        rng
    }
}

/// Adds an independent draw to every free parameter of each vertex, scaled
/// by that vertex's noise factor. Six values are drawn per vertex (one per
/// slot) so a slot's draw does not depend on which other slots are free.
pub fn perturb(x: &mut [f64], layout: &ParamLayout, per_vertex_energy: &[f64], epsilon: f64, key: StreamKey) {
    let scale = perturbation_scale(per_vertex_energy);
    for (v, s) in scale.iter().enumerate() {
        let range = layout.vertex_range(v);
        if range.is_empty() {
            continue;
        }
        let mut rng = key.rng(v);
        let draws: [f64; 6] = std::array::from_fn(|_| uniform(&mut rng, epsilon));
        for i in range {
            x[i] += s * draws[layout.slots()[i].1];
        }
    }
}
