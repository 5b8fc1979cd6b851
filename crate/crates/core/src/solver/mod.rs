//! Optimization pipeline: stretch diffusion, orientation warm start, joint
//! L-BFGS with random perturbation trials, and single-trial field smoothing.

mod diffusion;
mod lbfgs;
mod orient;
mod perturb;

use std::f64::consts::PI;
use std::time::Instant;

use log::{debug, info};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{
    distortion_energy, evaluate, realize, smoothness_energy, total_energy_and_gradient, DofMode, EnergyBreakdown,
    LambdaTarget, ParamLayout, Penalty, VertexClass, VertexFrame,
};
use crate::error::{Error, Result};
use crate::guidance::{ConstraintSet, FieldInit, GuidanceDomain};
use crate::mesh::{TetMesh, Vec3};
use crate::odeco::{euler_matrix, AxisRotation};

pub use diffusion::{diffuse_lambda, DEFAULT_LAMBDA};
pub use orient::initialize_orientations;
pub use lbfgs::{lbfgs_minimize, LbfgsOptions, LbfgsResult, StopReason};
pub use perturb::{perturb, perturbation_amount, perturbation_scale, StreamKey};

/// Solver parameters; defaults follow the published settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Weight of the stretch guidance penalty.
    pub psi: f64,
    /// Weight of the fidelity penalty in smoothing mode.
    pub kappa: f64,
    /// Bound of the uniform perturbation noise.
    pub epsilon: f64,
    /// Relative energy decrease that ends one L-BFGS trial.
    pub trial_tol: f64,
    /// Relative energy decrease for the final solve.
    pub final_tol: f64,
    /// Consecutive non-improving trials before a stage stops.
    pub stagnation_trials: usize,
    pub lbfgs_memory: usize,
    pub max_trial_iters: usize,
    pub final_max_iters: usize,
    pub rng_seed: u64,
    /// Diffusion step in units of squared mean edge length.
    pub diffusion_time: f64,
    /// Rounds of proxy diffusion used to seed orientations before the warm
    /// start; 0 keeps the plain axis-aligned start.
    pub orientation_rounds: usize,
    pub theta_trial_cap: usize,
    pub joint_trial_cap: usize,
    /// Range stretch ratios are mapped or clamped into by guidance.
    pub lambda_clamp: (f64, f64),
    /// Positivity floor for free stretch ratios.
    pub lambda_floor: f64,
    pub guidance_domain: GuidanceDomain,
    /// Skip the orientation warm start and draw orientations uniformly.
    pub cold_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            psi: 50.0,
            kappa: 2.0,
            epsilon: 0.15,
            trial_tol: 1e-3,
            final_tol: 1e-8,
            stagnation_trials: 5,
            lbfgs_memory: 10,
            max_trial_iters: 500,
            final_max_iters: 5000,
            rng_seed: 0,
            diffusion_time: 10.0,
            orientation_rounds: 50,
            theta_trial_cap: 20,
            joint_trial_cap: 100,
            lambda_clamp: (1.0, 50.0),
            lambda_floor: 1e-3,
            guidance_domain: GuidanceDomain::Sparse,
            cold_start: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("psi", self.psi),
            ("kappa", self.kappa),
            ("trial_tol", self.trial_tol),
            ("final_tol", self.final_tol),
            ("diffusion_time", self.diffusion_time),
            ("lambda_floor", self.lambda_floor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Invalid(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        let counts = [
            ("stagnation_trials", self.stagnation_trials),
            ("lbfgs_memory", self.lbfgs_memory),
            ("max_trial_iters", self.max_trial_iters),
            ("final_max_iters", self.final_max_iters),
            ("theta_trial_cap", self.theta_trial_cap),
            ("joint_trial_cap", self.joint_trial_cap),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Invalid(format!("{name} must be at least 1")));
            }
        }
        let (lo, hi) = self.lambda_clamp;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Invalid(format!("invalid stretch clamp range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ThetaWarm,
    Joint,
    Final,
    Smooth,
}

/// One L-BFGS solve (plus the perturbation that produced its start).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub stage: Stage,
    pub trial_index: usize,
    pub energy_before: f64,
    pub energy_after: f64,
    pub best_energy: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Whether the trial started from a perturbed state.
    pub perturbed: bool,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub total: f64,
    pub smoothness: f64,
    pub penalty: f64,
    pub weight: f64,
    pub normalized_smoothness: f64,
}

impl From<&EnergyBreakdown> for EnergySummary {
    fn from(e: &EnergyBreakdown) -> Self {
        Self {
            total: e.total,
            smoothness: e.smoothness,
            penalty: e.penalty,
            weight: e.weight,
            normalized_smoothness: e.normalized_smoothness(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSummary {
    pub input_smoothness: f64,
    pub input_distortion: f64,
    pub output_smoothness: f64,
    pub output_distortion: f64,
}

/// Wall-clock measurements, kept apart from the reproducible content.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub diffusion_seconds: f64,
    pub theta_warm_seconds: f64,
    pub joint_seconds: f64,
    pub trial_seconds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Design,
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub mode: Mode,
    pub seed: u64,
    pub num_vertices: usize,
    pub num_parameters: usize,
    pub config: SolverConfig,
    pub lambda_sources: usize,
    pub trials: Vec<TrialRecord>,
    pub initial: EnergySummary,
    pub after_warm_start: Option<EnergySummary>,
    pub final_energy: EnergyBreakdown,
    pub smoothing: Option<SmoothingSummary>,
    pub timings: Timings,
}

impl SolverReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON without the `timings` field; identical inputs give identical text.
    pub fn to_json_deterministic(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("timings");
        }
        serde_json::to_string_pretty(&value).expect("report serializes")
    }

    /// Best-so-far energies of each stage never increase.
    pub fn best_energy_monotone(&self) -> bool {
        self.trials
            .windows(2)
            .filter(|w| w[0].stage == w[1].stage)
            .all(|w| w[1].best_energy <= w[0].best_energy)
    }
}

const STAGE_COLD: u64 = 1;
const STAGE_THETA: u64 = 2;
const STAGE_JOINT: u64 = 3;

/// Builds per-vertex frames from constraints and an initial stretch field.
pub fn build_frames(mesh: &TetMesh, constraints: &ConstraintSet, lambda: &[[f64; 3]], floor: f64) -> Result<Vec<VertexFrame>> {
    let axis = |v: usize, d: &Vec3| {
        AxisRotation::new(d).map_err(|e| Error::Invalid(format!("vertex {v}: {e}")))
    };
    let sources = constraints.lambda_sources();
    (0..mesh.num_vertices())
        .map(|v| {
            let mut l = lambda[v].map(|x| x.max(floor));
            if let Some(h) = constraints.hard_tensor.get(&v) {
                return Ok(VertexFrame::hard_fixed(h.theta, h.lambda));
            }
            let mut frame = if let Some(t) = constraints.corner_locked.get(&v) {
                VertexFrame::aligned(VertexClass::Corner, axis(v, t)?, 0.0, l)
            } else if let Some(t) = constraints.feature_locked.get(&v) {
                if !sources.contains_key(&v) {
                    // The tangent axis carries the z slot; start with the
                    // largest ratio there.
                    let k = (0..3).max_by(|&a, &b| l[a].total_cmp(&l[b])).unwrap();
                    l.swap(k, 2);
                }
                VertexFrame::aligned(VertexClass::FeatureEdge, axis(v, t)?, 0.0, l)
            } else if let Some(n) = constraints.normal_locked.get(&v) {
                VertexFrame::aligned(VertexClass::Boundary, axis(v, n)?, 0.0, l)
            } else {
                VertexFrame::interior([0.0; 3], l)
            };
            if let Some(h) = constraints.hard_lambda.get(&v) {
                frame.lambda = *h;
                frame.lambda_locked = [true; 3];
            }
            Ok(frame)
        })
        .collect()
}

/// Per-vertex stretch targets for the guidance penalty.
pub fn penalty_targets(
    constraints: &ConstraintSet,
    frames: &[VertexFrame],
    domain: GuidanceDomain,
) -> Vec<Option<LambdaTarget>> {
    frames
        .iter()
        .enumerate()
        .map(|(v, f)| match constraints.soft_lambda.get(&v) {
            Some(t) => Some(*t),
            None if domain == GuidanceDomain::All
                && f.class != VertexClass::HardFixed
                && !f.lambda_locked.iter().all(|l| *l) =>
            {
                Some(LambdaTarget::full(f.lambda))
            }
            None => None,
        })
        .collect()
}

fn lower_bounds(layout: &ParamLayout, floor: f64) -> Vec<f64> {
    (0..layout.len())
        .map(|i| if layout.is_lambda(i) { floor } else { f64::NEG_INFINITY })
        .collect()
}

/// Repeats {L-BFGS, perturb the best state} until `stagnation_trials`
/// consecutive trials fail to improve or `cap` trials ran; leaves the best
/// state in `frames`.
#[allow(clippy::too_many_arguments)]
fn run_trials(
    mesh: &TetMesh,
    frames: &mut [VertexFrame],
    layout: &ParamLayout,
    penalty: Penalty<'_>,
    config: &SolverConfig,
    stage: Stage,
    cap: usize,
    records: &mut Vec<TrialRecord>,
    trial_seconds: &mut Vec<f64>,
) -> Result<f64> {
    let lower = lower_bounds(layout, config.lambda_floor);
    let opts = LbfgsOptions {
        memory: config.lbfgs_memory,
        rel_tol: config.trial_tol,
        max_iters: config.max_trial_iters,
        ..Default::default()
    };
    let stage_id = match stage {
        Stage::ThetaWarm => STAGE_THETA,
        _ => STAGE_JOINT,
    };
    let mut work = frames.to_vec();
    let mut best_x = layout.pack(frames);
    let mut best_e = evaluate(mesh, frames, penalty).total;
    let mut start = best_x.clone();
    let mut stagnant = 0;
    for trial in 0..cap {
        let clock = Instant::now();
        let result = lbfgs_minimize(
            |x| {
                layout.unpack(x, &mut work);
                let (e, g) = total_energy_and_gradient(mesh, &work, layout, penalty);
                (e.total, g)
            },
            start,
            Some(&lower),
            &opts,
        )?;
        let improved = result.value < best_e - 1e-12 * best_e.abs();
        if improved {
            best_e = result.value;
            best_x = result.x.clone();
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        records.push(TrialRecord {
            stage,
            trial_index: trial,
            energy_before: result.history[0],
            energy_after: result.value,
            best_energy: best_e,
            iterations: result.iterations,
            evaluations: result.evaluations,
            perturbed: trial > 0,
            stop: result.stop,
        });
        trial_seconds.push(clock.elapsed().as_secs_f64());
        debug!("{stage:?} trial {trial}: {:.6e} -> {:.6e} (best {best_e:.6e})", result.history[0], result.value);
        if stagnant >= config.stagnation_trials || trial + 1 >= cap {
            break;
        }
        layout.unpack(&best_x, &mut work);
        let per_vertex = evaluate(mesh, &work, penalty).per_vertex_smoothness;
        start = best_x.clone();
        let key = StreamKey {
            seed: config.rng_seed,
            stage: stage_id,
            trial: trial as u64,
        };
        perturb(&mut start, layout, &per_vertex, config.epsilon, key);
        for (x, lo) in start.iter_mut().zip(&lower) {
            *x = x.max(*lo);
        }
    }
    layout.unpack(&best_x, frames);
    Ok(best_e)
}

/// Orientation warm start with stretch frozen.
pub fn warm_start_theta(
    mesh: &TetMesh,
    frames: &mut [VertexFrame],
    penalty: Penalty<'_>,
    config: &SolverConfig,
    records: &mut Vec<TrialRecord>,
    trial_seconds: &mut Vec<f64>,
) -> Result<f64> {
    let layout = ParamLayout::new(frames, DofMode::ThetaOnly);
    run_trials(
        mesh,
        frames,
        &layout,
        penalty,
        config,
        Stage::ThetaWarm,
        config.theta_trial_cap,
        records,
        trial_seconds,
    )
}

/// Joint trials over every free parameter, then one tight solve from the
/// best state.
pub fn joint_optimize(
    mesh: &TetMesh,
    frames: &mut [VertexFrame],
    penalty: Penalty<'_>,
    config: &SolverConfig,
    records: &mut Vec<TrialRecord>,
    trial_seconds: &mut Vec<f64>,
) -> Result<EnergyBreakdown> {
    let layout = ParamLayout::new(frames, DofMode::All);
    let best = run_trials(
        mesh,
        frames,
        &layout,
        penalty,
        config,
        Stage::Joint,
        config.joint_trial_cap,
        records,
        trial_seconds,
    )?;
    final_solve(mesh, frames, &layout, penalty, config, Stage::Final, best, records, trial_seconds)
}

#[allow(clippy::too_many_arguments)]
fn final_solve(
    mesh: &TetMesh,
    frames: &mut [VertexFrame],
    layout: &ParamLayout,
    penalty: Penalty<'_>,
    config: &SolverConfig,
    stage: Stage,
    best_before: f64,
    records: &mut Vec<TrialRecord>,
    trial_seconds: &mut Vec<f64>,
) -> Result<EnergyBreakdown> {
    let clock = Instant::now();
    let lower = lower_bounds(layout, config.lambda_floor);
    let opts = LbfgsOptions {
        memory: config.lbfgs_memory,
        rel_tol: config.final_tol,
        max_iters: config.final_max_iters,
        ..Default::default()
    };
    let mut work = frames.to_vec();
    let result = lbfgs_minimize(
        |x| {
            layout.unpack(x, &mut work);
            let (e, g) = total_energy_and_gradient(mesh, &work, layout, penalty);
            (e.total, g)
        },
        layout.pack(frames),
        Some(&lower),
        &opts,
    )?;
    layout.unpack(&result.x, frames);
    records.push(TrialRecord {
        stage,
        trial_index: 0,
        energy_before: result.history[0],
        energy_after: result.value,
        best_energy: result.value.min(best_before),
        iterations: result.iterations,
        evaluations: result.evaluations,
        perturbed: false,
        stop: result.stop,
    });
    trial_seconds.push(clock.elapsed().as_secs_f64());
    Ok(evaluate(mesh, frames, penalty))
}

/// Uniform orientations in `[-pi, pi]` for every free angle.
pub fn randomize_orientations(frames: &mut [VertexFrame], seed: u64) {
    let key = StreamKey {
        seed,
        stage: STAGE_COLD,
        trial: 0,
    };
    for (v, f) in frames.iter_mut().enumerate() {
        let mut rng = key.rng(v);
        for &k in f.class.theta_slots() {
            f.theta[k] = rng.random_range(-PI..PI);
        }
    }
}

/// Full design pipeline: diffusion, orientation warm start (or cold start),
/// joint optimization.
pub fn optimize(mesh: &TetMesh, constraints: &ConstraintSet, config: &SolverConfig) -> Result<(Vec<VertexFrame>, SolverReport)> {
    config.validate()?;
    let clock = Instant::now();
    let mut timings = Timings::default();

    let sources = constraints.lambda_sources();
    let lambda = if sources.is_empty() {
        vec![[DEFAULT_LAMBDA; 3]; mesh.num_vertices()]
    } else {
        diffuse_lambda(mesh, &sources, config.diffusion_time)?
    };
    timings.diffusion_seconds = clock.elapsed().as_secs_f64();

    let mut frames = build_frames(mesh, constraints, &lambda, config.lambda_floor)?;
    let targets = penalty_targets(constraints, &frames, config.guidance_domain);
    let penalty = Penalty::Guidance {
        targets: &targets,
        psi: config.psi,
    };
    let mut records = Vec::new();

    if config.cold_start {
        randomize_orientations(&mut frames, config.rng_seed);
    }
    let initial = EnergySummary::from(&evaluate(mesh, &frames, penalty));

    let warm_clock = Instant::now();
    let after_warm_start = if config.cold_start {
        None
    } else {
        let rounds = initialize_orientations(mesh, &mut frames, config.diffusion_time, config.orientation_rounds)?;
        debug!("orientation seeding settled after {rounds} rounds");
        warm_start_theta(mesh, &mut frames, penalty, config, &mut records, &mut timings.trial_seconds)?;
        Some(EnergySummary::from(&evaluate(mesh, &frames, penalty)))
    };
    timings.theta_warm_seconds = warm_clock.elapsed().as_secs_f64();

    let joint_clock = Instant::now();
    let final_energy = joint_optimize(mesh, &mut frames, penalty, config, &mut records, &mut timings.trial_seconds)?;
    timings.joint_seconds = joint_clock.elapsed().as_secs_f64();
    timings.total_seconds = clock.elapsed().as_secs_f64();
    info!(
        "optimized {} vertices: E_T {:.6e}, normalized E_s {:.3e}, {} trials",
        mesh.num_vertices(),
        final_energy.total,
        final_energy.normalized_smoothness(),
        records.len()
    );

    let report = SolverReport {
        mode: Mode::Design,
        seed: config.rng_seed,
        num_vertices: mesh.num_vertices(),
        num_parameters: ParamLayout::new(&frames, DofMode::All).len(),
        config: config.clone(),
        lambda_sources: sources.len(),
        trials: records,
        initial,
        after_warm_start,
        final_energy,
        smoothing: None,
        timings,
    };
    Ok((frames, report))
}

/// Frames matching `(theta, lambda)` as closely as the vertex's lock allows:
/// interior vertices reproduce it exactly; locked vertices put the lobe
/// nearest the lock axis on z and keep the remaining in-plane orientation.
fn projected_frame(theta: [f64; 3], lambda: [f64; 3], lock: Option<(VertexClass, &Vec3)>) -> Result<VertexFrame> {
    let Some((class, dir)) = lock else {
        return Ok(VertexFrame::interior(theta, lambda));
    };
    let axis = AxisRotation::new(dir)?;
    let local = axis.matrix3.transpose() * euler_matrix(theta);
    let k = (0..3).max_by(|&a, &b| local[(2, a)].abs().total_cmp(&local[(2, b)].abs())).unwrap();
    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
    let theta_z = local[(1, i)].atan2(local[(0, i)]);
    Ok(VertexFrame::aligned(class, axis, theta_z, [lambda[i], lambda[j], lambda[k]]))
}

/// Smooths an input field: initializes from it and runs one L-BFGS solve of
/// `E_s + kappa E_dis` at the final tolerance.
pub fn smooth_field(
    mesh: &TetMesh,
    init: &FieldInit,
    constraints: Option<&ConstraintSet>,
    config: &SolverConfig,
) -> Result<(Vec<VertexFrame>, SolverReport)> {
    config.validate()?;
    if init.theta.len() != mesh.num_vertices() {
        return Err(Error::Invalid(format!(
            "field has {} entries, mesh has {} vertices",
            init.theta.len(),
            mesh.num_vertices()
        )));
    }
    let clock = Instant::now();
    let mut frames = (0..mesh.num_vertices())
        .map(|v| {
            let (theta, lambda) = (init.theta[v], init.lambda[v].map(|l| l.max(config.lambda_floor)));
            let Some(c) = constraints else {
                return projected_frame(theta, lambda, None);
            };
            if let Some(h) = c.hard_tensor.get(&v) {
                return Ok(VertexFrame::hard_fixed(h.theta, h.lambda));
            }
            let lock = c
                .corner_locked
                .get(&v)
                .map(|t| (VertexClass::Corner, t))
                .or_else(|| c.feature_locked.get(&v).map(|t| (VertexClass::FeatureEdge, t)))
                .or_else(|| c.normal_locked.get(&v).map(|n| (VertexClass::Boundary, n)));
            projected_frame(theta, lambda, lock)
        })
        .collect::<Result<Vec<_>>>()?;

    let penalty = Penalty::Fidelity {
        reference: &init.reference,
        kappa: config.kappa,
    };
    let input_smoothness = smoothness_energy(mesh, &init.reference).0;
    let start = evaluate(mesh, &frames, penalty);
    let layout = ParamLayout::new(&frames, DofMode::All);
    let mut records = Vec::new();
    let mut timings = Timings::default();
    let final_energy = final_solve(
        mesh,
        &mut frames,
        &layout,
        penalty,
        config,
        Stage::Smooth,
        start.total,
        &mut records,
        &mut timings.trial_seconds,
    )?;
    timings.total_seconds = clock.elapsed().as_secs_f64();
    timings.joint_seconds = timings.total_seconds;
    let field = realize(&frames);
    let smoothing = SmoothingSummary {
        input_smoothness,
        input_distortion: start.penalty,
        output_smoothness: final_energy.smoothness,
        output_distortion: distortion_energy(&field, &init.reference),
    };
    info!(
        "smoothed {} vertices: E_s {:.6e} -> {:.6e}, E_dis {:.6e}",
        mesh.num_vertices(),
        smoothing.input_smoothness,
        smoothing.output_smoothness,
        smoothing.output_distortion
    );
    let report = SolverReport {
        mode: Mode::Smooth,
        seed: config.rng_seed,
        num_vertices: mesh.num_vertices(),
        num_parameters: layout.len(),
        config: config.clone(),
        lambda_sources: 0,
        trials: records,
        initial: EnergySummary::from(&start),
        after_warm_start: None,
        final_energy,
        smoothing: Some(smoothing),
        timings,
    };
    Ok((frames, report))
}

#[cfg(test)]
mod tests;
