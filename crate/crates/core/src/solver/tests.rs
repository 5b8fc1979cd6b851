use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::guidance::{field_guidance, GuidanceOptions, HardTensor, SurfaceInfo, ValueMap};
use crate::mesh::{shapes, DEFAULT_FEATURE_ANGLE_DEG};
use crate::odeco::{rot_z, symmetric_matrix};

fn quiet_config() -> SolverConfig {
    SolverConfig {
        rng_seed: 7,
        ..Default::default()
    }
}

#[test]
fn lbfgs_solves_spd_quadratic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 12;
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = &b * b.transpose() + DMatrix::identity(n, n);
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let opts = LbfgsOptions {
        rel_tol: 1e-300,
        grad_tol: 1e-14,
        max_iters: 50,
        ..Default::default()
    };
    let res = lbfgs_minimize(
        |x| {
            let v = DVector::from_column_slice(x);
            let av = &a * &v;
            (v.dot(&av), (av * 2.0).as_slice().to_vec())
        },
        x0,
        None,
        &opts,
    )
    .unwrap();
    let norm = res.x.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm < 1e-8, "{norm} after {} iterations", res.iterations);
    assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
}

fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
    let (a, b) = (x[0], x[1]);
    let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
    let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
    (f, g)
}

#[test]
fn lbfgs_solves_rosenbrock() {
    let opts = LbfgsOptions {
        rel_tol: 1e-300,
        grad_tol: 1e-12,
        max_iters: 500,
        ..Default::default()
    };
    let res = lbfgs_minimize(rosenbrock, vec![-1.2, 1.0], None, &opts).unwrap();
    assert!(res.value < 1e-10, "{} at {:?}", res.value, res.x);
    assert!((res.x[0] - 1.0).abs() < 1e-4 && (res.x[1] - 1.0).abs() < 1e-4);
    assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn lbfgs_respects_lower_bounds() {
    // Minimum of (x + 1)^2 + (y - 2)^2 over x >= 0.5 is (0.5, 2).
    let f = |x: &[f64]| {
        let v = (x[0] + 1.0).powi(2) + (x[1] - 2.0).powi(2);
        (v, vec![2.0 * (x[0] + 1.0), 2.0 * (x[1] - 2.0)])
    };
    let lower = [0.5, f64::NEG_INFINITY];
    let res = lbfgs_minimize(f, vec![3.0, -4.0], Some(&lower), &LbfgsOptions::default()).unwrap();
    assert!((res.x[0] - 0.5).abs() < 1e-12);
    assert!((res.x[1] - 2.0).abs() < 1e-6);
}

#[test]
fn lbfgs_rejects_non_finite_start() {
    let err = lbfgs_minimize(|_| (f64::NAN, vec![0.0]), vec![1.0], None, &LbfgsOptions::default()).unwrap_err();
    assert_eq!(err.kind(), crate::ErrorKind::Solver);
}

fn sources(list: &[(usize, [f64; 3])]) -> BTreeMap<usize, ([f64; 3], [bool; 3])> {
    list.iter().map(|&(v, l)| (v, (l, [true; 3]))).collect()
}

#[test]
fn single_source_diffuses_to_constant() {
    let mesh = shapes::box_grid([3, 3, 3], [1.0, 1.0, 1.0]);
    let out = diffuse_lambda(&mesh, &sources(&[(5, [3.0, 2.0, 7.0])]), 10.0).unwrap();
    for l in out {
        assert!((l[0] - 3.0).abs() < 1e-8 && (l[1] - 2.0).abs() < 1e-8 && (l[2] - 7.0).abs() < 1e-8);
    }
}

#[test]
fn diffusion_pins_sources_and_obeys_maximum_principle() {
    let mesh = shapes::twisted_bar(8, 3, 0.8);
    let src = sources(&[(0, [1.0, 4.0, 2.0]), (mesh.num_vertices() - 1, [5.0, 1.5, 2.0])]);
    let out = diffuse_lambda(&mesh, &src, 10.0).unwrap();
    for (&v, (l, _)) in &src {
        assert_eq!(out[v], *l);
    }
    for l in &out {
        assert!(l[0] >= 1.0 - 1e-8 && l[0] <= 5.0 + 1e-8);
        assert!(l[1] >= 1.5 - 1e-8 && l[1] <= 4.0 + 1e-8);
        assert!((l[2] - 2.0).abs() < 1e-8);
    }
}

#[test]
fn masked_components_are_not_pinned() {
    let mesh = shapes::box_grid([2, 2, 2], [1.0, 1.0, 1.0]);
    let mut src = BTreeMap::new();
    src.insert(0, ([2.0, 1.0, 0.0], [true, true, false]));
    let out = diffuse_lambda(&mesh, &src, 10.0).unwrap();
    assert!(out.iter().all(|l| l[2] == DEFAULT_LAMBDA));
    assert!(diffuse_lambda(&mesh, &BTreeMap::new(), 10.0).is_err());
}

#[test]
fn perturbation_bounds_follow_energy_ratio() {
    let energies = [0.0, 0.5, 2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let g = perturbation_amount(&energies, 0.15, &mut rng);
        assert!(g[0].abs() <= 0.15);
        assert!(g[1].abs() <= 0.15 * 2.25);
        assert!(g[2].abs() <= 0.6);
    }
    assert_eq!(perturbation_scale(&[0.0, 0.0]), vec![1.0, 1.0]);
}

#[test]
fn perturbation_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| perturbation_amount(&[1.0], 0.15, &mut rng)[0]).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    // Uniform on (-0.6, 0.6): sigma = 0.6 / sqrt(3).
    let sigma_mean = 0.6 / 3f64.sqrt() / (n as f64).sqrt();
    assert!(mean.abs() < 3.0 * sigma_mean, "{mean}");
    let positive = draws.iter().filter(|d| **d > 0.0).count() as f64;
    assert!((positive / n as f64 - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt());
}

fn cube_setup(hard_boundary: bool) -> (TetMesh, ConstraintSet) {
    let mesh = shapes::box_grid([3, 3, 3], [1.0, 1.0, 1.0]);
    let surface = SurfaceInfo::new(&mesh, DEFAULT_FEATURE_ANGLE_DEG).unwrap();
    let mut c = ConstraintSet::defaults(&mesh, &surface, GuidanceOptions::default());
    if hard_boundary {
        for v in 0..mesh.num_vertices() {
            if mesh.is_boundary(v) {
                c.hard_lambda.insert(v, [1.0; 3]);
            }
        }
    }
    (mesh, c)
}

#[test]
fn theta_warm_start_freezes_lambda_and_keeps_best() {
    let (mesh, c) = cube_setup(false);
    for seed in 0..5 {
        let config = SolverConfig {
            rng_seed: seed,
            ..Default::default()
        };
        let lambda = vec![[2.0, 1.0, 1.0]; mesh.num_vertices()];
        let mut aligned = build_frames(&mesh, &c, &lambda, 1e-3).unwrap();
        let mut random = aligned.clone();
        randomize_orientations(&mut random, seed);
        let random_es = evaluate(&mesh, &random, Penalty::None).smoothness;
        let before: Vec<_> = aligned.iter().map(|f| f.lambda).collect();
        let mut records = Vec::new();
        warm_start_theta(&mesh, &mut aligned, Penalty::None, &config, &mut records, &mut Vec::new()).unwrap();
        assert!(aligned.iter().zip(&before).all(|(f, l)| f.lambda == *l));
        assert!(records.windows(2).all(|w| w[1].best_energy <= w[0].best_energy));
        assert!(records.len() <= config.theta_trial_cap);
        let warm_es = evaluate(&mesh, &aligned, Penalty::None).smoothness;
        assert!(warm_es <= random_es, "seed {seed}: {warm_es} vs {random_es}");
    }
}

#[test]
fn cube_with_uniform_hard_guidance_reaches_constant_field() {
    let (mesh, c) = cube_setup(true);
    let (frames, report) = optimize(&mesh, &c, &quiet_config()).unwrap();
    assert!(report.final_energy.normalized_smoothness() < 1e-6, "{}", report.final_energy.normalized_smoothness());
    assert!(report.best_energy_monotone());
    for (v, l) in &c.hard_lambda {
        assert_eq!(frames[*v].lambda, *l);
    }
    let last_joint = report.trials.iter().rev().find(|t| t.stage == Stage::Joint).unwrap();
    assert!(report.final_energy.total <= last_joint.best_energy);
}

#[test]
fn optimize_is_deterministic_and_preserves_hard_constraints() {
    let mesh = shapes::box_grid([2, 2, 3], [1.0, 1.0, 1.5]);
    let surface = SurfaceInfo::new(&mesh, DEFAULT_FEATURE_ANGLE_DEG).unwrap();
    let mut c = ConstraintSet::defaults(&mesh, &surface, GuidanceOptions::default());
    let interior: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| !mesh.is_boundary(v)).collect();
    c.hard_tensor.insert(interior[0], HardTensor { theta: [0.3, 0.1, -0.2], lambda: [3.0, 1.0, 1.0] });
    c.hard_lambda.insert(interior[1], [2.0, 2.0, 1.0]);
    c.soft_lambda.insert(0, LambdaTarget::full([4.0, 1.0, 1.0]));
    let config = quiet_config();
    let (f1, r1) = optimize(&mesh, &c, &config).unwrap();
    let (f2, r2) = optimize(&mesh, &c, &config).unwrap();
    assert_eq!(r1.to_json_deterministic(), r2.to_json_deterministic());
    assert_eq!(f1, f2);
    let hard = &f1[interior[0]];
    assert_eq!(hard.class, VertexClass::HardFixed);
    assert_eq!((hard.theta, hard.lambda), ([0.3, 0.1, -0.2], [3.0, 1.0, 1.0]));
    assert_eq!(f1[interior[1]].lambda, [2.0, 2.0, 1.0]);
    assert!(r1.best_energy_monotone());
    assert!(f1.iter().all(|f| f.lambda.iter().all(|l| *l >= config.lambda_floor)));
    let warm = r1.after_warm_start.unwrap();
    assert!(r1.final_energy.total <= warm.total);
}

#[test]
fn orientation_seeding_leaves_undetermined_frames_alone() {
    let (mesh, c) = cube_setup(false);
    let lambda = vec![[1.5; 3]; mesh.num_vertices()];
    let mut frames = build_frames(&mesh, &c, &lambda, 1e-3).unwrap();
    let before = frames.clone();
    initialize_orientations(&mesh, &mut frames, 10.0, 50).unwrap();
    assert_eq!(frames, before);
    assert_eq!(initialize_orientations(&mesh, &mut frames, 10.0, 0).unwrap(), 0);
}

#[test]
fn orientation_seeding_aligns_cylinder_lobes_with_axis() {
    let mesh = shapes::cylinder(0.5, 2.0, 4, 8);
    let surface = SurfaceInfo::new(&mesh, DEFAULT_FEATURE_ANGLE_DEG).unwrap();
    let c = ConstraintSet::defaults(&mesh, &surface, GuidanceOptions::default());
    let lambda = vec![[2.0, 1.0, 1.0]; mesh.num_vertices()];
    let mut frames = build_frames(&mesh, &c, &lambda, 1e-3).unwrap();
    let side: Vec<usize> = c.normal_locked.iter().filter(|(_, n)| n.z.abs() < 0.5).map(|(v, _)| *v).collect();
    let rounds = initialize_orientations(&mesh, &mut frames, 10.0, 50).unwrap();
    assert!((1..=50).contains(&rounds));
    let axial = side.iter().filter(|&&v| frames[v].rotation3().column(0).z.abs() > 0.95).count();
    assert!(axial * 10 >= side.len() * 9, "{axial} of {}", side.len());
    for (v, n) in &c.normal_locked {
        assert!((frames[*v].rotation3().column(2) - n).norm() < 1e-12);
    }
}

#[test]
fn corner_and_feature_frames_follow_tangents() {
    let (mesh, c) = cube_setup(false);
    let lambda = vec![[1.0, 2.0, 3.0]; mesh.num_vertices()];
    let frames = build_frames(&mesh, &c, &lambda, 1e-3).unwrap();
    for (v, t) in c.feature_locked.iter().chain(&c.corner_locked) {
        let axis = frames[*v].rotation3().column(2).into_owned();
        assert!((axis - t).norm() < 1e-12);
    }
    for v in c.feature_locked.keys() {
        assert_eq!(frames[*v].lambda[2], 3.0);
    }
}

fn noisy_field(n: usize, sigma_deg: f64, lambda_noise: f64, seed: u64) -> (Vec<Matrix3<f64>>, Vec<Matrix3<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = [3.0, 2.0, 1.0];
    let clean = vec![symmetric_matrix(&Matrix3::identity(), base); n];
    let noisy = (0..n)
        .map(|_| {
            let axis = nalgebra::Unit::new_normalize(nalgebra::Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ));
            let angle = sigma_deg.to_radians() * rng.random_range(-1.0..1.0) * 3f64.sqrt();
            let r = nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner();
            let l = base.map(|b| b * (1.0 + lambda_noise * rng.random_range(-1.0..1.0)));
            symmetric_matrix(&r, l)
        })
        .collect();
    (clean, noisy)
}

#[test]
fn smoothing_constant_field_is_fixed_point() {
    let mesh = shapes::box_grid([3, 3, 3], [1.0, 1.0, 1.0]);
    let raw = vec![symmetric_matrix(&rot_z(0.4), [3.0, 2.0, 1.0]); mesh.num_vertices()];
    let init = field_guidance(&raw, ValueMap::Identity, (1.0, 50.0)).unwrap();
    let (_, report) = smooth_field(&mesh, &init, None, &quiet_config()).unwrap();
    let s = report.smoothing.unwrap();
    assert!(s.output_distortion < 1e-10);
    assert!(s.output_smoothness < 1e-10);
}

#[test]
fn smoothing_reduces_noise_energy() {
    let mesh = shapes::box_grid([4, 4, 4], [1.0, 1.0, 1.0]);
    let (clean, noisy) = noisy_field(mesh.num_vertices(), 10.0, 0.2, 5);
    let init = field_guidance(&noisy, ValueMap::Identity, (1.0, 50.0)).unwrap();
    let clean_init = field_guidance(&clean, ValueMap::Identity, (1.0, 50.0)).unwrap();
    let injected = distortion_energy(&clean_init.reference, &init.reference);
    let (_, report) = smooth_field(&mesh, &init, None, &quiet_config()).unwrap();
    let s = report.smoothing.unwrap();
    assert!(s.output_smoothness < s.input_smoothness);
    assert!(s.output_distortion < injected);

    let stiff = SolverConfig {
        kappa: 1e6,
        ..quiet_config()
    };
    let (_, report) = smooth_field(&mesh, &init, None, &stiff).unwrap();
    assert!(report.smoothing.unwrap().output_distortion < 1e-6 * mesh.num_vertices() as f64);
}

#[test]
fn smoothing_with_normal_locks_keeps_boundary_lobes_on_normals() {
    let mesh = shapes::box_grid([3, 3, 3], [1.0, 1.0, 1.0]);
    let surface = SurfaceInfo::new(&mesh, DEFAULT_FEATURE_ANGLE_DEG).unwrap();
    let c = ConstraintSet::defaults(&mesh, &surface, GuidanceOptions::default());
    let (_, noisy) = noisy_field(mesh.num_vertices(), 10.0, 0.2, 8);
    let init = field_guidance(&noisy, ValueMap::Identity, (1.0, 50.0)).unwrap();
    let (frames, _) = smooth_field(&mesh, &init, Some(&c), &quiet_config()).unwrap();
    for (v, n) in &c.normal_locked {
        assert!((frames[*v].rotation3().column(2) - n).norm() < 1e-12);
    }
}

#[test]
fn config_validation() {
    assert!(SolverConfig::default().validate().is_ok());
    assert!(SolverConfig { psi: 0.0, ..Default::default() }.validate().is_err());
    assert!(SolverConfig { epsilon: -1.0, ..Default::default() }.validate().is_err());
    assert!(SolverConfig { stagnation_trials: 0, ..Default::default() }.validate().is_err());
    assert!(SolverConfig { lambda_clamp: (5.0, 1.0), ..Default::default() }.validate().is_err());
}
