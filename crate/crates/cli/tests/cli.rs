use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use odeco::mesh::io::{write_vtk, ArrayKind, PointArray};
use odeco::mesh::{shapes, TetMesh};
use odeco::odeco::{euler_matrix, symmetric_matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn odeco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odeco"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_mesh(dir: &Path, name: &str, mesh: &TetMesh, arrays: &[PointArray]) -> PathBuf {
    let p = dir.join(name);
    write_vtk(&p, mesh, "test mesh", arrays).unwrap();
    p
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

#[test]
fn cube_with_empty_guidance_converges() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_mesh(dir.path(), "cube.vtk", &shapes::box_grid([2, 2, 2], [1.0; 3]), &[]);
    let guidance = dir.path().join("g.json");
    std::fs::write(&guidance, r#"{"version": 1}"#).unwrap();
    let field = dir.path().join("field.vtk");
    let out = odeco(&["optimize", path_str(&mesh), "--guidance", path_str(&guidance), "--out", path_str(&field)]);
    let r = report(&out);
    let es = r["final_energy"]["smoothness"].as_f64().unwrap() / r["num_vertices"].as_f64().unwrap();
    assert!(es < 1e-6, "normalized E_s {es}");
    assert!(field.exists());

    // The saved field feeds the downstream commands.
    let rep = dir.path().join("report.json");
    assert!(odeco(&["report", path_str(&field), "--out", path_str(&rep)]).status.success());
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(rep["num_vertices"], 27);
    let glyphs = dir.path().join("glyphs.obj");
    assert!(odeco(&["glyphs", path_str(&field), "--out", path_str(&glyphs), "--subsample", "2"])
        .status
        .success());
    let text = std::fs::read_to_string(&glyphs).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 14 * 6);
}

#[test]
fn missing_mesh_is_io_error() {
    let out = odeco(&["optimize", "/nonexistent/mesh.vtk"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_of_range_guidance_vertex_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_mesh(dir.path(), "cube.vtk", &shapes::cube_five_tets(), &[]);
    let guidance = dir.path().join("g.json");
    std::fs::write(&guidance, r#"{"version": 1, "soft_lambda": [{"vertex": 99, "lambda": [2, 1, 1]}]}"#).unwrap();
    let out = odeco(&["optimize", path_str(&mesh), "--guidance", path_str(&guidance)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("99"));
}

#[test]
fn bad_flag_value_is_validation_error() {
    assert_eq!(odeco(&["optimize", "x.vtk", "--psi", "abc"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_mesh(dir.path(), "cube.vtk", &shapes::cube_five_tets(), &[]);
    assert_eq!(odeco(&["optimize", path_str(&mesh), "--epsilon", "-1"]).status.code(), Some(3));
}

fn without_timings(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn optimize_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_mesh(dir.path(), "bar.vtk", &shapes::twisted_bar(6, 2, 0.8), &[]);
    let guidance = dir.path().join("g.json");
    std::fs::write(&guidance, r#"{"version": 1, "soft_lambda": [{"vertex": 0, "lambda": [3, 1, 1]}]}"#).unwrap();
    let run = |name: &str| {
        let field = dir.path().join(name);
        let out = odeco(&[
            "optimize",
            path_str(&mesh),
            "--guidance",
            path_str(&guidance),
            "--seed",
            "7",
            "--out",
            path_str(&field),
        ]);
        (without_timings(report(&out)), std::fs::read(field).unwrap())
    };
    let (r1, f1) = run("a.vtk");
    let (r2, f2) = run("b.vtk");
    assert_eq!(r1, r2);
    assert!(f1 == f2, "field files differ");
}

/// Constant field plus orientation and stretch noise on a small grid.
fn noisy_field(mesh: &TetMesh, sigma_deg: f64, lambda_noise: f64, seed: u64) -> PointArray {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = sigma_deg.to_radians();
    let mut values = Vec::new();
    for _ in 0..mesh.num_vertices() {
        let theta = [0.3, 0.2, 0.1].map(|t: f64| t + sigma * (rng.random::<f64>() * 2.0 - 1.0));
        let lambda = [3.0, 2.0, 1.0].map(|l: f64| l * (1.0 + lambda_noise * (rng.random::<f64>() * 2.0 - 1.0)));
        let m = symmetric_matrix(&euler_matrix(theta), lambda);
        values.extend(m.transpose().iter());
    }
    PointArray::new("tensor", ArrayKind::Tensors, 9, values)
}

#[test]
fn smoothing_kappa_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let grid = shapes::box_grid([5, 5, 5], [1.0; 3]);
    let field = noisy_field(&grid, 10.0, 0.2, 4);
    let mesh = write_mesh(dir.path(), "noisy.vtk", &grid, &[field]);
    let mut last = f64::INFINITY;
    for kappa in ["1", "2", "4"] {
        let out = odeco(&["smooth", path_str(&mesh), "--field", path_str(&mesh), "--kappa", kappa]);
        let s = report(&out)["smoothing"].clone();
        let (es_in, es_out) = (s["input_smoothness"].as_f64().unwrap(), s["output_smoothness"].as_f64().unwrap());
        let dis = s["output_distortion"].as_f64().unwrap();
        assert!(es_out < es_in, "kappa {kappa}: {es_out} >= {es_in}");
        assert!(dis <= last * (1.0 + 1e-9), "kappa {kappa}: {dis} > {last}");
        last = dis;
    }
}

#[test]
fn smoothing_constant_field_is_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let grid = shapes::box_grid([3, 3, 3], [1.0; 3]);
    let field = noisy_field(&grid, 0.0, 0.0, 0);
    let mesh = write_mesh(dir.path(), "const.vtk", &grid, std::slice::from_ref(&field));
    let out_path = dir.path().join("out.vtk");
    let out = odeco(&["smooth", path_str(&mesh), "--field", path_str(&mesh), "--out", path_str(&out_path)]);
    report(&out);
    let data = odeco::mesh::io::read_vtk(&out_path).unwrap();
    let glyph = &data.point_data["glyph"];
    let worst = glyph
        .values
        .iter()
        .zip(&field.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn trace_writes_polylines() {
    let dir = tempfile::tempdir().unwrap();
    let grid = shapes::box_grid([3, 3, 3], [1.0; 3]);
    let field = noisy_field(&grid, 0.0, 0.0, 0);
    let mesh = write_mesh(dir.path(), "const.vtk", &grid, &[field]);
    let archive = dir.path().join("field.vtk");
    report(&odeco(&["smooth", path_str(&mesh), "--field", path_str(&mesh), "--out", path_str(&archive)]));
    let curves = dir.path().join("curves.obj");
    let out = odeco(&["trace", path_str(&archive), "--out", path_str(&curves), "--seeds", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&curves).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("l ")).count(), 10);
}

#[test]
fn check_passes() {
    let out = odeco(&["check"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 5 && text.lines().all(|l| l.starts_with("PASS")), "{text}");
}
