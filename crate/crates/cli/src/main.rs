mod args;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use log::info;
use odeco::export::{export_glyphs, trace_integral_curves, FieldArchive, TraceOptions};
use odeco::guidance::{
    curvature_guidance, field_from_vtk, field_guidance, ConstraintSet, GuidanceFile, GuidanceOptions, SurfaceInfo,
};
use odeco::mesh::io::{load_tet_mesh, read_vtk, MeshFormat};
use odeco::mesh::{estimate_curvature, TetMesh, DEFAULT_FEATURE_ANGLE_DEG};
use odeco::solver::{optimize, smooth_field, EnergySummary, SolverReport};
use odeco::theory::{boundary_conformity_report, run_all_checks, ConformityReport};
use odeco::{Error, ErrorKind, Result};
use serde::Serialize;

use args::{CheckArgs, Cli, Command, GlyphArgs, OptimizeArgs, OutputArgs, ReportArgs, SmoothArgs, TraceArgs};

const EXIT_IO: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_CHECK_FAILED: u8 = 1;

fn load_mesh(path: &Path) -> Result<TetMesh> {
    let format = MeshFormat::from_path(path).unwrap_or(MeshFormat::VtkLegacy);
    load_tet_mesh(path, format)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Loads the guidance file (if any) and builds constraints and surface data.
fn constraints_for(
    mesh: &TetMesh,
    guidance: Option<&Path>,
    feature_angle: Option<f64>,
) -> Result<(ConstraintSet, SurfaceInfo, GuidanceFile)> {
    let file = match guidance {
        Some(p) => GuidanceFile::load(p, mesh.num_vertices())?,
        None => GuidanceFile::default(),
    };
    let angle = feature_angle.unwrap_or(if guidance.is_some() {
        file.options.feature_angle
    } else {
        DEFAULT_FEATURE_ANGLE_DEG
    });
    let mut surface = SurfaceInfo::new(mesh, angle)?;
    let constraints = if guidance.is_some() {
        ConstraintSet::from_file(mesh, &mut surface, &file)?
    } else {
        let options = GuidanceOptions {
            feature_angle: angle,
            ..GuidanceOptions::default()
        };
        ConstraintSet::defaults(mesh, &surface, options)
    };
    Ok((constraints, surface, file))
}

fn finish(archive: FieldArchive, report: &SolverReport, output: &OutputArgs) -> Result<()> {
    if let Some(out) = &output.out {
        archive.save(out)?;
        info!("wrote field to {}", out.display());
    }
    write_text(output.report.as_deref(), &report.to_json())
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<()> {
    let mesh = load_mesh(&args.mesh)?;
    let (mut constraints, surface, file) = constraints_for(&mesh, args.guidance.as_deref(), args.feature_angle)?;
    let config = args.solver.config(file.options.guidance_domain);
    config.validate()?;
    if args.curvature_guidance {
        let curvature = estimate_curvature(&mesh, &surface.boundary);
        let boundary = (0..mesh.num_vertices()).filter(|&v| mesh.is_boundary(v));
        let targets = curvature_guidance(&curvature, boundary, config.lambda_clamp, args.curvature_lambda_z);
        let added = constraints.add_soft_targets(targets);
        info!("curvature guidance added {added} stretch targets");
    }
    let (frames, report) = optimize(&mesh, &constraints, &config)?;
    finish(FieldArchive::new(mesh, frames)?, &report, &args.output)
}

fn cmd_smooth(args: &SmoothArgs) -> Result<()> {
    let mesh = load_mesh(&args.mesh)?;
    let data = read_vtk(&args.field)?;
    let raw = field_from_vtk(&data, args.field_array.as_deref())?;
    if raw.len() != mesh.num_vertices() {
        return Err(Error::Invalid(format!(
            "field has {} tensors, mesh has {} vertices",
            raw.len(),
            mesh.num_vertices()
        )));
    }
    let constraints = match &args.guidance {
        Some(g) => Some(constraints_for(&mesh, Some(g), args.feature_angle)?),
        None => None,
    };
    let domain = constraints.as_ref().map(|c| c.2.options.guidance_domain).unwrap_or_default();
    let config = args.solver.config(domain);
    config.validate()?;
    let init = field_guidance(&raw, args.value_map.into(), config.lambda_clamp)?;
    let (frames, report) = smooth_field(&mesh, &init, constraints.as_ref().map(|c| &c.0), &config)?;
    finish(FieldArchive::new(mesh, frames)?, &report, &args.output)
}

fn cmd_check(args: &CheckArgs) -> bool {
    let outcomes = run_all_checks();
    if args.json {
        println!("{}", serde_json::to_string_pretty(&outcomes).expect("outcomes serialize"));
    } else {
        for o in &outcomes {
            println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        }
    }
    outcomes.iter().all(|o| o.passed)
}

#[derive(Serialize)]
struct FieldReport {
    num_vertices: usize,
    num_tets: usize,
    energy: EnergySummary,
    conformity: ConformityReport,
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let archive = FieldArchive::load(&args.field)?;
    let surface = SurfaceInfo::new(&archive.mesh, args.feature_angle)?;
    let curvature = estimate_curvature(&archive.mesh, &surface.boundary);
    let conformity = boundary_conformity_report(&archive.mesh, &archive.frames, &curvature, Some(&surface.features));
    let report = FieldReport {
        num_vertices: archive.mesh.num_vertices(),
        num_tets: archive.mesh.tets().len(),
        energy: EnergySummary::from(&archive.energy()),
        conformity,
    };
    write_text(
        args.out.as_deref(),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )
}

fn cmd_glyphs(args: &GlyphArgs) -> Result<()> {
    let archive = FieldArchive::load(&args.field)?;
    let glyphs = export_glyphs(&archive, args.subsample, args.style.into(), args.size);
    glyphs.write_obj(&args.out)?;
    info!("wrote {} glyphs to {}", glyphs.glyph_count(), args.out.display());
    Ok(())
}

fn cmd_trace(args: &TraceArgs) -> Result<()> {
    let archive = FieldArchive::load(&args.field)?;
    let opts = TraceOptions {
        n_seeds: args.seeds,
        step: args.step.unwrap_or_else(|| 0.25 * archive.mesh.mean_edge_length()),
        max_steps: args.max_steps,
        seed: args.seed,
    };
    let curves = trace_integral_curves(&archive, &opts)?;
    curves.write_obj(&args.out)?;
    info!("wrote {} curves to {}", curves.curves.len(), args.out.display());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Io => EXIT_IO,
        ErrorKind::Validation => EXIT_VALIDATION,
        ErrorKind::Solver => EXIT_SOLVER,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors; usage errors are
            // invalid input.
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Optimize(a) => cmd_optimize(a),
        Command::Smooth(a) => cmd_smooth(a),
        Command::Check(a) => {
            return if cmd_check(a) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Command::Report(a) => cmd_report(a),
        Command::Glyphs(a) => cmd_glyphs(a),
        Command::Trace(a) => cmd_trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
