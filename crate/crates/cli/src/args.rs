use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use odeco::export::GlyphStyle;
use odeco::guidance::{GuidanceDomain, ValueMap};
use odeco::solver::SolverConfig;

#[derive(Debug, Parser)]
#[command(name = "odeco", version, about = "Design and smooth odeco tensor fields on tetrahedral meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design a field from guidance: diffusion, orientation warm start, joint optimization.
    Optimize(OptimizeArgs),
    /// Smooth a noisy symmetric tensor field under a fidelity penalty.
    Smooth(SmoothArgs),
    /// Run the numerical checks of the shape-conformity theory.
    Check(CheckArgs),
    /// Boundary conformity and energy statistics of a saved field.
    Report(ReportArgs),
    /// Export glyph geometry of a saved field as OBJ.
    Glyphs(GlyphArgs),
    /// Trace major-lobe integral curves of a saved field as OBJ polylines.
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Sparse,
    All,
}

impl From<DomainArg> for GuidanceDomain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Sparse => GuidanceDomain::Sparse,
            DomainArg::All => GuidanceDomain::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ValueMapArg {
    Identity,
    LogClamp,
}

impl From<ValueMapArg> for ValueMap {
    fn from(v: ValueMapArg) -> Self {
        match v {
            ValueMapArg::Identity => ValueMap::Identity,
            ValueMapArg::LogClamp => ValueMap::LogClamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StyleArg {
    Cuboid,
    Ellipsoid,
}

impl From<StyleArg> for GlyphStyle {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::Cuboid => GlyphStyle::Cuboid,
            StyleArg::Ellipsoid => GlyphStyle::Ellipsoid,
        }
    }
}

/// Solver parameters shared by `optimize` and `smooth`.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Weight of the stretch guidance penalty.
    #[arg(long, default_value_t = 50.0)]
    pub psi: f64,
    /// Weight of the fidelity penalty (smoothing).
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    /// Bound of the adaptive perturbation.
    #[arg(long, default_value_t = 0.15)]
    pub epsilon: f64,
    /// Relative energy decrease ending one trial.
    #[arg(long, default_value_t = 1e-3)]
    pub trial_tol: f64,
    /// Relative energy decrease ending the final solve.
    #[arg(long, default_value_t = 1e-8)]
    pub final_tol: f64,
    /// Non-improving trials before a stage stops.
    #[arg(long, default_value_t = 5)]
    pub stagnation: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stretch-ratio range used by derived guidance, as LO,HI.
    #[arg(long, value_parser = parse_pair, default_value = "1,50")]
    pub clamp: (f64, f64),
    /// Diffusion time in units of squared mean edge length.
    #[arg(long, default_value_t = 10.0)]
    pub diffusion_time: f64,
    /// Where the stretch penalty applies (default: the guidance file's choice, else sparse).
    #[arg(long, value_enum)]
    pub guidance_domain: Option<DomainArg>,
    /// Start from uniformly random orientations instead of the warm start.
    #[arg(long)]
    pub cold_start: bool,
}

impl SolverArgs {
    pub fn config(&self, file_domain: GuidanceDomain) -> SolverConfig {
        SolverConfig {
            psi: self.psi,
            kappa: self.kappa,
            epsilon: self.epsilon,
            trial_tol: self.trial_tol,
            final_tol: self.final_tol,
            stagnation_trials: self.stagnation,
            rng_seed: self.seed,
            lambda_clamp: self.clamp,
            diffusion_time: self.diffusion_time,
            guidance_domain: self.guidance_domain.map_or(file_domain, Into::into),
            cold_start: self.cold_start,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output field archive (legacy VTK).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Output report (JSON); printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Tetrahedral mesh (.vtk or TetGen .node/.ele).
    pub mesh: PathBuf,
    /// Guidance file (JSON).
    #[arg(long)]
    pub guidance: Option<PathBuf>,
    /// Add stretch targets from principal curvatures at unguided boundary vertices.
    #[arg(long)]
    pub curvature_guidance: bool,
    /// Pin the normal stretch ratio of curvature targets.
    #[arg(long, requires = "curvature_guidance")]
    pub curvature_lambda_z: Option<f64>,
    /// Dihedral angle (degrees) above which edges are sharp features.
    #[arg(long)]
    pub feature_angle: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    /// Tetrahedral mesh (.vtk or TetGen .node/.ele).
    pub mesh: PathBuf,
    /// Legacy VTK file with a 9-component symmetric tensor point array.
    #[arg(long)]
    pub field: PathBuf,
    /// Name of the tensor array (default: the only 9-component array).
    #[arg(long)]
    pub field_array: Option<String>,
    /// How eigenvalues become stretch ratios.
    #[arg(long, value_enum, default_value = "identity")]
    pub value_map: ValueMapArg,
    /// Guidance file whose locks and hard constraints apply during smoothing.
    #[arg(long)]
    pub guidance: Option<PathBuf>,
    /// Dihedral angle (degrees) above which edges are sharp features.
    #[arg(long)]
    pub feature_angle: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Print the outcomes as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Field archive written by `optimize` or `smooth`.
    pub field: PathBuf,
    #[arg(long, default_value_t = odeco::mesh::DEFAULT_FEATURE_ANGLE_DEG)]
    pub feature_angle: f64,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GlyphArgs {
    /// Field archive written by `optimize` or `smooth`.
    pub field: PathBuf,
    /// Output OBJ file.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Keep every n-th vertex.
    #[arg(long, default_value_t = 1)]
    pub subsample: usize,
    #[arg(long, value_enum, default_value = "cuboid")]
    pub style: StyleArg,
    /// Largest semi-axis of each glyph (default: half the mean edge length).
    #[arg(long)]
    pub size: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Field archive written by `optimize` or `smooth`.
    pub field: PathBuf,
    /// Output OBJ file.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Number of seed points, sampled uniformly by volume.
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    /// Step length (default: a quarter of the mean edge length).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((parse(lo)?, parse(hi)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_defaults_match_solver_defaults() {
        for sub in ["optimize", "smooth"] {
            let mut argv = vec!["odeco", sub, "mesh.vtk"];
            if sub == "smooth" {
                argv.extend(["--field", "f.vtk"]);
            }
            let cli = Cli::try_parse_from(argv).unwrap();
            let solver = match cli.command {
                Command::Optimize(a) => a.solver,
                Command::Smooth(a) => a.solver,
                _ => unreachable!(),
            };
            assert_eq!(solver.config(GuidanceDomain::default()), SolverConfig::default());
        }
    }

    #[test]
    fn clamp_parses_pair() {
        let cli = Cli::try_parse_from(["odeco", "optimize", "m.vtk", "--clamp", "2,20"]).unwrap();
        let Command::Optimize(a) = cli.command else { unreachable!() };
        assert_eq!(a.solver.config(GuidanceDomain::Sparse).lambda_clamp, (2.0, 20.0));
        assert!(Cli::try_parse_from(["odeco", "optimize", "m.vtk", "--clamp", "2"]).is_err());
    }
}
