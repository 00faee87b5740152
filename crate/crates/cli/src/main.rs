//! `gridfem` command-line experiments.
//!
//! Exit codes: 0 when every requested artifact was written, 2 for usage
//! errors, 3 for unreadable or unsuitable input, 4 for numerical failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "gridfem", version = gridfem::version(), about = "Connectivity-aware grid finite elements on triangle meshes")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-level dimensions, component histograms and sparsity of both spaces.
    Info(RunArgs),
    /// Screened-Poisson fit of vertex colors.
    FitColor(RunArgs),
    /// Smallest generalized eigenvalues at one depth.
    Spectrum(RunArgs),
    /// Spectra over several depths against the cotangent reference.
    SweepRes(RunArgs),
    /// Spectra over random rotations of the input.
    SweepRot(RunArgs),
    /// Conformalized mean-curvature flow.
    Flow(RunArgs),
    /// Residual after the multigrid cycles as a function of the coarsest depth.
    Convergence(RunArgs),
    /// Write one of the built-in test models to a mesh file.
    MakeModel(ModelArgs),
}

/// Every option is also a config-file key (dashes become underscores).
/// Flags override values read from `--config`.
#[derive(Args, Default)]
struct RunArgs {
    /// Input mesh (.obj or .ply).
    mesh: Option<PathBuf>,
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Padding of the unit-cube normalization.
    #[arg(long)]
    pad: Option<f64>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    min_depth: Option<u32>,
    /// aware or unaware.
    #[arg(long)]
    mode: Option<String>,
    /// Screening weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Diagonal regularization of the stiffness matrix.
    #[arg(long)]
    epsilon: Option<f64>,
    /// `checkerboard3d <period>`, `ramp` or `constant <r> <g> <b>`.
    #[arg(long)]
    synthetic_texture: Option<String>,
    /// Write the assembled matrices in Matrix Market format.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    dump_matrices: Option<String>,
    /// Cycle shape: v or w.
    #[arg(long)]
    cycle: Option<String>,
    /// Gauss-Seidel sweeps before and after each coarse correction.
    #[arg(long)]
    smooth: Option<usize>,
    /// Cycles per solve in convergence runs.
    #[arg(long)]
    cycles: Option<usize>,
    /// Coarsest-level solver: auto or gs.
    #[arg(long)]
    coarse: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    galerkin: Option<String>,
    /// Prolongation mask: linear or quadratic.
    #[arg(long)]
    mask: Option<String>,
    /// Relative residual target of iterative solves.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Also write the residual-vs-min-depth sweep when fitting colors.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    sweep_min_depth: Option<String>,
    /// Number of eigenvalues.
    #[arg(long)]
    count: Option<usize>,
    /// Comma-separated depths of a resolution sweep.
    #[arg(long)]
    depths: Option<String>,
    /// Midpoint subdivisions of the cotangent reference mesh.
    #[arg(long)]
    refinements: Option<usize>,
    /// Number of random rotations.
    #[arg(long)]
    rotations: Option<usize>,
    /// Flow step size.
    #[arg(long, conflicts_with = "budget_seconds")]
    delta: Option<f64>,
    /// Choose the flow step size so the run fits this many seconds.
    #[arg(long)]
    budget_seconds: Option<f64>,
    #[arg(long)]
    total_time: Option<f64>,
    /// Flow solver: mg or cg.
    #[arg(long)]
    solver: Option<String>,
    /// Write every n-th flow state as a PLY frame.
    #[arg(long)]
    stride: Option<usize>,
    /// Track the flow against the cotangent ground truth.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    ground_truth: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    normalize_area: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        let s = |v: &Option<String>| v.clone();
        put("mesh", self.mesh.as_ref().map(|p| p.display().to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("pad", self.pad.map(|v| v.to_string()));
        put("depth", self.depth.map(|v| v.to_string()));
        put("min_depth", self.min_depth.map(|v| v.to_string()));
        put("mode", s(&self.mode));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("epsilon", self.epsilon.map(|v| v.to_string()));
        put("synthetic_texture", s(&self.synthetic_texture));
        put("dump_matrices", s(&self.dump_matrices));
        put("cycle", s(&self.cycle));
        put("smooth", self.smooth.map(|v| v.to_string()));
        put("cycles", self.cycles.map(|v| v.to_string()));
        put("coarse", s(&self.coarse));
        put("galerkin", s(&self.galerkin));
        put("mask", s(&self.mask));
        put("tolerance", self.tolerance.map(|v| v.to_string()));
        put("max_iterations", self.max_iterations.map(|v| v.to_string()));
        put("sweep_min_depth", s(&self.sweep_min_depth));
        put("count", self.count.map(|v| v.to_string()));
        put("depths", s(&self.depths));
        put("refinements", self.refinements.map(|v| v.to_string()));
        put("rotations", self.rotations.map(|v| v.to_string()));
        put("delta", self.delta.map(|v| v.to_string()));
        put("budget_seconds", self.budget_seconds.map(|v| v.to_string()));
        put("total_time", self.total_time.map(|v| v.to_string()));
        put("solver", s(&self.solver));
        put("stride", self.stride.map(|v| v.to_string()));
        put("ground_truth", s(&self.ground_truth));
        put("normalize_area", s(&self.normalize_area));
        // a step size on the command line replaces a budget from the file and vice versa
        if self.delta.is_some() {
            out.push(("budget_seconds", "none".into()));
        }
        if self.budget_seconds.is_some() {
            out.push(("delta", "none".into()));
        }
        out
    }

    fn resolve(&self) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (k, v) in self.overrides() {
            cfg.set(k, &v)?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ModelArgs {
    /// icosphere, blob, cube, cube-lattice, two-sheets, curved-sheet,
    /// two-hemispheres, sphere-lattice, torus or square.
    name: String,
    /// Output mesh path (.obj or .ply).
    output: PathBuf,
    /// Cubes or spheres per axis, or grid cells per side.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    subdivisions: Option<usize>,
    /// Separation between parts.
    #[arg(long)]
    gap: Option<f64>,
    /// Center spacing of the sphere lattice.
    #[arg(long)]
    spacing: Option<f64>,
    /// Texture baked into the vertex colors.
    #[arg(long)]
    synthetic_texture: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::MakeModel(args) => commands::make_model(args),
        Command::Info(a)
        | Command::FitColor(a)
        | Command::Spectrum(a)
        | Command::SweepRes(a)
        | Command::SweepRot(a)
        | Command::Flow(a)
        | Command::Convergence(a) => match a.resolve() {
            Err(e) => Err(commands::Failure::Usage(e)),
            Ok(cfg) => match &cli.command {
                Command::Info(_) => commands::info(&cfg),
                Command::FitColor(_) => commands::fit_color(&cfg),
                Command::Spectrum(_) => commands::spectrum(&cfg),
                Command::SweepRes(_) => commands::sweep_res(&cfg),
                Command::SweepRot(_) => commands::sweep_rot(&cfg),
                Command::Flow(_) => commands::flow(&cfg),
                Command::Convergence(_) => commands::convergence(&cfg),
                Command::MakeModel(_) => unreachable!(),
            },
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("gridfem: {f}");
            ExitCode::from(f.code())
        }
    }
}
