use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridfem::analysis::{
    fit_colors, min_depth_sweep, grid_spectrum, random_rotation, reference_spectrum, relative_spread, resolution_sweep, rotation_sweep,
    SpectrumOptions,
};
use gridfem::assembly::{assemble, color_channels, load_vectors, screened_rhs};
use gridfem::components::{ComponentTable, FunctionSpace};
use gridfem::embedding::FragmentForest;
use gridfem::flow::{cotan_trajectory, plan, run_flow, FlowConfig, GridFlow, Schedule};
use gridfem::geometry::Vec3;
use gridfem::mesh::io::{load_mesh, save_mesh, write_ply_ascii};
use gridfem::mesh::{normalize, NormalizationTransform, TriangleMesh};
use gridfem::output::{self, num, Header};
use gridfem::solver::{residual, screened_hierarchy, MultigridOptions};
use gridfem::sparse::{norm2, CsrMatrix};
use gridfem::texture::Texture;
use gridfem::{models, Error, Mode};

use crate::config::RunConfig;
use crate::ModelArgs;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Input(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else if matches!(e, Error::InvalidArgument(_)) {
            Failure::Usage(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn load(cfg: &RunConfig) -> Result<TriangleMesh, Failure> {
    let path = cfg.mesh.as_ref().ok_or_else(|| Failure::Usage("no mesh given (positional argument or `mesh` config key)".into()))?;
    if cfg.min_depth > cfg.depth {
        return Err(Failure::Usage(format!("min_depth {} exceeds depth {}", cfg.min_depth, cfg.depth)));
    }
    let mesh = load_mesh(path)?;
    Ok(match cfg.synthetic_texture {
        Some(t) => t.apply(&mesh),
        None => mesh,
    })
}

fn multigrid(cfg: &RunConfig) -> MultigridOptions {
    MultigridOptions { shape: cfg.cycle, smooth: cfg.smooth, coarse: cfg.coarse, galerkin: cfg.galerkin, mask: cfg.mask }
}

fn spectrum_options(cfg: &RunConfig, seed: u64) -> SpectrumOptions {
    SpectrumOptions { count: cfg.count, seed, ..Default::default() }
}

/// Starts a run: creates the output directory and records the resolved config.
fn begin(cfg: &RunConfig, command: &str) -> Result<Header, Failure> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Failure::Input(format!("cannot create {}: {e}", cfg.out.display())))?;
    output::write(cfg.out.join("config.txt"), &cfg.to_text())?;
    Ok(cfg.header(command))
}

fn write(cfg: &RunConfig, name: &str, contents: &str) -> Outcome {
    let path = cfg.out.join(name);
    output::write(&path, contents)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_ply(path: &Path, mesh: &TriangleMesh, header: &Header) -> Outcome {
    let comments: Vec<String> =
        std::iter::once(format!("version={}", gridfem::version())).chain(header.entries().iter().map(|(k, v)| format!("{k}={v}"))).collect();
    output::write(path, &write_ply_ascii(mesh, &comments))?;
    Ok(())
}

fn dump_matrix(cfg: &RunConfig, name: &str, m: &CsrMatrix) -> Outcome {
    let path = cfg.out.join(name);
    let mut buf = Vec::new();
    m.write_matrix_market(&mut buf).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    output::write(&path, std::str::from_utf8(&buf).expect("matrix market is ASCII"))?;
    Ok(())
}

pub fn info(cfg: &RunConfig) -> Outcome {
    let (mesh, _) = normalize(&load(cfg)?, cfg.pad)?;
    let header = begin(cfg, "info")?;
    let forest = FragmentForest::build(&mesh, cfg.min_depth, cfg.depth)?;
    let tables = ComponentTable::build_all(&mesh, &forest);
    println!("vertices {} faces {}", mesh.vertex_count(), mesh.face_count());
    println!("{:>5} {:>8} {:>9} {:>10} {:>8}", "depth", "mode", "dim", "nnz", "nnz/row");
    let mut rows = Vec::new();
    for mode in [Mode::Aware, Mode::Unaware] {
        let space = FunctionSpace::from_tables(&tables, cfg.min_depth, mode);
        for depth in cfg.min_depth..=cfg.depth {
            let basis = space.level(depth);
            let sys = assemble(&mesh, forest.level(depth), basis, 0.0);
            let nnz = sys.stiffness.nnz();
            let avg = nnz as f64 / basis.dim().max(1) as f64;
            println!("{depth:>5} {mode:>8} {:>9} {nnz:>10} {avg:>8.2}", basis.dim());
            rows.push([depth.to_string(), mode.to_string(), basis.dim().to_string(), nnz.to_string(), num(avg)]);
            if cfg.dump_matrices && depth == cfg.depth {
                dump_matrix(cfg, &format!("stiffness_{mode}.mtx"), &sys.stiffness)?;
                dump_matrix(cfg, &format!("mass_{mode}.mtx"), &sys.mass)?;
            }
        }
    }
    write(cfg, "info.csv", &output::csv(&header, &["depth", "mode", "dim", "nnz", "avg_nnz_per_row"], rows)?)?;
    let mut hist = Vec::new();
    for (depth, table) in (cfg.min_depth..).zip(&tables) {
        for (components, corners) in table.component_histogram() {
            hist.push([depth.to_string(), components.to_string(), corners.to_string()]);
        }
    }
    write(cfg, "components.csv", &output::csv(&header, &["depth", "components_per_corner", "corners"], hist)?)
}

pub fn fit_color(cfg: &RunConfig) -> Outcome {
    let raw = load(cfg)?;
    let header = begin(cfg, "fit-color")?;
    let (mesh, _) = normalize(&raw, cfg.pad)?;
    let forest = FragmentForest::build(&mesh, cfg.min_depth, cfg.depth)?;
    let start = Instant::now();
    let fit = fit_colors(&mesh, &forest, cfg.mode, cfg.alpha, cfg.epsilon, multigrid(cfg), cfg.max_iterations, cfg.tolerance)?;
    log::info!("fit in {:.2}s", start.elapsed().as_secs_f64());
    for (c, h) in fit.history.iter().enumerate() {
        if let Some(&last) = h.last() {
            if last > cfg.tolerance {
                log::warn!("channel {c} stopped at relative residual {last:e}");
            }
        }
    }
    let rows = fit.history.iter().enumerate().flat_map(|(c, h)| {
        h.iter().enumerate().map(move |(i, r)| [c.to_string(), (i + 1).to_string(), num(*r)])
    });
    write(cfg, "residual.csv", &output::csv(&header, &["channel", "iteration", "relative_residual"], rows)?)?;
    let mut colored = raw.clone();
    colored.colors = Some(fit.colors);
    write_ply(&cfg.out.join("fit.ply"), &colored, &header)?;
    if cfg.sweep_min_depth {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let rows = min_depth_sweep(&mesh, &forest, cfg.mode, cfg.alpha, multigrid(cfg), cfg.cycles, rng.gen())?;
        write(cfg, "convergence.csv", &output::convergence_csv(&header, &rows)?)?;
    }
    if cfg.dump_matrices {
        let space = FunctionSpace::new(&mesh, &forest, cfg.mode);
        let sys = assemble(&mesh, forest.level(cfg.depth), space.level(cfg.depth), cfg.epsilon);
        dump_matrix(cfg, "stiffness.mtx", &sys.stiffness)?;
        dump_matrix(cfg, "mass.mtx", &sys.mass)?;
    }
    Ok(())
}

pub fn convergence(cfg: &RunConfig) -> Outcome {
    let (mesh, _) = normalize(&load(cfg)?, cfg.pad)?;
    let header = begin(cfg, "convergence")?;
    let channels = color_channels(&mesh)?;
    let forest = FragmentForest::build(&mesh, cfg.min_depth, cfg.depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sweep_seed: u64 = rng.gen();
    let history_seed: u64 = rng.gen();
    let mut rows = Vec::new();
    let mut history = Vec::new();
    for mode in [Mode::Aware, Mode::Unaware] {
        rows.extend(min_depth_sweep(&mesh, &forest, mode, cfg.alpha, multigrid(cfg), cfg.cycles, sweep_seed)?);

        // per-level residuals of every cycle at the configured coarsest depth
        let space = FunctionSpace::new(&mesh, &forest, mode);
        let (hierarchy, _) = screened_hierarchy(&mesh, &forest, &space, cfg.alpha, cfg.epsilon, multigrid(cfg))?;
        let (level, basis) = (forest.level(cfg.depth), space.level(cfg.depth));
        let mut guess = ChaCha8Rng::seed_from_u64(history_seed);
        for (c, values) in channels.iter().enumerate() {
            let (f, s) = load_vectors(&mesh, level, basis, values);
            let rhs = screened_rhs(&f, &s, cfg.alpha);
            let mut u: Vec<f64> = (0..basis.dim()).map(|_| guess.gen::<f64>()).collect();
            let initial = norm2(&residual(hierarchy.finest(), &u, &rhs));
            history.push([mode.to_string(), c.to_string(), "0".into(), cfg.depth.to_string(), num(initial)]);
            for cycle in 1..=cfg.cycles {
                for visit in hierarchy.cycle(&mut u, &rhs, cfg.min_depth) {
                    history.push([mode.to_string(), c.to_string(), cycle.to_string(), visit.depth.to_string(), num(visit.after)]);
                }
            }
        }
    }
    write(cfg, "convergence.csv", &output::convergence_csv(&header, &rows)?)?;
    write(cfg, "history.csv", &output::csv(&header, &["mode", "channel", "cycle", "level", "residual"], history)?)
}

pub fn spectrum(cfg: &RunConfig) -> Outcome {
    let mesh = load(cfg)?;
    let header = begin(cfg, "spectrum")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let opts = spectrum_options(cfg, rng.gen());
    let s = grid_spectrum(&mesh, cfg.depth, cfg.mode, cfg.pad, &opts)?;
    if !s.converged {
        log::warn!("eigensolver stopped before all {} pairs converged", cfg.count);
    }
    let key = cfg.depth.to_string();
    write(cfg, "spectrum.csv", &output::spectra_csv(&header, "depth", [(key, &s)])?)?;
    if cfg.ground_truth {
        let r = reference_spectrum(&mesh, cfg.refinements, &opts)?;
        write(cfg, "reference.csv", &output::spectra_csv(&header, "depth", [("reference".to_string(), &r)])?)?;
    }
    if cfg.dump_matrices {
        let (normalized, _) = normalize(&mesh, cfg.pad)?;
        let forest = FragmentForest::build(&normalized, cfg.depth, cfg.depth)?;
        let space = FunctionSpace::new(&normalized, &forest, cfg.mode);
        let sys = assemble(&normalized, forest.level(cfg.depth), space.level(cfg.depth), cfg.epsilon);
        dump_matrix(cfg, "stiffness.mtx", &sys.stiffness)?;
        dump_matrix(cfg, "mass.mtx", &sys.mass)?;
    }
    Ok(())
}

pub fn sweep_res(cfg: &RunConfig) -> Outcome {
    let mesh = load(cfg)?;
    let header = begin(cfg, "sweep-res")?;
    if cfg.depths.is_empty() {
        return Err(Failure::Usage("depths is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let opts = spectrum_options(cfg, rng.gen());
    let reference = reference_spectrum(&mesh, cfg.refinements, &opts)?;
    let rows = resolution_sweep(&mesh, &cfg.depths, cfg.mode, cfg.pad, &reference, &opts)?;
    let mode = cfg.mode;
    write(cfg, "reference.csv", &output::spectra_csv(&header, "depth", [("reference".to_string(), &reference)])?)?;
    let spectra = rows.iter().map(|r| (r.depth.to_string(), &r.spectrum));
    write(cfg, &format!("spectra_{mode}.csv"), &output::spectra_csv(&header, "depth", spectra)?)?;
    write(cfg, &format!("deviation_{mode}.csv"), &output::deviation_csv(&header, &rows)?)
}

pub fn sweep_rot(cfg: &RunConfig) -> Outcome {
    let mesh = load(cfg)?;
    let header = begin(cfg, "sweep-rot")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let opts = spectrum_options(cfg, rng.gen());
    let rotations: Vec<_> = (0..cfg.rotations).map(|_| random_rotation(&mut rng)).collect();
    let spectra = rotation_sweep(&mesh, &rotations, cfg.depth, cfg.mode, cfg.pad, &opts)?;
    let mode = cfg.mode;
    let labeled = spectra.iter().enumerate().map(|(i, s)| ((i + 1).to_string(), s));
    write(cfg, &format!("rotations_{mode}.csv"), &output::spectra_csv(&header, "rotation", labeled)?)?;
    let spread = relative_spread(&spectra);
    let rows = spread.iter().enumerate().map(|(i, s)| [(i + 1).to_string(), num(*s)]);
    write(cfg, &format!("spread_{mode}.csv"), &output::csv(&header, &["index", "relative_spread"], rows)?)
}

fn world(positions: &[Vec3], xf: &NormalizationTransform) -> Vec<Vec3> {
    positions.iter().map(|p| xf.inverse(p)).collect()
}

pub fn flow(cfg: &RunConfig) -> Outcome {
    let raw = load(cfg)?;
    let (mesh, xf) = normalize(&raw, cfg.pad)?;
    let schedule = match (cfg.delta, cfg.budget_seconds) {
        (Some(delta), None) if delta > 0.0 => Schedule::Fixed { delta, total_time: cfg.total_time },
        (None, Some(seconds)) if seconds > 0.0 => Schedule::Budget { seconds, total_time: cfg.total_time },
        (None, None) => return Err(Failure::Usage("flow needs --delta or --budget-seconds".into())),
        (Some(_), Some(_)) => return Err(Failure::Usage("give either delta or budget_seconds, not both".into())),
        _ => return Err(Failure::Usage("delta and budget_seconds must be positive".into())),
    };
    let header = begin(cfg, "flow")?;
    let config = FlowConfig {
        depth: cfg.depth,
        min_depth: cfg.min_depth,
        mode: cfg.mode,
        solver: cfg.solver,
        multigrid: multigrid(cfg),
        tolerance: cfg.tolerance,
        max_iterations: cfg.max_iterations,
        normalize_area: cfg.normalize_area,
    };
    let mut flow = GridFlow::new(&mesh, config)?;
    let (steps, delta) = plan(&mut flow, schedule)?;
    log::info!("{steps} steps of {delta}");
    let truth = if cfg.ground_truth { Some(cotan_trajectory(&mesh, delta, steps, cfg.normalize_area)?) } else { None };
    let fixed = Schedule::Fixed { delta, total_time: delta * steps as f64 };
    let run = run_flow(&mut flow, fixed, truth.as_deref(), cfg.stride)?;
    let mut header = header;
    header.push("resolved_steps", steps);
    header.push("resolved_delta", num(delta));
    write(cfg, "metrics.csv", &output::flow_metrics_csv(&header, &run)?)?;
    write(cfg, "timing.csv", &output::flow_timing_csv(&header, &run)?)?;
    let frames = cfg.out.join("frames");
    for (step, positions) in &run.trajectory {
        let mut m = raw.clone();
        m.vertices = world(positions, &xf);
        write_ply(&frames.join(format!("step_{step:05}.ply")), &m, &header)?;
    }
    let drift = run.metrics.iter().map(|r| r.centroid_drift).fold(0.0, f64::max);
    log::info!("largest centroid drift {drift:e} (normalized units)");
    Ok(())
}

pub fn make_model(args: &ModelArgs) -> Outcome {
    let n = args.n;
    let sub = args.subdivisions;
    let gap = args.gap;
    let mesh = match args.name.as_str() {
        "icosphere" => models::icosphere(sub.unwrap_or(4)),
        "blob" => models::blob(sub.unwrap_or(4)),
        "cube" => models::cube(Vec3::zeros(), 1.0),
        "cube-lattice" => models::cube_lattice(n.unwrap_or(3), gap.unwrap_or(1.0)),
        "two-sheets" => models::two_sheets(n.unwrap_or(32), gap.unwrap_or(0.04)),
        "curved-sheet" => models::curved_sheet(n.unwrap_or(32)),
        "two-hemispheres" => models::two_hemispheres(sub.unwrap_or(4), gap.unwrap_or(0.03)),
        "sphere-lattice" => models::sphere_lattice(n.unwrap_or(2), sub.unwrap_or(2), args.spacing.unwrap_or(3.0)),
        "torus" => models::torus(n.unwrap_or(48), n.unwrap_or(48) / 2, 1.0, 0.3),
        "square" => models::square(n.unwrap_or(8)),
        other => return Err(Failure::Usage(format!("unknown model '{other}'"))),
    };
    let mesh = match &args.synthetic_texture {
        Some(t) => t.parse::<Texture>()?.apply(&mesh),
        None => mesh,
    };
    save_mesh(&mesh, &args.output)?;
    Ok(())
}

