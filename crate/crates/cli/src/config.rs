//! Resolved run configuration and its flat `key=value` file format.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Keys use underscores. Command-line flags are applied on top of
//! the file, so the file only has to hold what differs from the defaults.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gridfem::flow::FlowSolver;
use gridfem::mesh::DEFAULT_PAD;
use gridfem::output::Header;
use gridfem::solver::{CoarseSolver, CycleShape, MaskKind};
use gridfem::texture::Texture;
use gridfem::Mode;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub pad: f64,
    pub depth: u32,
    pub min_depth: u32,
    pub mode: Mode,
    pub alpha: f64,
    pub epsilon: f64,
    pub synthetic_texture: Option<Texture>,
    pub dump_matrices: bool,

    pub cycle: CycleShape,
    pub smooth: usize,
    pub cycles: usize,
    pub coarse: CoarseSolver,
    pub galerkin: bool,
    pub mask: MaskKind,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub sweep_min_depth: bool,

    pub count: usize,
    pub depths: Vec<u32>,
    pub refinements: usize,
    pub rotations: usize,

    pub delta: Option<f64>,
    pub budget_seconds: Option<f64>,
    pub total_time: f64,
    pub solver: FlowSolver,
    pub stride: usize,
    pub ground_truth: bool,
    pub normalize_area: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: None,
            out: PathBuf::from("out"),
            seed: 1,
            pad: DEFAULT_PAD,
            depth: 5,
            min_depth: 0,
            mode: Mode::Aware,
            alpha: 0.01,
            epsilon: 0.0,
            synthetic_texture: None,
            dump_matrices: false,
            cycle: CycleShape::W,
            smooth: 10,
            cycles: 1,
            coarse: CoarseSolver::Auto,
            galerkin: false,
            mask: MaskKind::Linear,
            tolerance: 1e-10,
            max_iterations: 1000,
            sweep_min_depth: false,
            count: 30,
            depths: vec![3, 4, 5, 6],
            refinements: 2,
            rotations: 5,
            delta: None,
            budget_seconds: None,
            total_time: 10.0,
            solver: FlowSolver::Multigrid,
            stride: 1,
            ground_truth: false,
            normalize_area: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value.trim().parse::<T>().map_err(|e| format!("bad value '{value}' for {key}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("bad value '{value}' for {key}: expected true or false")),
    }
}

/// Empty or `none` clears an optional value.
fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, String>
where
    T::Err: Display,
{
    match value.trim() {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn show_opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_else(|| "none".into())
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        match k {
            "mesh" => self.mesh = parse_opt(k, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "seed" => self.seed = parse(k, value)?,
            "pad" => self.pad = parse(k, value)?,
            "depth" => self.depth = parse(k, value)?,
            "min_depth" => self.min_depth = parse(k, value)?,
            "mode" => self.mode = parse(k, value)?,
            "alpha" => self.alpha = parse(k, value)?,
            "epsilon" => self.epsilon = parse(k, value)?,
            "synthetic_texture" => self.synthetic_texture = parse_opt(k, value)?,
            "dump_matrices" => self.dump_matrices = parse_bool(k, value)?,
            "cycle" => self.cycle = parse(k, value)?,
            "smooth" => self.smooth = parse(k, value)?,
            "cycles" => self.cycles = parse(k, value)?,
            "coarse" => self.coarse = parse(k, value)?,
            "galerkin" => self.galerkin = parse_bool(k, value)?,
            "mask" => self.mask = parse(k, value)?,
            "tolerance" => self.tolerance = parse(k, value)?,
            "max_iterations" => self.max_iterations = parse(k, value)?,
            "sweep_min_depth" => self.sweep_min_depth = parse_bool(k, value)?,
            "count" => self.count = parse(k, value)?,
            "depths" => {
                self.depths = value
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(k, s))
                    .collect::<Result<_, _>>()?
            }
            "refinements" => self.refinements = parse(k, value)?,
            "rotations" => self.rotations = parse(k, value)?,
            "delta" => self.delta = parse_opt(k, value)?,
            "budget_seconds" => self.budget_seconds = parse_opt(k, value)?,
            "total_time" => self.total_time = parse(k, value)?,
            "solver" => self.solver = parse(k, value)?,
            "stride" => self.stride = parse(k, value)?,
            "ground_truth" => self.ground_truth = parse_bool(k, value)?,
            "normalize_area" => self.normalize_area = parse_bool(k, value)?,
            _ => return Err(format!("unknown config key '{k}'")),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            self.set(k, v).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        self.apply_text(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let depths: Vec<String> = self.depths.iter().map(|d| d.to_string()).collect();
        vec![
            ("mesh", self.mesh.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into())),
            ("out", self.out.display().to_string()),
            ("seed", self.seed.to_string()),
            ("pad", self.pad.to_string()),
            ("depth", self.depth.to_string()),
            ("min_depth", self.min_depth.to_string()),
            ("mode", self.mode.to_string()),
            ("alpha", self.alpha.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("synthetic_texture", show_opt(&self.synthetic_texture)),
            ("dump_matrices", self.dump_matrices.to_string()),
            ("cycle", self.cycle.to_string()),
            ("smooth", self.smooth.to_string()),
            ("cycles", self.cycles.to_string()),
            ("coarse", self.coarse.to_string()),
            ("galerkin", self.galerkin.to_string()),
            ("mask", self.mask.to_string()),
            ("tolerance", self.tolerance.to_string()),
            ("max_iterations", self.max_iterations.to_string()),
            ("sweep_min_depth", self.sweep_min_depth.to_string()),
            ("count", self.count.to_string()),
            ("depths", depths.join(",")),
            ("refinements", self.refinements.to_string()),
            ("rotations", self.rotations.to_string()),
            ("delta", show_opt(&self.delta)),
            ("budget_seconds", show_opt(&self.budget_seconds)),
            ("total_time", self.total_time.to_string()),
            ("solver", self.solver.to_string()),
            ("stride", self.stride.to_string()),
            ("ground_truth", self.ground_truth.to_string()),
            ("normalize_area", self.normalize_area.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Header comments for artifacts. The output directory is left out so
    /// reruns into different directories produce identical files.
    pub fn header(&self, command: &str) -> Header {
        let mut h = Header::new().with("command", command);
        for (k, v) in self.pairs().into_iter().filter(|(k, _)| *k != "out") {
            h.push(k, v);
        }
        h
    }
}
