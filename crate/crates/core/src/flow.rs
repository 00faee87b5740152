//! Conformalized mean-curvature flow on grid-based function spaces.
//!
//! Coordinates are expanded in the basis and advanced with the semi-implicit
//! step `(M_t + δ/2 L_0) u_{t+δ} = M_t u_t`. `L_0` is the stiffness of the
//! input surface; `M_t` keeps the input quadrature points and scales each
//! triangle's measure by its evolved/original area ratio, so the basis and
//! the multigrid hierarchy never change.

use std::time::Instant;

use crate::assembly::{evaluation_matrix, load_vectors, vertex_samples, Assembler};
use crate::components::FunctionSpace;
use crate::embedding::FragmentForest;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::cotan::cotan_operator;
use crate::mesh::{connected_components, TriangleMesh};
use crate::solver::{conjugate_gradient, prolongations, Hierarchy, MultigridOptions};
use crate::sparse::{dot, CsrMatrix};
use crate::Mode;

/// Evolved triangles with a smaller area ratio contribute no mass.
pub const MIN_AREA_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowSolver {
    #[default]
    Multigrid,
    Cg,
}

impl std::str::FromStr for FlowSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mg" | "multigrid" => Ok(FlowSolver::Multigrid),
            "cg" => Ok(FlowSolver::Cg),
            other => Err(Error::InvalidArgument(format!("unknown solver '{other}' (expected mg or cg)"))),
        }
    }
}

impl std::fmt::Display for FlowSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FlowSolver::Multigrid => "mg",
            FlowSolver::Cg => "cg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub depth: u32,
    pub min_depth: u32,
    pub mode: Mode,
    pub solver: FlowSolver,
    pub multigrid: MultigridOptions,
    /// Relative residual at which a step's solve stops.
    pub tolerance: f64,
    /// Iteration cap per coordinate solve. Multigrid iterations are
    /// conjugate-gradient steps preconditioned by one cycle each.
    pub max_iterations: usize,
    /// Rescale each connected component to its initial area about its
    /// mass-weighted centroid after each step.
    pub normalize_area: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            depth: 6,
            min_depth: 0,
            mode: Mode::Aware,
            solver: FlowSolver::Multigrid,
            multigrid: MultigridOptions::default(),
            tolerance: 1e-10,
            max_iterations: 10_000,
            normalize_area: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub step: usize,
    pub time: f64,
    /// Basis coefficients of the x, y and z coordinate functions.
    pub coefficients: [Vec<f64>; 3],
    pub positions: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub delta: f64,
    pub solve_seconds: f64,
    /// Largest relative residual over the three coordinate solves.
    pub residual: f64,
    /// Change of the mass-weighted centroid across the solve.
    pub centroid_drift: f64,
    pub degenerate_faces: usize,
}

/// Grid-based flow over a mesh normalized into the unit cube.
pub struct GridFlow {
    mesh: TriangleMesh,
    config: FlowConfig,
    assemblers: Vec<Assembler>,
    prolongations: Vec<CsrMatrix>,
    evaluation: CsrMatrix,
    /// Vertices without an incident face keep their input position.
    isolated: Vec<usize>,
    original_area: Vec<f64>,
    face_component: Vec<u32>,
    component_area: Vec<f64>,
    /// Component carrying most of each basis function's mass. Aware bases
    /// live on a single component; unaware ones may straddle several.
    basis_component: Vec<u32>,
    initial: FlowState,
    state: FlowState,
}

impl GridFlow {
    pub fn new(mesh: &TriangleMesh, config: FlowConfig) -> Result<Self> {
        if config.min_depth > config.depth {
            return Err(Error::InvalidArgument(format!("min_depth {} exceeds depth {}", config.min_depth, config.depth)));
        }
        let forest = FragmentForest::build(mesh, config.min_depth, config.depth)?;
        let space = FunctionSpace::new(mesh, &forest, config.mode);
        let assemblers: Vec<Assembler> = space
            .levels()
            .iter()
            .zip(config.min_depth..)
            .map(|(b, d)| Assembler::new(mesh, forest.level(d), b))
            .collect();
        let prolongations = if config.solver == FlowSolver::Multigrid {
            prolongations(&space, &forest, config.multigrid.mask)?
        } else {
            Vec::new()
        };
        let (level, basis) = (forest.level(config.depth), space.level(config.depth));
        let samples = vertex_samples(mesh);
        let isolated: Vec<usize> = samples.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(i, _)| i).collect();
        let rows: Vec<(u32, Vec3)> = samples.iter().map(|s| s.unwrap_or((0, Vec3::zeros()))).collect();
        let evaluation = if isolated.is_empty() {
            evaluation_matrix(level, basis, &rows)?
        } else {
            let kept: Vec<(u32, Vec3)> = samples.iter().flatten().copied().collect();
            let e = evaluation_matrix(level, basis, &kept)?;
            // spread the rows of connected vertices back over all vertices
            let mut trip = Vec::new();
            let mut k = 0;
            for (v, s) in samples.iter().enumerate() {
                if s.is_some() {
                    trip.extend(e.row(k).map(|(j, w)| (v, j, w)));
                    k += 1;
                }
            }
            CsrMatrix::from_triplets(mesh.vertex_count(), basis.dim(), trip)
        };
        // L2 projection of the coordinate functions
        let finest = assemblers.last().unwrap();
        let mass = finest.mass();
        let mut coefficients: [Vec<f64>; 3] = Default::default();
        for (c, coeff) in coefficients.iter_mut().enumerate() {
            let values: Vec<f64> = mesh.vertices.iter().map(|p| p[c]).collect();
            let (_, s) = load_vectors(mesh, level, basis, &values);
            let out = conjugate_gradient(mass, &s, None, 1e-13, 20 * basis.dim().max(100), true)?;
            if !out.converged && out.relative_residual > 1e-9 {
                return Err(Error::NoConvergence(format!(
                    "projection of coordinate {c} stopped at relative residual {:e}",
                    out.relative_residual
                )));
            }
            *coeff = out.x;
        }
        let original_area: Vec<f64> = (0..mesh.face_count()).map(|f| mesh.face_area(f)).collect();
        let (face_component, count) = face_components(mesh);
        let component_area = component_sums(&face_component, count, &original_area);
        let basis_component = if count > 1 {
            let mut best = vec![(0u32, f64::NEG_INFINITY); basis.dim()];
            for c in 0..count {
                let weights: Vec<f64> = face_component.iter().map(|&k| if k as usize == c { 1.0 } else { 0.0 }).collect();
                let share = finest.weighted_mass(&weights).mul_vec(&vec![1.0; basis.dim()]);
                for (b, &w) in best.iter_mut().zip(&share) {
                    if w > b.1 {
                        *b = (c as u32, w);
                    }
                }
            }
            best.into_iter().map(|(c, _)| c).collect()
        } else {
            vec![0; basis.dim()]
        };
        let mut flow = Self {
            mesh: mesh.clone(),
            config,
            assemblers,
            prolongations,
            evaluation,
            isolated,
            original_area,
            face_component,
            component_area,
            basis_component,
            initial: FlowState { step: 0, time: 0.0, coefficients, positions: Vec::new() },
            state: FlowState { step: 0, time: 0.0, coefficients: Default::default(), positions: Vec::new() },
        };
        flow.initial.positions = flow.evaluate(&flow.initial.coefficients);
        flow.state = flow.initial.clone();
        Ok(flow)
    }

    /// Back to the projected input surface.
    pub fn reset(&mut self) {
        self.state = self.initial.clone();
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.evaluation.n_cols()
    }

    /// Mesh with the current evolved positions.
    pub fn evolved_mesh(&self) -> TriangleMesh {
        let mut m = self.mesh.clone();
        m.vertices = self.state.positions.clone();
        m
    }

    fn evaluate(&self, u: &[Vec<f64>; 3]) -> Vec<Vec3> {
        let cols: Vec<Vec<f64>> = u.iter().map(|c| self.evaluation.mul_vec(c)).collect();
        let mut out: Vec<Vec3> = (0..self.mesh.vertex_count()).map(|i| Vec3::new(cols[0][i], cols[1][i], cols[2][i])).collect();
        for &i in &self.isolated {
            out[i] = self.mesh.vertices[i];
        }
        out
    }

    fn area_ratios(&self, positions: &[Vec3]) -> (Vec<f64>, usize) {
        let mut degenerate = 0;
        let ratios = self
            .mesh
            .faces
            .iter()
            .zip(&self.original_area)
            .map(|(f, &a0)| {
                let [a, b, c] = f.map(|v| positions[v as usize]);
                let r = if a0 > 0.0 { 0.5 * (b - a).cross(&(c - a)).norm() / a0 } else { 0.0 };
                if r < MIN_AREA_RATIO {
                    degenerate += 1;
                }
                r
            })
            .collect();
        (ratios, degenerate)
    }

    /// Advances the state by `delta`.
    pub fn step(&mut self, delta: f64) -> Result<StepReport> {
        let (ratios, degenerate_faces) = self.area_ratios(&self.state.positions);
        if degenerate_faces > 0 {
            log::warn!("{degenerate_faces} evolved triangles degenerated and carry no mass");
        }
        let masses: Vec<CsrMatrix> = self.assemblers.iter().map(|a| a.weighted_mass(&ratios)).collect();
        let ops: Vec<CsrMatrix> =
            masses.iter().zip(&self.assemblers).map(|(m, a)| m.linear_combination(1.0, a.stiffness(), 0.5 * delta)).collect();
        let mt = masses.last().unwrap();
        let ones = vec![1.0; mt.n_rows()];
        let m1 = mt.mul_vec(&ones);
        let measure = dot(&m1, &ones);
        let centroid = |u: &[Vec<f64>; 3]| Vec3::from_fn(|c, _| dot(&m1, &u[c]) / measure);
        let before = centroid(&self.state.coefficients);

        let start = Instant::now();
        let mut next: [Vec<f64>; 3] = Default::default();
        let mut worst = 0.0f64;
        let hierarchy = match self.config.solver {
            FlowSolver::Multigrid => Some(Hierarchy::new(ops.clone(), self.prolongations.clone(), self.config.min_depth, self.config.multigrid)?),
            FlowSolver::Cg => None,
        };
        let a = ops.last().unwrap();
        for c in 0..3 {
            let u = &self.state.coefficients[c];
            let rhs = mt.mul_vec(u);
            let (x, rel) = match &hierarchy {
                Some(h) => {
                    let mut x = u.clone();
                    let hist = h.pcg(&mut x, &rhs, self.config.min_depth, self.config.max_iterations, self.config.tolerance)?;
                    (x, hist.last().copied().unwrap_or(0.0))
                }
                None => {
                    let out = conjugate_gradient(a, &rhs, Some(u), self.config.tolerance, self.config.max_iterations, true)?;
                    (out.x, out.relative_residual)
                }
            };
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("flow coefficients at step {}", self.state.step + 1)));
            }
            worst = worst.max(rel);
            next[c] = x;
        }
        let solve_seconds = start.elapsed().as_secs_f64();
        let after = centroid(&next);
        let centroid_drift = (after - before).norm();

        let mut positions = self.evaluate(&next);
        if self.config.normalize_area {
            let (r, _) = self.area_ratios(&positions);
            let areas: Vec<f64> = r.iter().zip(&self.original_area).map(|(r, a)| r * a).collect();
            let areas = component_sums(&self.face_component, self.component_area.len(), &areas);
            let k = areas.len();
            let mut weight = vec![0.0; k];
            let mut moment = vec![Vec3::zeros(); k];
            for (b, &c) in self.basis_component.iter().enumerate() {
                weight[c as usize] += m1[b];
                moment[c as usize] += Vec3::new(next[0][b], next[1][b], next[2][b]) * m1[b];
            }
            let frames: Vec<Option<(Vec3, f64)>> = (0..k)
                .map(|c| {
                    (areas[c] > 0.0 && weight[c] > 0.0)
                        .then(|| (moment[c] / weight[c], (self.component_area[c] / areas[c]).sqrt()))
                })
                .collect();
            // partition of unity: shifting every coefficient of a component
            // shifts the function there
            for (b, &c) in self.basis_component.iter().enumerate() {
                if let Some((center, s)) = frames[c as usize] {
                    for (i, coeff) in next.iter_mut().enumerate() {
                        coeff[b] = center[i] + s * (coeff[b] - center[i]);
                    }
                }
            }
            positions = self.evaluate(&next);
        }
        self.state = FlowState { step: self.state.step + 1, time: self.state.time + delta, coefficients: next, positions };
        Ok(StepReport { delta, solve_seconds, residual: worst, centroid_drift, degenerate_faces })
    }
}

/// The same flow discretized with linear elements on the mesh itself.
pub struct CotanFlow {
    mesh: TriangleMesh,
    stiffness: CsrMatrix,
    face_component: Vec<u32>,
    vertex_component: Vec<u32>,
    component_area: Vec<f64>,
    normalize_area: bool,
    tolerance: f64,
    pub step: usize,
    pub time: f64,
}

impl CotanFlow {
    pub fn new(mesh: &TriangleMesh, normalize_area: bool, tolerance: f64) -> Self {
        let (face_component, count) = face_components(mesh);
        let areas: Vec<f64> = (0..mesh.face_count()).map(|f| mesh.face_area(f)).collect();
        let mut vertex_component = vec![u32::MAX; mesh.vertex_count()];
        for (f, &c) in mesh.faces.iter().zip(&face_component) {
            f.iter().for_each(|&v| vertex_component[v as usize] = c);
        }
        Self {
            stiffness: cotan_operator(mesh).stiffness,
            component_area: component_sums(&face_component, count, &areas),
            face_component,
            vertex_component,
            mesh: mesh.clone(),
            normalize_area,
            tolerance,
            step: 0,
            time: 0.0,
        }
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.mesh.vertices
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn step(&mut self, delta: f64) -> Result<()> {
        let mt = cotan_operator(&self.mesh).mass;
        let a = mt.linear_combination(1.0, &self.stiffness, 0.5 * delta);
        let n = self.mesh.vertex_count();
        let m1 = mt.mul_vec(&vec![1.0; n]);
        let mut next = vec![Vec3::zeros(); n];
        for c in 0..3 {
            let u: Vec<f64> = self.mesh.vertices.iter().map(|p| p[c]).collect();
            let rhs = mt.mul_vec(&u);
            let out = conjugate_gradient(&a, &rhs, Some(&u), self.tolerance, 50 * n.max(100), true)?;
            if out.relative_residual > 100.0 * self.tolerance {
                return Err(Error::NoConvergence(format!("cotangent flow step {} coordinate {c}", self.step + 1)));
            }
            next.iter_mut().zip(&out.x).for_each(|(p, v)| p[c] = *v);
        }
        // unreferenced vertices have no mass and stay where they were
        for (v, p) in next.iter_mut().enumerate() {
            if self.vertex_component[v] == u32::MAX {
                *p = self.mesh.vertices[v];
            }
        }
        self.mesh.vertices = next;
        if self.normalize_area {
            let k = self.component_area.len();
            let areas: Vec<f64> = (0..self.mesh.face_count()).map(|f| self.mesh.face_area(f)).collect();
            let areas = component_sums(&self.face_component, k, &areas);
            let mut weight = vec![0.0; k];
            let mut moment = vec![Vec3::zeros(); k];
            for (v, &c) in self.vertex_component.iter().enumerate() {
                if c != u32::MAX {
                    weight[c as usize] += m1[v];
                    moment[c as usize] += self.mesh.vertices[v] * m1[v];
                }
            }
            for (v, &c) in self.vertex_component.iter().enumerate() {
                let c = c as usize;
                if c < k && areas[c] > 0.0 && weight[c] > 0.0 {
                    let center = moment[c] / weight[c];
                    let s = (self.component_area[c] / areas[c]).sqrt();
                    let p = &mut self.mesh.vertices[v];
                    *p = center + (*p - center) * s;
                }
            }
        }
        self.step += 1;
        self.time += delta;
        Ok(())
    }
}

fn face_components(mesh: &TriangleMesh) -> (Vec<u32>, usize) {
    let comps = connected_components(mesh);
    let mut labels = vec![0u32; mesh.face_count()];
    for (c, faces) in comps.iter().enumerate() {
        faces.iter().for_each(|&f| labels[f as usize] = c as u32);
    }
    (labels, comps.len())
}

fn component_sums(labels: &[u32], count: usize, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; count];
    labels.iter().zip(values).for_each(|(&c, v)| out[c as usize] += v);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Fixed { delta: f64, total_time: f64 },
    /// Fit as many equal steps into `total_time` as one probe step's wall
    /// clock allows within `seconds`.
    Budget { seconds: f64, total_time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    pub time: f64,
    /// `√Σ‖v - w‖²` against the ground truth, when one is given.
    pub rms: Option<f64>,
    pub rms_per_vertex: Option<f64>,
    pub sphericity: f64,
    pub centroid_drift: f64,
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub delta: f64,
    /// One row per state, starting with the initial one.
    pub metrics: Vec<MetricsRow>,
    /// Wall-clock solve time per step.
    pub solve_seconds: Vec<f64>,
    /// Positions every `stride` steps, plus the final state.
    pub trajectory: Vec<(usize, Vec<Vec3>)>,
}

fn steps_for(delta: f64, total_time: f64) -> usize {
    if total_time <= 0.0 || delta <= 0.0 {
        0
    } else {
        (total_time / delta).round().max(1.0) as usize
    }
}

/// Runs the grid flow. `ground_truth[t]` holds the reference positions after
/// step `t` (entry 0 is the input).
/// Step count and size of a schedule. A budget is resolved with one probe
/// step of the full time span; the flow is reset afterwards.
pub fn plan(flow: &mut GridFlow, schedule: Schedule) -> Result<(usize, f64)> {
    flow.reset();
    match schedule {
        Schedule::Fixed { delta, total_time } => Ok((steps_for(delta, total_time), delta)),
        Schedule::Budget { total_time, .. } if total_time <= 0.0 => Ok((0, 0.0)),
        Schedule::Budget { seconds, total_time } => {
            let probe = flow.step(total_time)?;
            flow.reset();
            Ok(delta_for_budget(probe.solve_seconds, seconds, total_time))
        }
    }
}

pub fn run_flow(
    flow: &mut GridFlow,
    schedule: Schedule,
    ground_truth: Option<&[Vec<Vec3>]>,
    stride: usize,
) -> Result<FlowRun> {
    let (steps, delta) = plan(flow, schedule)?;
    let metrics_for = |flow: &GridFlow, drift: f64| -> Result<MetricsRow> {
        let mesh = flow.evolved_mesh();
        let t = flow.state().step;
        let (rms, per) = match ground_truth.and_then(|g| g.get(t)) {
            Some(g) => {
                let mut gm = mesh.clone();
                gm.vertices = g.clone();
                (Some(crate::analysis::rms_error(&mesh, &gm)?), Some(crate::analysis::rms_error_per_vertex(&mesh, &gm)?))
            }
            None => (None, None),
        };
        Ok(MetricsRow { step: t, time: flow.state().time, rms, rms_per_vertex: per, sphericity: crate::analysis::sphericity(&mesh), centroid_drift: drift })
    };
    let stride = stride.max(1);
    let mut run = FlowRun { delta, metrics: vec![metrics_for(flow, 0.0)?], solve_seconds: Vec::new(), trajectory: vec![(0, flow.state().positions.clone())] };
    for t in 1..=steps {
        let report = flow.step(delta)?;
        run.solve_seconds.push(report.solve_seconds);
        run.metrics.push(metrics_for(flow, report.centroid_drift)?);
        if t % stride == 0 || t == steps {
            run.trajectory.push((t, flow.state().positions.clone()));
        }
    }
    Ok(run)
}

/// Largest step of the cotangent reference flow.
pub const REFERENCE_DELTA: f64 = 0.05;

/// Reference positions of the cotangent flow at times `delta, 2 delta, ...`
/// (entry 0 is the input). Each interval is covered by substeps no longer
/// than [`REFERENCE_DELTA`].
pub fn cotan_trajectory(mesh: &TriangleMesh, delta: f64, steps: usize, normalize_area: bool) -> Result<Vec<Vec<Vec3>>> {
    let mut flow = CotanFlow::new(mesh, normalize_area, 1e-10);
    let substeps = (delta / REFERENCE_DELTA).ceil().max(1.0) as usize;
    let mut out = vec![mesh.vertices.clone()];
    for _ in 0..steps {
        for _ in 0..substeps {
            flow.step(delta / substeps as f64)?;
        }
        out.push(flow.positions().to_vec());
    }
    Ok(out)
}

/// Step size for a wall-clock budget: the time of one probe step decides
/// how many steps fit, and `total_time` is split evenly over them.
pub fn delta_for_budget(probe_seconds: f64, budget_seconds: f64, total_time: f64) -> (usize, f64) {
    let steps = if probe_seconds > 0.0 { (budget_seconds / probe_seconds).floor().max(1.0) as usize } else { 1 };
    (steps, total_time / steps as f64)
}
