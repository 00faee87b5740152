use crate::assembly::{color_channels, evaluation_matrix, load_vectors, screened_rhs, vertex_samples};
use crate::components::FunctionSpace;
use crate::embedding::FragmentForest;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::{vertex_component_labels, TriangleMesh};
use crate::solver::{screened_hierarchy, MultigridOptions};
use crate::Mode;

#[derive(Debug, Clone)]
pub struct ColorFit {
    pub coefficients: [Vec<f64>; 3],
    /// Fitted color at every vertex; isolated vertices keep their input color.
    pub colors: Vec<[f64; 3]>,
    /// Relative residual after each preconditioned iteration, per channel.
    pub history: [Vec<f64>; 3],
}

/// Screened-Poisson fit `(L + alpha M) u = f + alpha s` of the vertex colors,
/// solved per channel by multigrid-preconditioned conjugate gradients.
#[allow(clippy::too_many_arguments)]
pub fn fit_colors(
    mesh: &TriangleMesh,
    forest: &FragmentForest,
    mode: Mode,
    alpha: f64,
    epsilon: f64,
    options: MultigridOptions,
    max_iterations: usize,
    tolerance: f64,
) -> Result<ColorFit> {
    let depth = forest.max_depth();
    let channels = color_channels(mesh)?;
    let space = FunctionSpace::new(mesh, forest, mode);
    let (hierarchy, _) = screened_hierarchy(mesh, forest, &space, alpha, epsilon, options)?;
    let (level, basis) = (forest.level(depth), space.level(depth));
    let samples = vertex_samples(mesh);
    let rows: Vec<(u32, Vec3)> = samples.iter().map(|s| s.unwrap_or((0, Vec3::zeros()))).collect();
    let eval = evaluation_matrix(level, basis, &rows)?;
    let mut coefficients: [Vec<f64>; 3] = Default::default();
    let mut history: [Vec<f64>; 3] = Default::default();
    let mut colors = mesh.colors.clone().unwrap_or_default();
    for c in 0..3 {
        let (f, s) = load_vectors(mesh, level, basis, &channels[c]);
        let rhs = screened_rhs(&f, &s, alpha);
        let mut u = vec![0.0; basis.dim()];
        history[c] = hierarchy.pcg(&mut u, &rhs, forest.min_depth(), max_iterations, tolerance)?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("fitted coefficients of channel {c}")));
        }
        let values = eval.mul_vec(&u);
        for (v, s) in samples.iter().enumerate() {
            if s.is_some() {
                colors[v][c] = values[v];
            }
        }
        coefficients[c] = u;
    }
    Ok(ColorFit { coefficients, colors, history })
}

/// Mean within-component color variance over the variance of the component
/// means, summed over channels. Small values mean each connected component
/// carries a near-constant color.
pub fn component_variance_ratio(mesh: &TriangleMesh, colors: &[[f64; 3]]) -> f64 {
    let (labels, k) = vertex_component_labels(mesh);
    let mut count = vec![0usize; k];
    let mut mean = vec![[0.0; 3]; k];
    for (l, col) in labels.iter().zip(colors) {
        if let Some(m) = mean.get_mut(*l as usize) {
            count[*l as usize] += 1;
            (0..3).for_each(|c| m[c] += col[c]);
        }
    }
    for (m, &n) in mean.iter_mut().zip(&count) {
        m.iter_mut().for_each(|x| *x /= n.max(1) as f64);
    }
    let mut within = 0.0;
    for (l, col) in labels.iter().zip(colors) {
        if let Some(m) = mean.get(*l as usize) {
            within += (0..3).map(|c| (col[c] - m[c]).powi(2)).sum::<f64>();
        }
    }
    within /= count.iter().sum::<usize>().max(1) as f64;
    let grand: Vec<f64> = (0..3).map(|c| mean.iter().map(|m| m[c]).sum::<f64>() / k.max(1) as f64).collect();
    let between = mean.iter().map(|m| (0..3).map(|c| (m[c] - grand[c]).powi(2)).sum::<f64>()).sum::<f64>() / k.max(1) as f64;
    within / between
}
