use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{color_channels, load_vectors, screened_rhs};
use crate::components::FunctionSpace;
use crate::embedding::FragmentForest;
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::solver::{residual, screened_hierarchy, MultigridOptions};
use crate::sparse::dot;
use crate::Mode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub mode: Mode,
    pub min_depth: u32,
    /// Residual norm after the cycles, divided by the norm of the initial guess.
    pub normalized_residual: f64,
}

/// Screened color fit of a colored mesh: one cycle batch per minimum depth,
/// every run starting from the same seeded random guess in `[0, 1]`.
/// Norms are taken over all three channels jointly.
pub fn min_depth_sweep(
    mesh: &TriangleMesh,
    forest: &FragmentForest,
    mode: Mode,
    alpha: f64,
    options: MultigridOptions,
    cycles: usize,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    let depth = forest.max_depth();
    let channels = color_channels(mesh)?;
    let space = FunctionSpace::new(mesh, forest, mode);
    let (hierarchy, _) = screened_hierarchy(mesh, forest, &space, alpha, 0.0, options)?;
    let (level, basis) = (forest.level(depth), space.level(depth));
    let rhs: Vec<Vec<f64>> = channels
        .iter()
        .map(|c| {
            let (f, s) = load_vectors(mesh, level, basis, c);
            screened_rhs(&f, &s, alpha)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial: Vec<Vec<f64>> = (0..3).map(|_| (0..basis.dim()).map(|_| rng.gen::<f64>()).collect()).collect();
    let initial_norm = initial.iter().map(|u| dot(u, u)).sum::<f64>().sqrt();
    let a = hierarchy.finest();
    (forest.min_depth()..=depth)
        .map(|min_depth| {
            let mut sq = 0.0;
            for (u0, b) in initial.iter().zip(&rhs) {
                let mut u = u0.clone();
                for _ in 0..cycles {
                    hierarchy.cycle(&mut u, b, min_depth);
                }
                let r = residual(a, &u, b);
                sq += dot(&r, &r);
            }
            let normalized_residual = sq.sqrt() / initial_norm;
            if !normalized_residual.is_finite() {
                return Err(Error::NonFinite(format!("residual at min depth {min_depth}")));
            }
            Ok(ConvergenceRow { mode, min_depth, normalized_residual })
        })
        .collect()
}
