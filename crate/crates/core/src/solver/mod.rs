//! Component-aware geometric multigrid and reference solvers.
//!
//! Each level's operator is assembled from its own basis. Prolongation maps
//! coarse coefficients onto fine ones so that the represented surface
//! function is unchanged, and restriction is its transpose.

mod cg;
pub mod direct;
mod mask;
mod multigrid;
mod prolongation;
mod smoother;

#[cfg(test)]
mod tests;

pub use cg::{conjugate_gradient, CgOutcome};
pub use direct::{reverse_cuthill_mckee, LdlFactor};
pub use mask::{one_dim_mask, MaskKind};
pub use multigrid::{CoarseSolver, CycleShape, Hierarchy, LevelResidual, MultigridOptions, COARSE_SWEEPS, DIRECT_COARSE_LIMIT};
pub use prolongation::{build_prolongation, prolongation_defect};
pub use smoother::{gauss_seidel, gauss_seidel_backward, residual};

use crate::assembly::{Assembler, SparseSystem};
use crate::components::FunctionSpace;
use crate::embedding::FragmentForest;
use crate::error::Result;
use crate::mesh::TriangleMesh;
use crate::sparse::CsrMatrix;

/// Prolongations between consecutive levels of `space`, coarsest first.
pub fn prolongations(space: &FunctionSpace, forest: &FragmentForest, mask: MaskKind) -> Result<Vec<CsrMatrix>> {
    (space.min_depth() + 1..=space.max_depth())
        .map(|d| build_prolongation(space.level(d - 1), space.level(d), forest.level(d), mask))
        .collect()
}

/// Screened operators `L + αM (+ εI)` for every level of `space`, with the
/// finest system returned alongside for building right-hand sides.
pub fn screened_hierarchy(
    mesh: &TriangleMesh,
    forest: &FragmentForest,
    space: &FunctionSpace,
    alpha: f64,
    epsilon: f64,
    options: MultigridOptions,
) -> Result<(Hierarchy, SparseSystem)> {
    let mut systems: Vec<SparseSystem> = space
        .levels()
        .iter()
        .zip(space.min_depth()..)
        .map(|(basis, d)| Assembler::new(mesh, forest.level(d), basis).system(epsilon))
        .collect();
    // in Galerkin mode the hierarchy replaces all but the finest operator
    let ops = systems.iter().map(|s| s.screened(alpha)).collect();
    let ps = prolongations(space, forest, options.mask)?;
    let finest = systems.pop().unwrap();
    Ok((Hierarchy::new(ops, ps, space.min_depth(), options)?, finest))
}
