//! Connectivity-aware grid-based finite elements on triangle meshes.
//!
//! Trilinear B-splines on a regular grid over the unit cube are restricted to
//! a surface and, optionally, split per connected component of their support.
//! On top of the resulting function spaces the crate provides a geometric
//! multigrid solver, screened-Poisson fitting, generalized eigen-analysis of
//! the Laplace-Beltrami operator and conformalized mean-curvature flow.
//!
//! The usual pipeline:
//!
//! ```
//! use gridfem::{assembly, components::FunctionSpace, embedding::FragmentForest, mesh, models, Mode};
//!
//! let (mesh, _xf) = mesh::normalize(&models::icosphere(2), mesh::DEFAULT_PAD)?;
//! let forest = FragmentForest::build(&mesh, 0, 3)?;
//! let space = FunctionSpace::new(&mesh, &forest, Mode::Aware);
//! let system = assembly::assemble(&mesh, forest.level(3), space.level(3), 0.0);
//! assert_eq!(system.dim(), space.level(3).dim());
//! # Ok::<(), gridfem::Error>(())
//! ```

pub mod analysis;
pub mod assembly;
pub mod components;
pub mod embedding;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod mesh;
pub mod models;
pub mod output;
pub mod solver;
pub mod sparse;
pub mod texture;
pub(crate) mod union_find;

pub use error::{Error, Result};

/// Which function space a basis is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// One B-spline per active grid corner.
    Unaware,
    /// One B-spline per connected component of the corner's support on the surface.
    Aware,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Unaware => "unaware",
            Mode::Aware => "aware",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aware" => Ok(Mode::Aware),
            "unaware" => Ok(Mode::Unaware),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}'"))),
        }
    }
}

/// Version string stamped into output headers: the crate version plus
/// `git describe` of the source tree at build time.
pub fn version() -> &'static str {
    concat!("gridfem-", env!("CARGO_PKG_VERSION"), "-", env!("GRIDFEM_DESCRIBE"))
}
