//! Experiment drivers: color fitting, solver convergence, spectra, their sweeps over
//! resolution and rotation, kernel counting and error metrics.

mod convergence;
mod fit;
mod kernel;
mod metrics;
mod spectrum;
mod sweeps;


pub use convergence::{min_depth_sweep, ConvergenceRow};
pub use fit::{component_variance_ratio, fit_colors, ColorFit};
pub use kernel::{component_indicators, indicator_defects, indicator_rayleigh_quotients, near_null_indicator_count};
pub use metrics::{rms_error, rms_error_per_vertex, sphericity, surface_centroid};
pub use spectrum::{generalized_eigen, Spectrum, SpectrumOptions, DENSE_LIMIT};
pub use sweeps::{
    cotan_spectrum, eigenvalue_deviation, grid_spectrum, kernel_skip, random_rotation, reference_spectrum, relative_spread, resolution_sweep,
    rotation_sweep, ResolutionRow,
};
