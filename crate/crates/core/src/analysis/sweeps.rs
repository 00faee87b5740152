use std::f64::consts::TAU;

use nalgebra::Matrix3;
use rand::Rng;

use crate::assembly::assemble;
use crate::components::{BasisIndex, ComponentTable};
use crate::embedding::FragmentForest;
use crate::error::Result;
use crate::geometry::rotation_from_quaternion;
use crate::mesh::cotan::cotan_operator;
use crate::mesh::{connected_components, normalize, subdivide_midpoint, TriangleMesh};
use crate::Mode;

use super::spectrum::{generalized_eigen, Spectrum, SpectrumOptions};

/// Grid-based spectrum of a mesh in its own units: the mesh is normalized
/// into the unit cube and eigenvalues are scaled back by `scale²`.
pub fn grid_spectrum(mesh: &TriangleMesh, depth: u32, mode: Mode, pad: f64, options: &SpectrumOptions) -> Result<Spectrum> {
    let (normalized, xf) = normalize(mesh, pad)?;
    let forest = FragmentForest::build(&normalized, depth, depth)?;
    let level = forest.level(depth);
    let table = ComponentTable::build(&normalized, level);
    let basis = BasisIndex::new(&table, mode);
    let system = assemble(&normalized, level, &basis, 0.0);
    let mut spec = generalized_eigen(&system.stiffness, &system.mass, options)?;
    let s2 = xf.scale * xf.scale;
    spec.eigenvalues.iter_mut().for_each(|l| *l *= s2);
    spec.residuals.iter_mut().for_each(|r| *r *= s2);
    Ok(spec)
}

/// Spectrum of the cotangent operator on the mesh itself.
pub fn cotan_spectrum(mesh: &TriangleMesh, options: &SpectrumOptions) -> Result<Spectrum> {
    let op = cotan_operator(mesh);
    generalized_eigen(&op.stiffness, &op.mass, options)
}

/// Cotangent spectrum of the same surface after `refinements` rounds of
/// midpoint subdivision, a finer discretization of identical geometry.
pub fn reference_spectrum(mesh: &TriangleMesh, refinements: usize, options: &SpectrumOptions) -> Result<Spectrum> {
    let mut fine = mesh.clone();
    for _ in 0..refinements {
        fine = subdivide_midpoint(&fine);
    }
    cotan_spectrum(&fine, options)
}

/// RMS of `|λ_i - λ_i^ref| / λ_i^ref` over indices `skip..upto` (0-based,
/// exclusive end). `skip` should cover the reference kernel.
pub fn eigenvalue_deviation(values: &[f64], reference: &[f64], skip: usize, upto: usize) -> f64 {
    let upto = upto.min(values.len()).min(reference.len());
    if upto <= skip {
        return 0.0;
    }
    let sq: f64 = (skip..upto).map(|i| ((values[i] - reference[i]) / reference[i]).powi(2)).sum();
    (sq / (upto - skip) as f64).sqrt()
}

/// First index past the kernel of a mesh's Laplacian: at least 1, and at
/// least the number of connected components.
pub fn kernel_skip(mesh: &TriangleMesh) -> usize {
    connected_components(mesh).len().max(1)
}

#[derive(Debug, Clone)]
pub struct ResolutionRow {
    pub depth: u32,
    pub spectrum: Spectrum,
    pub deviation: f64,
}

pub fn resolution_sweep(
    mesh: &TriangleMesh,
    depths: &[u32],
    mode: Mode,
    pad: f64,
    reference: &Spectrum,
    options: &SpectrumOptions,
) -> Result<Vec<ResolutionRow>> {
    let skip = kernel_skip(mesh);
    depths
        .iter()
        .map(|&depth| {
            let spectrum = grid_spectrum(mesh, depth, mode, pad, options)?;
            let deviation = eigenvalue_deviation(&spectrum.eigenvalues, &reference.eigenvalues, skip, options.count);
            Ok(ResolutionRow { depth, spectrum, deviation })
        })
        .collect()
}

/// Uniformly distributed rotation (Shoemake's subgroup algorithm).
pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    rotation_from_quaternion([a * (TAU * u2).sin(), a * (TAU * u2).cos(), b * (TAU * u3).sin(), b * (TAU * u3).cos()])
}

pub fn rotation_sweep(
    mesh: &TriangleMesh,
    rotations: &[Matrix3<f64>],
    depth: u32,
    mode: Mode,
    pad: f64,
    options: &SpectrumOptions,
) -> Result<Vec<Spectrum>> {
    rotations.iter().map(|r| grid_spectrum(&mesh.rotated(r), depth, mode, pad, options)).collect()
}

/// Per-index relative spread `(max - min) / mean` across spectra.
pub fn relative_spread(spectra: &[Spectrum]) -> Vec<f64> {
    let n = spectra.iter().map(|s| s.eigenvalues.len()).min().unwrap_or(0);
    (0..n)
        .map(|i| {
            let vals = spectra.iter().map(|s| s.eigenvalues[i]);
            let (lo, hi, sum) = vals.fold((f64::INFINITY, f64::NEG_INFINITY, 0.0), |(lo, hi, s), v| (lo.min(v), hi.max(v), s + v));
            let mean = sum / spectra.len() as f64;
            if mean.abs() > 0.0 {
                (hi - lo) / mean.abs()
            } else {
                0.0
            }
        })
        .collect()
}
