use nalgebra::DMatrix;

use crate::assembly::SparseSystem;
use crate::components::BasisIndex;
use crate::embedding::FragmentLevel;
use crate::mesh::{connected_components, TriangleMesh};

/// Indicator coefficient vectors, one per connected mesh component: entry
/// `b` is 1 when basis function `b` has support on that component.
pub fn component_indicators(mesh: &TriangleMesh, level: &FragmentLevel, basis: &BasisIndex) -> Vec<Vec<f64>> {
    let comps = connected_components(mesh);
    let mut face_comp = vec![0usize; mesh.face_count()];
    for (c, faces) in comps.iter().enumerate() {
        for &f in faces {
            face_comp[f as usize] = c;
        }
    }
    let mut out = vec![vec![0.0; basis.dim()]; comps.len()];
    for b in 0..basis.dim() {
        for &f in basis.members(b) {
            out[face_comp[level.fragment(f as usize).face as usize]][b] = 1.0;
        }
    }
    out
}

/// `‖L 1_c‖∞ / max|L|` for each indicator.
pub fn indicator_defects(system: &SparseSystem, indicators: &[Vec<f64>]) -> Vec<f64> {
    let scale = system.stiffness.max_abs();
    indicators
        .iter()
        .map(|x| system.stiffness.mul_vec(x).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale)
        .collect()
}

/// Generalized eigenvalues of the pencil `(L, M)` restricted to the span of
/// the indicators, ascending, relative to `tr(L) / tr(M)`.
///
/// The trace ratio is the mean Rayleigh quotient of the basis functions and
/// stands in for the top of the spectrum, which basis functions grazing the
/// surface push arbitrarily high.
pub fn indicator_rayleigh_quotients(system: &SparseSystem, indicators: &[Vec<f64>]) -> Vec<f64> {
    let k = indicators.len();
    if k == 0 {
        return Vec::new();
    }
    let (l, m) = (&system.stiffness, &system.mass);
    let lx: Vec<Vec<f64>> = indicators.iter().map(|x| l.mul_vec(x)).collect();
    let mx: Vec<Vec<f64>> = indicators.iter().map(|x| m.mul_vec(x)).collect();
    let dotp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let a = DMatrix::from_fn(k, k, |i, j| 0.5 * (dotp(&indicators[i], &lx[j]) + dotp(&indicators[j], &lx[i])));
    let b = DMatrix::from_fn(k, k, |i, j| 0.5 * (dotp(&indicators[i], &mx[j]) + dotp(&indicators[j], &mx[i])));
    let Some(chol) = b.cholesky() else {
        return vec![f64::NAN; k];
    };
    let low = chol.l();
    let c = low.solve_lower_triangular(&a).expect("nonsingular factor");
    let c = low.solve_lower_triangular(&c.transpose()).expect("nonsingular factor");
    let c = (&c + c.transpose()) * 0.5;
    let scale = l.trace() / m.trace();
    let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().map(|v| v / scale).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Number of independent indicator combinations whose Rayleigh quotient is
/// below `threshold` relative to `tr(L) / tr(M)`.
pub fn near_null_indicator_count(system: &SparseSystem, indicators: &[Vec<f64>], threshold: f64) -> usize {
    indicator_rayleigh_quotients(system, indicators).iter().filter(|&&q| q < threshold).count()
}
