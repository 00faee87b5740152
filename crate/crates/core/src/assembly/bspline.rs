//! Trilinear B-splines centered at grid corners.

use crate::embedding::{Cell, GridLevel};
use crate::geometry::Vec3;

/// Linear hat `max(0, 1 - |t|)`.
pub fn hat(t: f64) -> f64 {
    (1.0 - t.abs()).max(0.0)
}

/// Value and gradient of `b_k` at `p`, with the gradient taken from the
/// trilinear piece of voxel `v`. Zero when `k` is not a corner of `v`.
pub fn eval_bspline_in_voxel(k: Cell, grid: GridLevel, v: Cell, p: &Vec3) -> (f64, Vec3) {
    if (0..3).any(|a| k[a] < v[a] || k[a] > v[a] + 1) {
        return (0.0, Vec3::zeros());
    }
    let n = grid.resolution() as f64;
    let h: [f64; 3] = std::array::from_fn(|a| hat(n * p[a] - k[a] as f64));
    let slope: [f64; 3] = std::array::from_fn(|a| if k[a] == v[a] { -n } else { n });
    let grad = Vec3::new(slope[0] * h[1] * h[2], h[0] * slope[1] * h[2], h[0] * h[1] * slope[2]);
    (h[0] * h[1] * h[2], grad)
}

/// Value and gradient of `b_k` at `p`, using the voxel that contains `p`.
pub fn eval_bspline(k: Cell, grid: GridLevel, p: &Vec3) -> (f64, Vec3) {
    eval_bspline_in_voxel(k, grid, grid.voxel_of(p), p)
}

/// Values and gradients of the 8 corner splines of voxel `v` at `p`, by local slot.
pub fn local_basis(grid: GridLevel, v: Cell, p: &Vec3) -> ([f64; 8], [Vec3; 8]) {
    let n = grid.resolution() as f64;
    let t: [f64; 3] = std::array::from_fn(|a| n * p[a] - v[a] as f64);
    let mut values = [0.0; 8];
    let mut grads = [Vec3::zeros(); 8];
    for s in 0..8 {
        let mut w = [0.0; 3];
        let mut d = [0.0; 3];
        for a in 0..3 {
            if (s >> a) & 1 == 1 {
                w[a] = t[a];
                d[a] = n;
            } else {
                w[a] = 1.0 - t[a];
                d[a] = -n;
            }
        }
        values[s] = w[0] * w[1] * w[2];
        grads[s] = Vec3::new(d[0] * w[1] * w[2], w[0] * d[1] * w[2], w[0] * w[1] * d[2]);
    }
    (values, grads)
}
