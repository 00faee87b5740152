use log::warn;

use crate::sparse::CsrMatrix;

use super::TriangleMesh;

/// Smallest corner angle (radians) before cotangent weights are clamped.
const MIN_ANGLE: f64 = 1e-6;

/// Linear-FEM reference operator: cotangent stiffness and Galerkin mass.
#[derive(Debug, Clone)]
pub struct CotanOperator {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
}

/// Cotangent stiffness (`L_ij = -(cot α + cot β)/2`, zero row sums) and the
/// consistent P1 mass matrix. Degenerate faces are skipped.
pub fn cotan_operator(mesh: &TriangleMesh) -> CotanOperator {
    let n = mesh.vertex_count();
    let degenerate = mesh.degenerate_faces();
    let max_cot = 1.0 / MIN_ANGLE.tan();
    let mut clamped = 0usize;
    let mut lt = Vec::with_capacity(mesh.face_count() * 9);
    let mut mt = Vec::with_capacity(mesh.face_count() * 9);
    for (fi, f) in mesh.faces.iter().enumerate() {
        if degenerate[fi] {
            continue;
        }
        let p = mesh.triangle(fi);
        let area = mesh.face_area(fi);
        for c in 0..3 {
            let (i, j) = ((c + 1) % 3, (c + 2) % 3);
            let u = p[i] - p[c];
            let v = p[j] - p[c];
            let mut cot = u.dot(&v) / u.cross(&v).norm();
            if !cot.is_finite() || cot.abs() > max_cot {
                cot = cot.clamp(-max_cot, max_cot);
                if !cot.is_finite() {
                    cot = max_cot;
                }
                clamped += 1;
            }
            let w = 0.5 * cot;
            let (a, b) = (f[i] as usize, f[j] as usize);
            lt.push((a, b, -w));
            lt.push((b, a, -w));
            lt.push((a, a, w));
            lt.push((b, b, w));
        }
        for a in 0..3 {
            for b in 0..3 {
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                mt.push((f[a] as usize, f[b] as usize, m));
            }
        }
    }
    if clamped > 0 {
        warn!("{clamped} cotangent weights clamped at near-degenerate corners");
    }
    CotanOperator {
        stiffness: CsrMatrix::from_triplets(n, n, lt),
        mass: CsrMatrix::from_triplets(n, n, mt),
    }
}
