//! Stiffness, mass and load assembly over mesh fragments.
//!
//! `L` stores the positive semi-definite Dirichlet form `∫⟨∇b_i, ∇b_j⟩`
//! with surface (tangential) gradients and `M` stores `∫ b_i b_j`. Both are
//! integrated exactly: on a planar fragment the integrands are polynomials
//! of degree at most 4 and 6.

pub mod bspline;
pub mod quadrature;

use crate::components::{BasisIndex, NONE};
use crate::embedding::{Cell, Fragment, FragmentLevel};
use crate::error::{Error, Result};
use crate::geometry::{fan, Vec3};
use crate::mesh::TriangleMesh;
use crate::sparse::CsrMatrix;
use crate::Mode;

use bspline::local_basis;
use quadrature::{DEGREE4, DEGREE6};

/// Dense 8x8 matrix over a voxel's corner slots, row-major.
pub type Local = [f64; 64];

/// Fragment of `face` on this level whose voxel contains `p`, preferring
/// the voxel `p` falls in when it sits on a voxel boundary.
pub fn locate_fragment(level: &FragmentLevel, face: u32, p: &Vec3) -> Option<usize> {
    let grid = level.grid;
    let home = grid.voxel_of(p);
    let n = grid.resolution() as i64;
    let find = |v: Cell| {
        let range = level.voxel_fragments(v);
        let start = range.start;
        level.fragments()[range].binary_search_by_key(&face, |f| f.face).ok().map(|i| start + i)
    };
    if let Some(f) = find(home) {
        return Some(f);
    }
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let c = [home[0] as i64 + dx, home[1] as i64 + dy, home[2] as i64 + dz];
                if c.iter().any(|&x| x < 0 || x >= n) || (dx, dy, dz) == (0, 0, 0) {
                    continue;
                }
                let v = c.map(|x| x as u32);
                if grid.voxel_box(v).contains(p, 1e-9 / n as f64) {
                    if let Some(f) = find(v) {
                        return Some(f);
                    }
                }
            }
        }
    }
    None
}

/// `Σ coeffs[b] b(p)` for a point `p` on `face`.
pub fn evaluate(level: &FragmentLevel, basis: &BasisIndex, coeffs: &[f64], face: u32, p: &Vec3) -> Option<f64> {
    let f = locate_fragment(level, face, p)?;
    let (values, _) = local_basis(level.grid, level.fragment(f).voxel, p);
    let ids = basis.fragment_basis(f);
    Some(ids.iter().zip(values).filter(|(&b, _)| b != NONE).map(|(&b, v)| coeffs[b as usize] * v).sum())
}

/// Rows map coefficients to function values at `(face, point)` samples.
pub fn evaluation_matrix(level: &FragmentLevel, basis: &BasisIndex, samples: &[(u32, Vec3)]) -> Result<CsrMatrix> {
    let mut triplets = Vec::with_capacity(samples.len() * 8);
    for (row, (face, p)) in samples.iter().enumerate() {
        let f = locate_fragment(level, *face, p)
            .ok_or_else(|| Error::Consistency(format!("point {p:?} of face {face} lies in no fragment")))?;
        let (values, _) = local_basis(level.grid, level.fragment(f).voxel, p);
        for (&b, v) in basis.fragment_basis(f).iter().zip(values) {
            if b != NONE && v != 0.0 {
                triplets.push((row, b as usize, v));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(samples.len(), basis.dim(), triplets))
}

/// One `(face, position)` sample per vertex, using the first incident
/// non-degenerate face. Isolated vertices get no sample.
pub fn vertex_samples(mesh: &TriangleMesh) -> Vec<Option<(u32, Vec3)>> {
    let degenerate = mesh.degenerate_faces();
    let mut out = vec![None; mesh.vertex_count()];
    for (f, face) in mesh.faces.iter().enumerate() {
        if degenerate[f] {
            continue;
        }
        for &v in face {
            out[v as usize].get_or_insert((f as u32, mesh.vertices[v as usize]));
        }
    }
    out
}

/// Stiffness and mass of one level.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub mode: Mode,
    /// Diagonal regularization already added to `stiffness`.
    pub epsilon: f64,
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.stiffness.n_rows()
    }

    /// `L + alpha M`.
    pub fn screened(&self, alpha: f64) -> CsrMatrix {
        self.stiffness.linear_combination(1.0, &self.mass, alpha)
    }
}

/// Right-hand side `f + alpha s` of the screened system.
pub fn screened_rhs(f: &[f64], s: &[f64], alpha: f64) -> Vec<f64> {
    f.iter().zip(s).map(|(a, b)| a + alpha * b).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralKind {
    Stiffness,
    Mass,
}

fn unit_normal(mesh: &TriangleMesh, face: u32) -> Vec3 {
    let [a, b, c] = mesh.triangle(face as usize);
    (b - a).cross(&(c - a)).normalize()
}

fn tangential(g: &Vec3, n: &Vec3) -> Vec3 {
    g - n * g.dot(n)
}

/// Local stiffness and mass of one fragment over its voxel's 8 corner slots.
pub fn local_matrices(mesh: &TriangleMesh, level: &FragmentLevel, frag: &Fragment) -> (Local, Local) {
    let n = unit_normal(mesh, frag.face);
    let mut k = [0.0; 64];
    let mut m = [0.0; 64];
    for tri in fan(&frag.polygon) {
        for (p, w) in DEGREE4.points_on(&tri) {
            let (_, grads) = local_basis(level.grid, frag.voxel, &p);
            let g = grads.map(|g| tangential(&g, &n));
            for i in 0..8 {
                for j in i..8 {
                    k[i * 8 + j] += w * g[i].dot(&g[j]);
                }
            }
        }
        for (p, w) in DEGREE6.points_on(&tri) {
            let (vals, _) = local_basis(level.grid, frag.voxel, &p);
            for i in 0..8 {
                for j in i..8 {
                    m[i * 8 + j] += w * vals[i] * vals[j];
                }
            }
        }
    }
    for i in 0..8 {
        for j in 0..i {
            k[i * 8 + j] = k[j * 8 + i];
            m[i * 8 + j] = m[j * 8 + i];
        }
    }
    (k, m)
}

/// Precomputed scatter map from fragment-local 8x8 blocks into the level's
/// sparse pattern, plus the local mass blocks for re-weighted assembly.
#[derive(Debug, Clone)]
pub struct Assembler {
    mode: Mode,
    pattern: CsrMatrix,
    slots: Vec<[u32; 64]>,
    local_mass: Vec<Local>,
    fragment_face: Vec<u32>,
    stiffness: CsrMatrix,
    mass: CsrMatrix,
}

impl Assembler {
    pub fn new(mesh: &TriangleMesh, level: &FragmentLevel, basis: &BasisIndex) -> Self {
        let dim = basis.dim();
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(level.len() * 64);
        for f in 0..level.len() {
            let fb = basis.fragment_basis(f);
            for &a in fb.iter().filter(|&&a| a != NONE) {
                for &b in fb.iter().filter(|&&b| b != NONE) {
                    pairs.push((a, b));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_ptr = vec![0usize; dim + 1];
        for &(a, _) in &pairs {
            row_ptr[a as usize + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx: Vec<usize> = pairs.iter().map(|&(_, b)| b as usize).collect();
        let nnz = col_idx.len();
        let pattern = CsrMatrix::from_raw(dim, dim, row_ptr, col_idx, vec![0.0; nnz]);

        let mut slots = Vec::with_capacity(level.len());
        let mut local_mass = Vec::with_capacity(level.len());
        let mut stiffness = pattern.clone();
        let mut mass = pattern.clone();
        for (f, frag) in level.fragments().iter().enumerate() {
            let fb = basis.fragment_basis(f);
            let s: [u32; 64] = std::array::from_fn(|ij| {
                let (a, b) = (fb[ij / 8], fb[ij % 8]);
                if a == NONE || b == NONE {
                    return NONE;
                }
                pattern.slot(a as usize, b as usize).expect("pattern covers fragment block") as u32
            });
            let (k, m) = local_matrices(mesh, level, frag);
            for ij in (0..64).filter(|&ij| s[ij] != NONE) {
                stiffness.values_mut()[s[ij] as usize] += k[ij];
                mass.values_mut()[s[ij] as usize] += m[ij];
            }
            slots.push(s);
            local_mass.push(m);
        }
        Self {
            mode: basis.mode,
            pattern,
            slots,
            local_mass,
            fragment_face: level.fragments().iter().map(|f| f.face).collect(),
            stiffness,
            mass,
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.n_rows()
    }

    pub fn system(&self, epsilon: f64) -> SparseSystem {
        let stiffness = if epsilon > 0.0 { self.stiffness.add_diagonal(epsilon) } else { self.stiffness.clone() };
        SparseSystem { stiffness, mass: self.mass.clone(), mode: self.mode, epsilon }
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Mass matrix with each fragment's measure scaled by the area ratio of
    /// its source face. Faces with ratio below 1e-12 contribute nothing.
    pub fn weighted_mass(&self, face_ratio: &[f64]) -> CsrMatrix {
        let mut m = self.pattern.clone();
        let values = m.values_mut();
        for ((s, local), &face) in self.slots.iter().zip(&self.local_mass).zip(&self.fragment_face) {
            let r = face_ratio[face as usize];
            if r < 1e-12 {
                continue;
            }
            for ij in (0..64).filter(|&ij| s[ij] != NONE) {
                values[s[ij] as usize] += r * local[ij];
            }
        }
        m
    }
}

/// Assembles `L` (plus `epsilon * Id`) and `M` for one level.
pub fn assemble(mesh: &TriangleMesh, level: &FragmentLevel, basis: &BasisIndex, epsilon: f64) -> SparseSystem {
    Assembler::new(mesh, level, basis).system(epsilon)
}

/// A single entry of `L` or `M` integrated over the fragments shared by two
/// basis functions.
pub fn integrate_pair(
    mesh: &TriangleMesh,
    level: &FragmentLevel,
    basis: &BasisIndex,
    a: usize,
    b: usize,
    kind: IntegralKind,
) -> f64 {
    let (ma, mb) = (basis.members(a), basis.members(b));
    let mut total = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < ma.len() && j < mb.len() {
        match ma[i].cmp(&mb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let f = ma[i] as usize;
                let fb = basis.fragment_basis(f);
                let sa = fb.iter().position(|&x| x as usize == a).expect("member has slot");
                let sb = fb.iter().position(|&x| x as usize == b).expect("member has slot");
                let (k, m) = local_matrices(mesh, level, level.fragment(f));
                total += match kind {
                    IntegralKind::Stiffness => k[sa * 8 + sb],
                    IntegralKind::Mass => m[sa * 8 + sb],
                };
                i += 1;
                j += 1;
            }
        }
    }
    total
}

/// Gradient of the piecewise-linear interpolant of `values` on one face.
pub fn face_gradient(mesh: &TriangleMesh, face: usize, values: &[f64]) -> Vec3 {
    let [a, b, c] = mesh.triangle(face);
    let idx = mesh.faces[face];
    let cross = (b - a).cross(&(c - a));
    let twice_area = cross.norm();
    let n = cross / twice_area;
    let (fa, fb, fc) = (values[idx[0] as usize], values[idx[1] as usize], values[idx[2] as usize]);
    (n.cross(&(c - b)) * fa + n.cross(&(a - c)) * fb + n.cross(&(b - a)) * fc) / twice_area
}

/// Load vectors `f_i = ∫⟨∇f, ∇b_i⟩` and `s_i = ∫ f b_i` of a per-vertex
/// scalar field, linear on each face.
pub fn load_vectors(mesh: &TriangleMesh, level: &FragmentLevel, basis: &BasisIndex, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(values.len(), mesh.vertex_count(), "one value per vertex");
    let mut fv = vec![0.0; basis.dim()];
    let mut sv = vec![0.0; basis.dim()];
    let mut cached_face = u32::MAX;
    let (mut grad, mut origin, mut f0, mut n) = (Vec3::zeros(), Vec3::zeros(), 0.0, Vec3::zeros());
    for (f, frag) in level.fragments().iter().enumerate() {
        if frag.face != cached_face {
            cached_face = frag.face;
            grad = face_gradient(mesh, frag.face as usize, values);
            let v0 = mesh.faces[frag.face as usize][0] as usize;
            origin = mesh.vertices[v0];
            f0 = values[v0];
            n = unit_normal(mesh, frag.face);
        }
        let fb = basis.fragment_basis(f);
        for tri in fan(&frag.polygon) {
            for (p, w) in DEGREE6.points_on(&tri) {
                let (vals, grads) = local_basis(level.grid, frag.voxel, &p);
                let value = f0 + grad.dot(&(p - origin));
                for s in (0..8).filter(|&s| fb[s] != NONE) {
                    fv[fb[s] as usize] += w * grad.dot(&tangential(&grads[s], &n));
                    sv[fb[s] as usize] += w * value * vals[s];
                }
            }
        }
    }
    (fv, sv)
}

/// Per-vertex color channels, or an error when the mesh has no colors.
pub fn color_channels(mesh: &TriangleMesh) -> Result<[Vec<f64>; 3]> {
    let colors = mesh.colors.as_ref().ok_or(Error::MissingColors)?;
    Ok(std::array::from_fn(|c| colors.iter().map(|rgb| rgb[c]).collect()))
}
