//! Indexed triangle meshes, normalization into the grid domain and the
//! cotangent reference operator.

pub mod cotan;
pub mod io;

use std::collections::HashMap;

use log::warn;

use crate::error::{Error, Result};
use crate::geometry::{triangle_area, Aabb, Vec3};
use crate::union_find::UnionFind;

pub use cotan::{cotan_operator, CotanOperator};

/// Default margin between the mesh bounding box and the unit cube.
pub const DEFAULT_PAD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    /// Per-vertex RGB in `[0, 1]`.
    pub colors: Option<Vec<[f64; 3]>>,
    /// Per-vertex reference embedding used when the surface evolves.
    pub material_positions: Option<Vec<Vec3>>,
}

impl TriangleMesh {
    /// Validates indices and builds a mesh without attributes.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {} but mesh has {n} vertices",
                    f.iter().max().unwrap()
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex index: {f:?}")));
            }
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        Ok(TriangleMesh {
            vertices,
            faces,
            colors: None,
            material_positions: None,
        })
    }

    pub fn with_colors(mut self, colors: Vec<[f64; 3]>) -> Result<Self> {
        if colors.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} colors for {} vertices",
                colors.len(),
                self.vertices.len()
            )));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    /// Sets the material positions to the current vertex positions.
    pub fn with_material_from_vertices(mut self) -> Self {
        self.material_positions = Some(self.vertices.clone());
        self
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn material_positions(&self) -> &[Vec3] {
        self.material_positions.as_deref().unwrap_or(&self.vertices)
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        triangle_area(&a, &b, &c)
    }

    /// Unit normal of a face (zero for degenerate faces).
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn bounding_box(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    /// Zero-area threshold scaled by the mesh size.
    fn degenerate_threshold(&self) -> f64 {
        let d = self.bounding_box().map_or(0.0, |b| b.diagonal());
        1e-14 * d * d
    }

    /// Faces whose area is zero up to rounding; these are excluded from assembly.
    pub fn degenerate_faces(&self) -> Vec<bool> {
        let tol = self.degenerate_threshold();
        let flags: Vec<bool> = (0..self.faces.len()).map(|f| self.face_area(f) <= tol).collect();
        let count = flags.iter().filter(|&&d| d).count();
        if count > 0 {
            warn!("{count} degenerate faces excluded from assembly");
        }
        flags
    }

    /// Applies `x -> R x` to vertex and material positions.
    pub fn rotated(&self, r: &nalgebra::Matrix3<f64>) -> TriangleMesh {
        let mut m = self.clone();
        m.vertices.iter_mut().for_each(|v| *v = r * *v);
        if let Some(mp) = m.material_positions.as_mut() {
            mp.iter_mut().for_each(|v| *v = r * *v);
        }
        m
    }

    /// Concatenates meshes into one, offsetting indices.
    pub fn merge(parts: &[TriangleMesh]) -> TriangleMesh {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let all_colored = parts.iter().all(|p| p.colors.is_some());
        let mut colors = Vec::new();
        for p in parts {
            let off = vertices.len() as u32;
            vertices.extend_from_slice(&p.vertices);
            faces.extend(p.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
            if all_colored {
                colors.extend_from_slice(p.colors.as_ref().unwrap());
            }
        }
        TriangleMesh {
            vertices,
            faces,
            colors: if all_colored && !parts.is_empty() { Some(colors) } else { None },
            material_positions: None,
        }
    }
}

/// Affine map `x -> scale * x + translation` into the unit cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    pub scale: f64,
    pub translation: Vec3,
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        NormalizationTransform {
            scale: 1.0,
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        p * self.scale + self.translation
    }

    pub fn inverse(&self, p: &Vec3) -> Vec3 {
        (p - self.translation) / self.scale
    }
}

/// Scales and centers the mesh so its longest bounding-box side spans
/// `1 - 2 pad` of the unit cube.
pub fn normalize(mesh: &TriangleMesh, pad: f64) -> Result<(TriangleMesh, NormalizationTransform)> {
    if !(0.0..0.5).contains(&pad) {
        return Err(Error::InvalidArgument(format!("pad {pad} outside [0, 0.5)")));
    }
    let bb = mesh
        .bounding_box()
        .ok_or_else(|| Error::InvalidMesh("cannot normalize an empty mesh".into()))?;
    let longest = bb.extent().max();
    if longest <= 0.0 {
        return Err(Error::InvalidMesh("all vertices coincide (zero diameter)".into()));
    }
    let scale = (1.0 - 2.0 * pad) / longest;
    let center = (bb.min + bb.max) * 0.5;
    let translation = Vec3::repeat(0.5) - center * scale;
    let xf = NormalizationTransform { scale, translation };
    let mut out = mesh.clone();
    out.vertices.iter_mut().for_each(|v| *v = xf.apply(v));
    out.material_positions = Some(match &mesh.material_positions {
        Some(mp) => mp.iter().map(|v| xf.apply(v)).collect(),
        None => out.vertices.clone(),
    });
    Ok((out, xf))
}

/// Partition of faces into edge-connected components, ordered by smallest face.
pub fn connected_components(mesh: &TriangleMesh) -> Vec<Vec<u32>> {
    let mut uf = UnionFind::new(mesh.faces.len());
    let mut edge_owner: HashMap<(u32, u32), usize> = HashMap::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            let key = (a.min(b), a.max(b));
            match edge_owner.get(&key) {
                Some(&other) => {
                    uf.union(fi, other);
                }
                None => {
                    edge_owner.insert(key, fi);
                }
            }
        }
    }
    let (labels, k) = uf.labels();
    let mut comps = vec![Vec::new(); k];
    for (fi, &l) in labels.iter().enumerate() {
        comps[l as usize].push(fi as u32);
    }
    comps
}

/// Component label per vertex (`u32::MAX` for unreferenced vertices).
pub fn vertex_component_labels(mesh: &TriangleMesh) -> (Vec<u32>, usize) {
    let comps = connected_components(mesh);
    let mut labels = vec![u32::MAX; mesh.vertices.len()];
    for (ci, comp) in comps.iter().enumerate() {
        for &f in comp {
            for &v in &mesh.faces[f as usize] {
                labels[v as usize] = ci as u32;
            }
        }
    }
    (labels, comps.len())
}

/// 1-to-4 midpoint subdivision. The surface is unchanged; shared edges get
/// one midpoint. Colors are interpolated, material positions dropped.
pub fn subdivide_midpoint(mesh: &TriangleMesh) -> TriangleMesh {
    let mut vertices = mesh.vertices.clone();
    let mut colors = mesh.colors.clone();
    let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
    let mut mid = |a: u32, b: u32, vertices: &mut Vec<Vec3>, colors: &mut Option<Vec<[f64; 3]>>| {
        *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
            vertices.push((vertices[a as usize] + vertices[b as usize]) * 0.5);
            if let Some(c) = colors.as_mut() {
                let (ca, cb) = (c[a as usize], c[b as usize]);
                c.push(std::array::from_fn(|i| 0.5 * (ca[i] + cb[i])));
            }
            (vertices.len() - 1) as u32
        })
    };
    let mut faces = Vec::with_capacity(4 * mesh.face_count());
    for &[a, b, c] in &mesh.faces {
        let ab = mid(a, b, &mut vertices, &mut colors);
        let bc = mid(b, c, &mut vertices, &mut colors);
        let ca = mid(c, a, &mut vertices, &mut colors);
        faces.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
    }
    TriangleMesh { vertices, faces, colors, material_positions: None }
}

/// `n` points distributed uniformly by area, as `(face, point)` pairs.
pub fn sample_points(mesh: &TriangleMesh, n: usize, rng: &mut impl rand::Rng) -> Vec<(u32, Vec3)> {
    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for f in 0..mesh.face_count() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    (0..n)
        .map(|_| {
            let t = rng.gen::<f64>() * total;
            let f = cumulative.partition_point(|&c| c <= t).min(mesh.face_count() - 1);
            let (mut a, mut b): (f64, f64) = (rng.gen(), rng.gen());
            if a + b > 1.0 {
                (a, b) = (1.0 - a, 1.0 - b);
            }
            let [p, q, r] = mesh.triangle(f);
            (f as u32, p + (q - p) * a + (r - p) * b)
        })
        .collect()
}
