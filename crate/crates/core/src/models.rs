//! Procedural test geometry: cubes, lattices, spheres, sheets and blobs.

use std::collections::HashMap;

use crate::geometry::{rotation_from_quaternion, Vec3};
use crate::mesh::TriangleMesh;

/// Axis-aligned cube shell with outward-facing triangles.
pub fn cube(origin: Vec3, side: f64) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(8);
    for i in 0..8 {
        vertices.push(
            origin
                + side
                    * Vec3::new(
                        (i & 1) as f64,
                        ((i >> 1) & 1) as f64,
                        ((i >> 2) & 1) as f64,
                    ),
        );
    }
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3], // z = 0
        [4, 5, 6],
        [5, 7, 6], // z = 1
        [0, 1, 4],
        [1, 5, 4], // y = 0
        [2, 6, 3],
        [3, 6, 7], // y = 1
        [0, 4, 2],
        [2, 4, 6], // x = 0
        [1, 3, 5],
        [3, 7, 5], // x = 1
    ];
    TriangleMesh::new(vertices, faces).expect("cube topology is valid")
}

/// `n x n x n` unit cubes separated by `gap` along every axis.
pub fn cube_lattice(n: usize, gap: f64) -> TriangleMesh {
    let step = 1.0 + gap;
    let mut parts = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                parts.push(cube(Vec3::new(i as f64, j as f64, k as f64) * step, 1.0));
            }
        }
    }
    TriangleMesh::merge(&parts)
}

/// Unit-radius icosphere; `subdivisions = 4` gives 2562 vertices.
pub fn icosphere(subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize());
                (vertices.len() - 1) as u32
            })
        };
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut vertices);
            let bc = midpoint(f[1], f[2], &mut vertices);
            let ca = midpoint(f[2], f[0], &mut vertices);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces).expect("icosphere topology is valid")
}

/// Regular `n x n` grid over `[0,1]^2` in the plane `z = 0`.
pub fn grid_sheet(n: usize, height: impl Fn(f64, f64) -> f64) -> TriangleMesh {
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
            vertices.push(Vec3::new(u, v, height(u, v)));
        }
    }
    let idx = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            if (i + j) % 2 == 0 {
                faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            } else {
                faces.push([idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
                faces.push([idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("grid topology is valid")
}

/// Flat axis-aligned unit square in `z = 0`, `n x n` cells.
pub fn square(n: usize) -> TriangleMesh {
    grid_sheet(n, |_, _| 0.0)
}

/// A fixed rotation in general position with respect to the grid axes.
pub fn generic_rotation() -> nalgebra::Matrix3<f64> {
    rotation_from_quaternion([0.9, 0.3, 0.2, 0.25])
}

fn sheet_height(u: f64, v: f64) -> f64 {
    use std::f64::consts::PI;
    0.12 * (PI * u).sin() * (PI * v).sin() + 0.05 * (2.0 * PI * u).cos() * (PI * v).cos()
}

/// Two identical curved sheets stacked `gap` apart, rotated into general
/// position. Both are `n x n` grids over a unit square.
pub fn two_sheets(n: usize, gap: f64) -> TriangleMesh {
    let a = grid_sheet(n, sheet_height);
    let mut b = a.clone();
    b.vertices.iter_mut().for_each(|p| p.z += gap);
    TriangleMesh::merge(&[a, b]).rotated(&generic_rotation())
}

/// Single curved sheet with the same shape as one layer of [`two_sheets`].
pub fn curved_sheet(n: usize) -> TriangleMesh {
    grid_sheet(n, sheet_height).rotated(&generic_rotation())
}

/// Genus-0 blob: an icosphere with smooth radial lobes.
pub fn blob(subdivisions: usize) -> TriangleMesh {
    let lobes = [
        (Vec3::new(1.0, 0.2, 0.1), 0.45),
        (Vec3::new(-0.6, 0.8, -0.1), 0.3),
        (Vec3::new(0.1, -0.5, 0.9), 0.35),
        (Vec3::new(-0.3, -0.7, -0.8), 0.25),
    ];
    let mut m = icosphere(subdivisions);
    for p in m.vertices.iter_mut() {
        let d = *p;
        let r: f64 = 1.0
            + lobes
                .iter()
                .map(|(c, a)| a * (-(d - c.normalize()).norm_squared() / (2.0 * 0.35 * 0.35)).exp())
                .sum::<f64>();
        *p = d * r;
    }
    m
}

/// Two ellipsoidal "hemispheres" facing each other across a thin gap
/// at `x = 0`.
pub fn two_hemispheres(subdivisions: usize, gap: f64) -> TriangleMesh {
    let axes = Vec3::new(0.45, 1.0, 0.8);
    let half = |sign: f64| {
        let mut m = icosphere(subdivisions);
        for p in m.vertices.iter_mut() {
            *p = p.component_mul(&axes) + Vec3::new(sign * (axes.x + gap / 2.0), 0.0, 0.0);
        }
        m
    };
    TriangleMesh::merge(&[half(-1.0), half(1.0)]).rotated(&generic_rotation())
}

/// `n^3` unit spheres on a lattice with the given center spacing.
pub fn sphere_lattice(n: usize, subdivisions: usize, spacing: f64) -> TriangleMesh {
    let base = icosphere(subdivisions);
    let mut parts = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let mut s = base.clone();
                let off = Vec3::new(i as f64, j as f64, k as f64) * spacing;
                s.vertices.iter_mut().for_each(|p| *p += off);
                parts.push(s);
            }
        }
    }
    TriangleMesh::merge(&parts).rotated(&generic_rotation())
}

/// Torus with major radius `big` and minor radius `small`.
pub fn torus(nu: usize, nv: usize, big: f64, small: f64) -> TriangleMesh {
    use std::f64::consts::TAU;
    let mut vertices = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            let (u, v) = (TAU * i as f64 / nu as f64, TAU * j as f64 / nv as f64);
            vertices.push(Vec3::new(
                (big + small * v.cos()) * u.cos(),
                (big + small * v.cos()) * u.sin(),
                small * v.sin(),
            ));
        }
    }
    let idx = |i: usize, j: usize| ((j % nv) * nu + (i % nu)) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("torus topology is valid").rotated(&generic_rotation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::connected_components;

    #[test]
    fn counts() {
        assert_eq!(icosphere(4).vertex_count(), 2562);
        assert_eq!(cube_lattice(3, 1.0).face_count(), 27 * 12);
        assert_eq!(connected_components(&two_sheets(8, 0.01)).len(), 2);
        assert_eq!(connected_components(&sphere_lattice(2, 1, 3.0)).len(), 8);
        assert_eq!(connected_components(&two_hemispheres(2, 0.01)).len(), 2);
        assert_eq!(connected_components(&torus(16, 8, 1.0, 0.3)).len(), 1);
    }

    #[test]
    fn cube_is_outward_oriented() {
        let c = cube(Vec3::zeros(), 1.0);
        let center = Vec3::repeat(0.5);
        for f in 0..c.face_count() {
            let [a, b, cc] = c.triangle(f);
            let centroid = (a + b + cc) / 3.0;
            assert!(c.face_normal(f).dot(&(centroid - center)) > 0.0);
        }
        assert!((c.total_area() - 6.0).abs() < 1e-14);
    }
}
