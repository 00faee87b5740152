//! Regular grid hierarchy over the unit cube and the per-voxel fragments of
//! the mesh at every level.

mod forest;

pub use forest::{mesh_hash, FragmentForest, FragmentLevel, Fragment, NO_PARENT};

use smallvec::SmallVec;

use crate::geometry::{clip_polygon_to_box, polygon_area, Aabb, Polygon, Vec3};

/// Deepest grid supported; corner coordinates stay far below `u32::MAX`.
pub const MAX_DEPTH: u32 = 10;

/// Polygons with less area than this are treated as empty.
pub const ZERO_AREA: f64 = 1e-14;

/// Integer voxel or corner coordinates `(x, y, z)`.
pub type Cell = [u32; 3];

/// One level of the grid hierarchy: `2^depth` voxels per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridLevel {
    pub depth: u32,
}

impl GridLevel {
    pub fn new(depth: u32) -> Self {
        assert!(depth <= MAX_DEPTH, "grid depth {depth} exceeds {MAX_DEPTH}");
        Self { depth }
    }

    /// Voxels per axis.
    pub fn resolution(&self) -> u32 {
        1 << self.depth
    }

    pub fn voxel_count(&self) -> u64 {
        (self.resolution() as u64).pow(3)
    }

    pub fn corner_count(&self) -> u64 {
        (self.resolution() as u64 + 1).pow(3)
    }

    pub fn voxel_box(&self, v: Cell) -> Aabb {
        let h = 1.0 / self.resolution() as f64;
        let min = Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64) * h;
        Aabb::new(min, min + Vec3::repeat(h))
    }

    pub fn corner_position(&self, k: Cell) -> Vec3 {
        Vec3::new(k[0] as f64, k[1] as f64, k[2] as f64) / self.resolution() as f64
    }

    /// z-major linear key; sorting by it orders voxels by (z, y, x).
    pub fn voxel_key(&self, v: Cell) -> u64 {
        let n = self.resolution() as u64;
        (v[2] as u64 * n + v[1] as u64) * n + v[0] as u64
    }

    /// z-major linear key over the `(N+1)^3` corners.
    pub fn corner_key(&self, k: Cell) -> u64 {
        let n = self.resolution() as u64 + 1;
        (k[2] as u64 * n + k[1] as u64) * n + k[0] as u64
    }

    pub fn corner_from_key(&self, key: u64) -> Cell {
        let n = self.resolution() as u64 + 1;
        [(key % n) as u32, ((key / n) % n) as u32, (key / (n * n)) as u32]
    }

    /// Voxel containing `p`, clamped into the grid.
    pub fn voxel_of(&self, p: &Vec3) -> Cell {
        let n = self.resolution();
        let f = |x: f64| ((x * n as f64).floor().max(0.0) as u32).min(n - 1);
        [f(p.x), f(p.y), f(p.z)]
    }

    /// The 8 corners of voxel `v`; slot `s` has offset `(s & 1, s >> 1 & 1, s >> 2 & 1)`.
    pub fn voxel_corners(&self, v: Cell) -> [Cell; 8] {
        std::array::from_fn(|s| corner_of_slot(v, s))
    }
}

/// Corner of voxel `v` at local slot `s`.
pub fn corner_of_slot(v: Cell, s: usize) -> Cell {
    [v[0] + (s & 1) as u32, v[1] + ((s >> 1) & 1) as u32, v[2] + ((s >> 2) & 1) as u32]
}

/// Voxels incident to corner `k`: 8 in the interior, fewer on the domain
/// boundary. Ordered z-major.
pub fn corner_support_voxels(k: Cell, level: GridLevel) -> SmallVec<[Cell; 8]> {
    let n = level.resolution();
    let range = |c: u32| (c.saturating_sub(1))..=(c.min(n - 1));
    let mut out = SmallVec::new();
    for z in range(k[2]) {
        for y in range(k[1]) {
            for x in range(k[0]) {
                out.push([x, y, z]);
            }
        }
    }
    out
}

/// Part of the triangle inside the closed voxel box, or `None` when that
/// part has no area. Vertex order follows the triangle's orientation.
pub fn clip_triangle_to_voxel(triangle: &[Vec3; 3], voxel_box: &Aabb) -> Option<Polygon> {
    let poly = clip_polygon_to_box(triangle, voxel_box, 0.0);
    (poly.len() >= 3 && polygon_area(&poly) >= ZERO_AREA).then_some(poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::polygon_normal;
    use rand::{Rng, SeedableRng};

    #[test]
    fn support_voxel_counts() {
        let l = GridLevel::new(2);
        assert_eq!(corner_support_voxels([2, 2, 2], l).len(), 8);
        assert_eq!(corner_support_voxels([0, 0, 0], l).len(), 1);
        assert_eq!(corner_support_voxels([4, 4, 4], l).as_slice(), &[[3, 3, 3]]);
        assert_eq!(corner_support_voxels([0, 2, 2], l).len(), 4);
        assert_eq!(corner_support_voxels([0, 0, 2], l).len(), 2);
    }

    #[test]
    fn keys_round_trip() {
        let l = GridLevel::new(3);
        assert_eq!(l.corner_count(), 729);
        for key in [0u64, 5, 81, 728] {
            assert_eq!(l.corner_key(l.corner_from_key(key)), key);
        }
        assert_eq!(l.voxel_of(&Vec3::new(1.0, 0.0, 0.5)), [7, 0, 4]);
    }

    #[test]
    fn clip_inside_and_outside() {
        let b = Aabb::new(Vec3::zeros(), Vec3::repeat(1.0));
        let tri = [Vec3::new(0.1, 0.1, 0.5), Vec3::new(0.9, 0.1, 0.5), Vec3::new(0.5, 0.9, 0.5)];
        let p = clip_triangle_to_voxel(&tri, &b).unwrap();
        assert_eq!(p.as_slice(), &tri);
        let far = tri.map(|v| v + Vec3::new(3.0, 0.0, 0.0));
        assert!(clip_triangle_to_voxel(&far, &b).is_none());
    }

    #[test]
    fn clip_diagonal_plane_matches_monte_carlo() {
        // large triangle in the plane x + y = 1 slicing the unit box
        let tri = [Vec3::new(1.5, -0.5, -0.4), Vec3::new(-0.5, 1.5, -0.4), Vec3::new(0.5, 0.5, 5.0)];
        let b = Aabb::new(Vec3::zeros(), Vec3::repeat(1.0));
        let poly = clip_triangle_to_voxel(&tri, &b).unwrap();
        assert_eq!(poly.len(), 4);
        assert!(polygon_normal(&poly).dot(&polygon_normal(&tri)) > 0.0);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples = 1_000_000;
        let mut inside = 0usize;
        for _ in 0..samples {
            let (mut s, mut t): (f64, f64) = (rng.gen(), rng.gen());
            if s + t > 1.0 {
                s = 1.0 - s;
                t = 1.0 - t;
            }
            let p = tri[0] + (tri[1] - tri[0]) * s + (tri[2] - tri[0]) * t;
            inside += b.contains(&p, 0.0) as usize;
        }
        let estimate = polygon_area(&tri) * inside as f64 / samples as f64;
        let area = polygon_area(&poly);
        assert!((area - estimate).abs() <= 0.01 * area, "{area} vs {estimate}");
        // the slab of x + y = 1 inside the unit cube is a sqrt(2) x 1 rectangle
        assert!((area - 2f64.sqrt()).abs() < 1e-12);
    }
}
