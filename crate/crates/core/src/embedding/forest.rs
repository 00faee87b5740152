use std::ops::Range;
use std::path::Path;

use super::{Cell, GridLevel, MAX_DEPTH, ZERO_AREA};
use crate::error::{Error, Result};
use crate::geometry::{polygon_area, split_polygon, Polygon, Vec3};
use crate::mesh::TriangleMesh;

/// Parent id of fragments at the coarsest level.
pub const NO_PARENT: u32 = u32::MAX;

const MAGIC: &[u8; 4] = b"GFF1";

/// A planar convex piece `face ∩ voxel`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub voxel: Cell,
    pub face: u32,
    /// Fragment id one level coarser, or [`NO_PARENT`].
    pub parent: u32,
    pub polygon: Polygon,
}

impl Fragment {
    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon)
    }
}

/// All fragments of one grid level, sorted by (z-major voxel key, face).
/// Each (face, voxel) pair occurs at most once.
#[derive(Debug, Clone)]
pub struct FragmentLevel {
    pub grid: GridLevel,
    fragments: Vec<Fragment>,
    voxels: Vec<Cell>,
    voxel_keys: Vec<u64>,
    voxel_start: Vec<u32>,
}

impl FragmentLevel {
    fn from_unsorted(grid: GridLevel, mut fragments: Vec<Fragment>) -> Self {
        fragments.sort_by_key(|f| (grid.voxel_key(f.voxel), f.face));
        let mut voxels = Vec::new();
        let mut voxel_keys = Vec::new();
        let mut voxel_start = Vec::new();
        for (i, f) in fragments.iter().enumerate() {
            let key = grid.voxel_key(f.voxel);
            if voxel_keys.last() != Some(&key) {
                voxels.push(f.voxel);
                voxel_keys.push(key);
                voxel_start.push(i as u32);
            }
        }
        voxel_start.push(fragments.len() as u32);
        Self { grid, fragments, voxels, voxel_keys, voxel_start }
    }

    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn fragment(&self, id: usize) -> &Fragment {
        &self.fragments[id]
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    /// Voxels holding at least one fragment, z-major order.
    pub fn occupied_voxels(&self) -> &[Cell] {
        &self.voxels
    }

    /// Fragment id range of the `i`-th occupied voxel.
    pub fn occupied_range(&self, i: usize) -> Range<usize> {
        self.voxel_start[i] as usize..self.voxel_start[i + 1] as usize
    }

    /// Fragment id range of voxel `v` (empty when unoccupied).
    pub fn voxel_fragments(&self, v: Cell) -> Range<usize> {
        match self.voxel_keys.binary_search(&self.grid.voxel_key(v)) {
            Ok(i) => self.occupied_range(i),
            Err(_) => 0..0,
        }
    }

    pub fn total_area(&self) -> f64 {
        self.fragments.iter().map(Fragment::area).sum()
    }
}

/// Fragments of a mesh at every depth in `[min_depth, max_depth]`.
///
/// The coarsest level clips whole triangles; every finer fragment is a piece
/// of its parent, so containment across levels holds exactly.
#[derive(Debug, Clone)]
pub struct FragmentForest {
    min_depth: u32,
    max_depth: u32,
    levels: Vec<FragmentLevel>,
}

/// Splits at `x[axis] = c`; a polygon lying in the plane goes to the upper side.
fn split_attributed(poly: &[Vec3], axis: usize, c: f64) -> (Polygon, Polygon) {
    if poly.iter().all(|p| p[axis] == c) {
        return (Polygon::new(), poly.iter().copied().collect());
    }
    split_polygon(poly, axis, c)
}

/// Cuts `poly` along the grid planes of resolution `n` into per-voxel pieces,
/// restricting voxel indices to `lo..=hi` per axis.
fn split_into_cells(poly: &[Vec3], n: u32, lo: Cell, hi: Cell, out: &mut Vec<(Cell, Polygon)>) {
    let h = n as f64;
    let mut pieces: Vec<(Cell, Polygon)> = vec![(lo, poly.iter().copied().collect())];
    for axis in 0..3 {
        let mut next = Vec::with_capacity(pieces.len() * 2);
        for (cell, p) in pieces {
            let (mn, mx) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v[axis]), b.max(v[axis])));
            let clamp = |x: f64| ((x * h).floor().max(0.0) as u32).clamp(lo[axis], hi[axis]);
            let (i0, i1) = (clamp(mn), clamp(mx));
            let mut rest = p;
            let mut i = i0;
            while i < i1 {
                let (lower, upper) = split_attributed(&rest, axis, (i + 1) as f64 / h);
                if lower.len() >= 3 {
                    let mut c = cell;
                    c[axis] = i;
                    next.push((c, lower));
                }
                rest = upper;
                if rest.len() < 3 {
                    break;
                }
                i += 1;
            }
            if rest.len() >= 3 {
                let mut c = cell;
                c[axis] = i;
                next.push((c, rest));
            }
        }
        pieces = next;
    }
    out.extend(pieces.into_iter().filter(|(_, p)| polygon_area(p) >= ZERO_AREA));
}

impl FragmentForest {
    /// Builds all levels for a mesh already normalized into the unit cube.
    /// Degenerate faces contribute no fragments.
    pub fn build(mesh: &TriangleMesh, min_depth: u32, max_depth: u32) -> Result<Self> {
        if min_depth > max_depth || max_depth > MAX_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= min_depth <= max_depth <= {MAX_DEPTH}, got {min_depth}..{max_depth}"
            )));
        }
        let degenerate = mesh.degenerate_faces();
        let grid = GridLevel::new(min_depth);
        let n = grid.resolution();
        let mut fragments = Vec::new();
        let mut pieces = Vec::new();
        for f in 0..mesh.face_count() {
            if degenerate[f] {
                continue;
            }
            pieces.clear();
            split_into_cells(&mesh.triangle(f), n, [0; 3], [n - 1; 3], &mut pieces);
            fragments.extend(pieces.drain(..).map(|(voxel, polygon)| Fragment {
                voxel,
                face: f as u32,
                parent: NO_PARENT,
                polygon,
            }));
        }
        let mut levels = vec![FragmentLevel::from_unsorted(grid, fragments)];

        for depth in min_depth + 1..=max_depth {
            let coarse = levels.last().expect("at least one level");
            let grid = GridLevel::new(depth);
            let n = grid.resolution();
            let mut fragments = Vec::with_capacity(coarse.len() * 2);
            for (id, parent) in coarse.fragments().iter().enumerate() {
                let lo = parent.voxel.map(|c| 2 * c);
                let hi = lo.map(|c| c + 1);
                pieces.clear();
                split_into_cells(&parent.polygon, n, lo, hi, &mut pieces);
                fragments.extend(pieces.drain(..).map(|(voxel, polygon)| Fragment {
                    voxel,
                    face: parent.face,
                    parent: id as u32,
                    polygon,
                }));
            }
            levels.push(FragmentLevel::from_unsorted(grid, fragments));
        }
        Ok(Self { min_depth, max_depth, levels })
    }

    pub fn min_depth(&self) -> u32 {
        self.min_depth
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn level(&self, depth: u32) -> &FragmentLevel {
        assert!(
            (self.min_depth..=self.max_depth).contains(&depth),
            "depth {depth} outside forest range {}..={}",
            self.min_depth,
            self.max_depth
        );
        &self.levels[(depth - self.min_depth) as usize]
    }

    pub fn levels(&self) -> &[FragmentLevel] {
        &self.levels
    }

    /// Little-endian serialization; identical forests give identical bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.min_depth.to_le_bytes());
        out.extend_from_slice(&self.max_depth.to_le_bytes());
        for level in &self.levels {
            out.extend_from_slice(&(level.len() as u64).to_le_bytes());
            for f in level.fragments() {
                for c in f.voxel {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                out.extend_from_slice(&f.face.to_le_bytes());
                out.extend_from_slice(&f.parent.to_le_bytes());
                out.push(f.polygon.len() as u8);
                for p in &f.polygon {
                    for x in p.iter() {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
        out
    }

    /// Inverse of [`to_bytes`](Self::to_bytes); `None` on malformed input.
    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return None;
        }
        let min_depth = r.u32()?;
        let max_depth = r.u32()?;
        if min_depth > max_depth || max_depth > MAX_DEPTH {
            return None;
        }
        let mut levels = Vec::new();
        for depth in min_depth..=max_depth {
            let count = r.u64()? as usize;
            let mut fragments = Vec::with_capacity(count.min(bytes.len()));
            for _ in 0..count {
                let voxel = [r.u32()?, r.u32()?, r.u32()?];
                let face = r.u32()?;
                let parent = r.u32()?;
                let len = r.take(1)?[0] as usize;
                let mut polygon = Polygon::new();
                for _ in 0..len {
                    polygon.push(Vec3::new(r.f64()?, r.f64()?, r.f64()?));
                }
                fragments.push(Fragment { voxel, face, parent, polygon });
            }
            levels.push(FragmentLevel::from_unsorted(GridLevel::new(depth), fragments));
        }
        (r.pos == bytes.len()).then_some(Self { min_depth, max_depth, levels })
    }

    /// Reads the forest from `cache_dir` when a matching file exists,
    /// otherwise builds it and tries to store it there.
    pub fn load_or_build(cache_dir: &Path, mesh: &TriangleMesh, min_depth: u32, max_depth: u32, pad: f64) -> Result<Self> {
        let name = format!("forest-{:016x}-{min_depth}-{max_depth}-{:016x}.bin", mesh_hash(mesh), pad.to_bits());
        let path = cache_dir.join(name);
        if let Ok(bytes) = std::fs::read(&path) {
            match Self::from_bytes(&bytes) {
                Some(f) if f.min_depth == min_depth && f.max_depth == max_depth => return Ok(f),
                _ => log::warn!("ignoring unreadable forest cache {}", path.display()),
            }
        }
        let forest = Self::build(mesh, min_depth, max_depth)?;
        if let Err(e) = std::fs::create_dir_all(cache_dir).and_then(|_| std::fs::write(&path, forest.to_bytes())) {
            log::warn!("could not write forest cache {}: {e}", path.display());
        }
        Ok(forest)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

/// FNV-1a over vertex coordinates and face indices.
pub fn mesh_hash(mesh: &TriangleMesh) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for v in &mesh.vertices {
        for x in v.iter() {
            eat(&x.to_le_bytes());
        }
    }
    for f in &mesh.faces {
        for i in f {
            eat(&i.to_le_bytes());
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::clip_triangle_to_voxel;
    use crate::mesh::normalize;
    use crate::models;
    use proptest::prelude::*;

    fn single(tri: [Vec3; 3]) -> TriangleMesh {
        TriangleMesh::new(tri.to_vec(), vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn depth_zero_has_one_fragment_per_face() {
        let (m, _) = normalize(&models::icosphere(1), 0.05).unwrap();
        let forest = FragmentForest::build(&m, 0, 0).unwrap();
        let level = forest.level(0);
        assert_eq!(level.len(), m.face_count());
        assert_eq!(level.occupied_voxels(), &[[0, 0, 0]]);
    }

    #[test]
    fn small_triangle_forms_parent_chain() {
        let m = single([Vec3::new(0.01, 0.01, 0.01), Vec3::new(0.02, 0.01, 0.01), Vec3::new(0.01, 0.02, 0.01)]);
        let forest = FragmentForest::build(&m, 1, 5).unwrap();
        let mut chain = 0;
        for depth in 1..=5 {
            let level = forest.level(depth);
            assert_eq!(level.len(), 1);
            assert_eq!(level.fragment(0).voxel, [0, 0, 0]);
            let expected_parent = if depth == 1 { NO_PARENT } else { 0 };
            assert_eq!(level.fragment(0).parent, expected_parent);
            chain += 1;
        }
        assert_eq!(chain, 5);
    }

    #[test]
    fn spanning_triangle_matches_direct_clipping() {
        let tri = [Vec3::new(0.05, 0.1, 0.2), Vec3::new(0.9, 0.3, 0.1), Vec3::new(0.4, 0.95, 0.85)];
        let forest = FragmentForest::build(&single(tri), 1, 3).unwrap();
        for depth in 1..=3 {
            let level = forest.level(depth);
            let n = level.grid.resolution();
            let mut expected = Vec::new();
            for z in 0..n {
                for y in 0..n {
                    for x in 0..n {
                        if let Some(p) = clip_triangle_to_voxel(&tri, &level.grid.voxel_box([x, y, z])) {
                            expected.push(([x, y, z], polygon_area(&p)));
                        }
                    }
                }
            }
            assert_eq!(level.len(), expected.len());
            for (f, (v, a)) in level.fragments().iter().zip(&expected) {
                assert_eq!(f.voxel, *v);
                assert!((f.area() - a).abs() < 1e-12);
            }
            assert!((level.total_area() - polygon_area(&tri)).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_levels_tile_and_nest() {
        let (m, _) = normalize(&models::icosphere(3), 0.05).unwrap();
        let forest = FragmentForest::build(&m, 2, 5).unwrap();
        let area = m.total_area();
        for depth in 2..=5 {
            let level = forest.level(depth);
            assert!((level.total_area() - area).abs() <= 1e-6 * area);
            for f in level.fragments() {
                let b = level.grid.voxel_box(f.voxel);
                assert!(f.polygon.iter().all(|p| b.contains(p, 1e-9)));
                let [a, bb, c] = m.triangle(f.face as usize);
                let normal = (bb - a).cross(&(c - a)).normalize();
                assert!(f.polygon.iter().all(|p| (p - a).dot(&normal).abs() < 1e-9));
            }
            if depth > 2 {
                let coarse = forest.level(depth - 1);
                let mut child_area = vec![0.0; coarse.len()];
                for f in level.fragments() {
                    let p = coarse.fragment(f.parent as usize);
                    assert_eq!(p.face, f.face);
                    assert_eq!(p.voxel, f.voxel.map(|c| c / 2));
                    child_area[f.parent as usize] += f.area();
                }
                for (p, a) in coarse.fragments().iter().zip(&child_area) {
                    assert!((p.area() - a).abs() <= 1e-9 * p.area().max(1e-12));
                }
            }
        }
    }

    #[test]
    fn geometry_on_grid_planes_is_counted_once() {
        let mut sq = models::square(3);
        for p in sq.vertices.iter_mut() {
            *p = Vec3::new(0.25 + 0.5 * p.x, 0.25 + 0.5 * p.y, 0.5);
        }
        let forest = FragmentForest::build(&sq, 0, 4).unwrap();
        for level in forest.levels() {
            assert!((level.total_area() - 0.25).abs() < 1e-14);
            let n = level.grid.resolution();
            assert!(level.fragments().iter().all(|f| f.voxel[2] == n / 2));
        }
    }

    #[test]
    fn serialization_round_trips_and_is_deterministic() {
        let (m, _) = normalize(&models::cube_lattice(2, 0.5), 0.05).unwrap();
        let a = FragmentForest::build(&m, 1, 4).unwrap();
        let b = FragmentForest::build(&m, 1, 4).unwrap();
        let bytes = a.to_bytes();
        assert_eq!(bytes, b.to_bytes());
        let c = FragmentForest::from_bytes(&bytes).unwrap();
        assert_eq!(c.to_bytes(), bytes);
        assert_eq!(c.level(3).occupied_voxels(), a.level(3).occupied_voxels());
        assert!(FragmentForest::from_bytes(&bytes[..bytes.len() - 1]).is_none());
    }

    #[test]
    fn cache_reuses_stored_forest() {
        let dir = tempfile::tempdir().unwrap();
        let (m, _) = normalize(&models::icosphere(1), 0.05).unwrap();
        let a = FragmentForest::load_or_build(dir.path(), &m, 0, 3, 0.05).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let b = FragmentForest::load_or_build(dir.path(), &m, 0, 3, 0.05).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn rejects_bad_depth_range() {
        let m = single([Vec3::new(0.1, 0.1, 0.1), Vec3::new(0.2, 0.1, 0.1), Vec3::new(0.1, 0.2, 0.1)]);
        assert!(FragmentForest::build(&m, 3, 2).is_err());
        assert!(FragmentForest::build(&m, 0, 11).is_err());
    }

    fn point() -> impl Strategy<Value = Vec3> {
        (0.05..0.95f64, 0.05..0.95f64, 0.05..0.95f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_triangle_area_is_conserved(a in point(), b in point(), c in point()) {
            let area = crate::geometry::triangle_area(&a, &b, &c);
            prop_assume!(area > 1e-4);
            let forest = FragmentForest::build(&single([a, b, c]), 0, 4).unwrap();
            for level in forest.levels() {
                prop_assert!((level.total_area() - area).abs() <= 1e-9 * area);
            }
        }
    }
}
