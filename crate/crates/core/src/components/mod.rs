//! Connected components of the surface inside voxels and inside B-spline
//! supports, and the basis numbering of both function spaces.
//!
//! Connectivity is mesh connectivity: two fragments are joined only through
//! a mesh vertex, edge or face they share, never by spatial proximity.

use std::collections::{BTreeMap, HashMap};

use crate::embedding::{corner_support_voxels, Cell, Fragment, FragmentForest, FragmentLevel, GridLevel};
use crate::geometry::{polygon_touches_box, segment_touches_box, Aabb, TOUCH_EPS};
use crate::mesh::TriangleMesh;
use crate::union_find::UnionFind;
use crate::Mode;

/// Marks a (fragment, corner) pair on which the corner's spline is identically zero.
pub const NONE: u32 = u32::MAX;

/// Local slot of corner `k` in voxel `v`.
fn slot_of(k: Cell, v: Cell) -> usize {
    ((k[0] - v[0]) + 2 * (k[1] - v[1]) + 4 * (k[2] - v[2])) as usize
}

/// True when the fragment lies in the voxel face opposite to the corner at
/// `slot`, where that corner's spline vanishes.
pub fn vanishes_on(grid: GridLevel, frag: &Fragment, slot: usize) -> bool {
    let n = grid.resolution() as f64;
    (0..3).any(|a| {
        let far = if (slot >> a) & 1 == 1 { frag.voxel[a] } else { frag.voxel[a] + 1 } as f64 / n;
        frag.polygon.iter().all(|p| p[a] == far)
    })
}

/// Mesh simplex through which two fragments may be connected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Simplex {
    Vertex(u32),
    Edge(u32, u32),
    Face(u32),
}

/// Simplices of `face` meeting the closed box. Edges are listed only when
/// neither endpoint is in the box; the face itself when `face_touches`.
fn touching_simplices(mesh: &TriangleMesh, face: u32, b: &Aabb, face_touches: bool, out: &mut Vec<Simplex>) {
    let f = mesh.faces[face as usize];
    let inside = f.map(|v| b.contains(&mesh.vertices[v as usize], TOUCH_EPS));
    for i in 0..3 {
        if inside[i] {
            out.push(Simplex::Vertex(f[i]));
        }
    }
    for i in 0..3 {
        let (a, c) = (f[i], f[(i + 1) % 3]);
        if !inside[i]
            && !inside[(i + 1) % 3]
            && segment_touches_box(&mesh.vertices[a as usize], &mesh.vertices[c as usize], b, TOUCH_EPS)
        {
            out.push(Simplex::Edge(a.min(c), a.max(c)));
        }
    }
    if face_touches {
        out.push(Simplex::Face(face));
    }
}

/// Voxel and corner components of one grid level.
#[derive(Debug, Clone)]
pub struct ComponentTable {
    pub grid: GridLevel,
    /// Voxel-component id per fragment; ids grow with the first member fragment.
    fragment_vc: Vec<u32>,
    /// First voxel-component id of each occupied voxel, plus a sentinel.
    voxel_vc_start: Vec<u32>,
    /// Symmetric adjacency between voxel components of neighboring voxels.
    link_start: Vec<u32>,
    links: Vec<u32>,
    /// Active corner keys, ascending, with their component counts.
    corner_keys: Vec<u64>,
    corner_counts: Vec<u32>,
    /// Per fragment and local corner slot, the ordinal of the corner
    /// component containing the fragment, or [`NONE`] where the spline vanishes.
    fragment_ordinal: Vec<[u32; 8]>,
    fragment_voxel: Vec<Cell>,
}

impl ComponentTable {
    pub fn build(mesh: &TriangleMesh, level: &FragmentLevel) -> Self {
        let grid = level.grid;
        let (fragment_vc, voxel_vc_start) = voxel_components(mesh, level);
        let vc_count = *voxel_vc_start.last().unwrap_or(&0) as usize;
        let (link_start, links) = voxel_component_links(mesh, level, &fragment_vc, vc_count);

        let mut corner_keys: Vec<u64> = level
            .occupied_voxels()
            .iter()
            .flat_map(|&v| grid.voxel_corners(v).map(|k| grid.corner_key(k)))
            .collect();
        corner_keys.sort_unstable();
        corner_keys.dedup();

        let mut table = Self {
            grid,
            fragment_vc,
            voxel_vc_start,
            link_start,
            links,
            corner_counts: Vec::with_capacity(corner_keys.len()),
            corner_keys,
            fragment_ordinal: vec![[u32::MAX; 8]; level.len()],
            fragment_voxel: level.fragments().iter().map(|f| f.voxel).collect(),
        };
        let mut local: Vec<u32> = Vec::new();
        let mut support: Vec<(Cell, usize)> = Vec::new();
        for ci in 0..table.corner_keys.len() {
            let k = grid.corner_from_key(table.corner_keys[ci]);
            support.clear();
            local.clear();
            for v in corner_support_voxels(k, grid) {
                if let Ok(vi) = level.occupied_voxels().binary_search_by_key(&grid.voxel_key(v), |&w| grid.voxel_key(w)) {
                    support.push((v, vi));
                    local.extend(table.voxel_vc_start[vi]..table.voxel_vc_start[vi + 1]);
                }
            }
            let mut uf = UnionFind::new(local.len());
            for (i, &vc) in local.iter().enumerate() {
                let (s, e) = (table.link_start[vc as usize] as usize, table.link_start[vc as usize + 1] as usize);
                for &other in &table.links[s..e] {
                    if let Ok(j) = local.binary_search(&other) {
                        uf.union(i, j);
                    }
                }
            }
            let (labels, count) = uf.labels();
            // components whose fragments all see b_k == 0 get no ordinal
            let mut renumber = vec![NONE; count];
            for &(v, vi) in &support {
                let slot = slot_of(k, v);
                for f in level.occupied_range(vi) {
                    if !vanishes_on(grid, level.fragment(f), slot) {
                        let pos = local.binary_search(&table.fragment_vc[f]).expect("fragment component is local");
                        renumber[labels[pos] as usize] = 0;
                    }
                }
            }
            let mut used = 0u32;
            for r in renumber.iter_mut().filter(|r| **r == 0) {
                *r = used;
                used += 1;
            }
            table.corner_counts.push(used);
            for &(v, vi) in &support {
                let slot = slot_of(k, v);
                for f in level.occupied_range(vi) {
                    if !vanishes_on(grid, level.fragment(f), slot) {
                        let pos = local.binary_search(&table.fragment_vc[f]).expect("fragment component is local");
                        table.fragment_ordinal[f][slot] = renumber[labels[pos] as usize];
                    }
                }
            }
        }
        let keep: Vec<bool> = table.corner_counts.iter().map(|&c| c > 0).collect();
        let mut it = keep.iter();
        table.corner_keys.retain(|_| *it.next().unwrap());
        table.corner_counts.retain(|&c| c > 0);
        table
    }

    /// One table per level of the forest, coarsest first.
    pub fn build_all(mesh: &TriangleMesh, forest: &FragmentForest) -> Vec<Self> {
        forest.levels().iter().map(|l| Self::build(mesh, l)).collect()
    }

    pub fn voxel_component_count(&self) -> usize {
        *self.voxel_vc_start.last().unwrap_or(&0) as usize
    }

    /// Number of components inside the `i`-th occupied voxel.
    pub fn components_in_voxel(&self, i: usize) -> usize {
        (self.voxel_vc_start[i + 1] - self.voxel_vc_start[i]) as usize
    }

    /// Voxel component of a fragment, numbered level-wide.
    pub fn fragment_voxel_component(&self, f: usize) -> u32 {
        self.fragment_vc[f]
    }

    pub fn active_corner_count(&self) -> usize {
        self.corner_keys.len()
    }

    /// Active corners (support meets the surface) with their component counts.
    pub fn corners(&self) -> impl Iterator<Item = (Cell, u32)> + '_ {
        self.corner_keys.iter().zip(&self.corner_counts).map(|(&key, &c)| (self.grid.corner_from_key(key), c))
    }

    /// Number of components of the corner's support; 0 for inactive corners.
    pub fn component_count(&self, k: Cell) -> u32 {
        self.corner_keys.binary_search(&self.grid.corner_key(k)).map_or(0, |i| self.corner_counts[i])
    }

    /// Component ordinal of fragment `f` with respect to the corner at local
    /// slot `slot`; [`NONE`] when that corner's spline vanishes on the fragment.
    pub fn fragment_ordinal(&self, f: usize, slot: usize) -> u32 {
        self.fragment_ordinal[f][slot]
    }

    /// Histogram of component counts over active corners.
    pub fn component_histogram(&self) -> BTreeMap<u32, usize> {
        let mut h = BTreeMap::new();
        for &c in &self.corner_counts {
            *h.entry(c).or_insert(0) += 1;
        }
        h
    }
}

/// Per-voxel union-find. Returns the component id of every fragment and the
/// first component id per occupied voxel (with a trailing total).
fn voxel_components(mesh: &TriangleMesh, level: &FragmentLevel) -> (Vec<u32>, Vec<u32>) {
    let mut fragment_vc = vec![0u32; level.len()];
    let mut starts = Vec::with_capacity(level.occupied_voxels().len() + 1);
    let mut next = 0u32;
    let mut seen: HashMap<Simplex, usize> = HashMap::new();
    let mut simplices = Vec::new();
    for (vi, &v) in level.occupied_voxels().iter().enumerate() {
        let range = level.occupied_range(vi);
        let b = level.grid.voxel_box(v);
        let mut uf = UnionFind::new(range.len());
        seen.clear();
        for (j, f) in range.clone().enumerate() {
            simplices.clear();
            touching_simplices(mesh, level.fragment(f).face, &b, false, &mut simplices);
            for s in &simplices {
                match seen.get(s) {
                    Some(&i) => {
                        uf.union(i, j);
                    }
                    None => {
                        seen.insert(*s, j);
                    }
                }
            }
        }
        let (labels, count) = uf.labels();
        starts.push(next);
        for (j, f) in range.enumerate() {
            fragment_vc[f] = next + labels[j];
        }
        next += count as u32;
    }
    starts.push(next);
    (fragment_vc, starts)
}

/// Half of the 26-neighborhood: offsets whose z-major key is positive.
fn forward_offsets() -> impl Iterator<Item = [i32; 3]> {
    (-1..=1).flat_map(|z| (-1..=1).flat_map(move |y| (-1..=1).map(move |x| [x, y, z])))
        .filter(|d| (d[2], d[1], d[0]) > (0, 0, 0))
}

/// Links between voxel components of neighboring voxels that share a mesh
/// simplex meeting the common boundary of the two voxels.
fn voxel_component_links(mesh: &TriangleMesh, level: &FragmentLevel, fragment_vc: &[u32], vc_count: usize) -> (Vec<u32>, Vec<u32>) {
    let grid = level.grid;
    let n = grid.resolution() as i64;
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut first: HashMap<Simplex, u32> = HashMap::new();
    let mut simplices = Vec::new();
    for (vi, &v1) in level.occupied_voxels().iter().enumerate() {
        for d in forward_offsets() {
            let c: [i64; 3] = std::array::from_fn(|a| v1[a] as i64 + d[a] as i64);
            if c.iter().any(|&x| x < 0 || x >= n) {
                continue;
            }
            let v2 = c.map(|x| x as u32);
            let r2 = level.voxel_fragments(v2);
            if r2.is_empty() {
                continue;
            }
            let shared = grid.voxel_box(v1).intersection(&grid.voxel_box(v2)).expect("neighbors touch");
            first.clear();
            for f in level.occupied_range(vi) {
                let frag = level.fragment(f);
                simplices.clear();
                let touches = polygon_touches_box(&frag.polygon, &shared, TOUCH_EPS);
                touching_simplices(mesh, frag.face, &shared, touches, &mut simplices);
                for s in &simplices {
                    first.entry(*s).or_insert(fragment_vc[f]);
                }
            }
            if first.is_empty() {
                continue;
            }
            for f in r2 {
                let frag = level.fragment(f);
                simplices.clear();
                let touches = polygon_touches_box(&frag.polygon, &shared, TOUCH_EPS);
                touching_simplices(mesh, frag.face, &shared, touches, &mut simplices);
                for s in &simplices {
                    if let Some(&a) = first.get(s) {
                        pairs.push((a, fragment_vc[f]));
                        pairs.push((fragment_vc[f], a));
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut start = vec![0u32; vc_count + 1];
    for &(a, _) in &pairs {
        start[a as usize + 1] += 1;
    }
    for i in 0..vc_count {
        start[i + 1] += start[i];
    }
    (start, pairs.into_iter().map(|(_, b)| b).collect())
}

/// Dense numbering of the active basis functions of one level.
///
/// Ids are ordered by corner (z, y, x) and then by component ordinal. In
/// unaware mode every active corner has exactly one basis function.
#[derive(Debug, Clone)]
pub struct BasisIndex {
    pub grid: GridLevel,
    pub mode: Mode,
    corners: Vec<Cell>,
    ordinals: Vec<u32>,
    keys: Vec<(u64, u32)>,
    fragment_basis: Vec<[u32; 8]>,
    member_start: Vec<u32>,
    members: Vec<u32>,
}

impl BasisIndex {
    pub fn new(table: &ComponentTable, mode: Mode) -> Self {
        let grid = table.grid;
        let mut corners = Vec::new();
        let mut ordinals = Vec::new();
        let mut keys = Vec::new();
        let mut first_id = Vec::with_capacity(table.corner_keys.len());
        for (&key, &count) in table.corner_keys.iter().zip(&table.corner_counts) {
            first_id.push(corners.len() as u32);
            let count = match mode {
                Mode::Aware => count,
                Mode::Unaware => 1,
            };
            for i in 0..count {
                corners.push(grid.corner_from_key(key));
                ordinals.push(i);
                keys.push((key, i));
            }
        }
        let fragment_basis: Vec<[u32; 8]> = table
            .fragment_ordinal
            .iter()
            .enumerate()
            .map(|(f, ords)| {
                let v = table.fragment_voxel[f];
                std::array::from_fn(|s| {
                    if ords[s] == NONE {
                        return NONE;
                    }
                    let k = crate::embedding::corner_of_slot(v, s);
                    let ci = table.corner_keys.binary_search(&grid.corner_key(k)).expect("fragment corners are active");
                    first_id[ci]
                        + match mode {
                            Mode::Aware => ords[s],
                            Mode::Unaware => 0,
                        }
                })
            })
            .collect();
        let dim = corners.len();
        let mut member_start = vec![0u32; dim + 1];
        for fb in &fragment_basis {
            for &b in fb.iter().filter(|&&b| b != NONE) {
                member_start[b as usize + 1] += 1;
            }
        }
        for i in 0..dim {
            member_start[i + 1] += member_start[i];
        }
        let mut fill = member_start.clone();
        let mut members = vec![0u32; *member_start.last().unwrap_or(&0) as usize];
        for (f, fb) in fragment_basis.iter().enumerate() {
            for &b in fb.iter().filter(|&&b| b != NONE) {
                members[fill[b as usize] as usize] = f as u32;
                fill[b as usize] += 1;
            }
        }
        Self { grid, mode, corners, ordinals, keys, fragment_basis, member_start, members }
    }

    pub fn dim(&self) -> usize {
        self.corners.len()
    }

    pub fn corner(&self, b: usize) -> Cell {
        self.corners[b]
    }

    pub fn ordinal(&self, b: usize) -> u32 {
        self.ordinals[b]
    }

    /// Fragments (ascending ids) on which basis `b` is supported.
    pub fn members(&self, b: usize) -> &[u32] {
        &self.members[self.member_start[b] as usize..self.member_start[b + 1] as usize]
    }

    /// Basis id of each of the 8 corners of the fragment's voxel, by local
    /// slot; [`NONE`] where that spline vanishes on the fragment.
    pub fn fragment_basis(&self, f: usize) -> [u32; 8] {
        self.fragment_basis[f]
    }

    pub fn find(&self, k: Cell, ordinal: u32) -> Option<usize> {
        self.keys.binary_search(&(self.grid.corner_key(k), ordinal)).ok()
    }
}

/// Whether fine component `fine_b` lies in coarse component `coarse_b`: some
/// fragment of the fine one has its parent among the coarse one's fragments.
pub fn chi(coarse: &BasisIndex, fine: &BasisIndex, fine_level: &FragmentLevel, coarse_b: usize, fine_b: usize) -> bool {
    let coarse_members = coarse.members(coarse_b);
    fine.members(fine_b)
        .iter()
        .any(|&f| coarse_members.binary_search(&fine_level.fragment(f as usize).parent).is_ok())
}

/// Basis indices of one mode at every level of a forest, coarsest first.
#[derive(Debug, Clone)]
pub struct FunctionSpace {
    pub mode: Mode,
    min_depth: u32,
    levels: Vec<BasisIndex>,
}

impl FunctionSpace {
    pub fn new(mesh: &TriangleMesh, forest: &FragmentForest, mode: Mode) -> Self {
        Self::from_tables(&ComponentTable::build_all(mesh, forest), forest.min_depth(), mode)
    }

    pub fn from_tables(tables: &[ComponentTable], min_depth: u32, mode: Mode) -> Self {
        Self { mode, min_depth, levels: tables.iter().map(|t| BasisIndex::new(t, mode)).collect() }
    }

    pub fn min_depth(&self) -> u32 {
        self.min_depth
    }

    pub fn max_depth(&self) -> u32 {
        self.min_depth + self.levels.len() as u32 - 1
    }

    pub fn level(&self, depth: u32) -> &BasisIndex {
        &self.levels[(depth - self.min_depth) as usize]
    }

    pub fn levels(&self) -> &[BasisIndex] {
        &self.levels
    }
}

#[cfg(test)]
mod tests;
