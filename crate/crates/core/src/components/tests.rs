use super::*;
use crate::embedding::FragmentForest;
use crate::geometry::Vec3;
use crate::mesh::{connected_components, normalize};
use crate::models;
use proptest::prelude::*;

fn prepared(mesh: &TriangleMesh, min: u32, max: u32) -> (TriangleMesh, FragmentForest, Vec<ComponentTable>) {
    let (m, _) = normalize(mesh, 0.05).unwrap();
    let forest = FragmentForest::build(&m, min, max).unwrap();
    let tables = ComponentTable::build_all(&m, &forest);
    (m, forest, tables)
}

fn face_vertices(mesh: &TriangleMesh, f: u32) -> [u32; 3] {
    mesh.faces[f as usize]
}

/// Definition-level test: faces share a vertex in `b`, or share an edge touching `b`.
fn faces_meet_in(mesh: &TriangleMesh, fa: u32, fb: u32, b: &Aabb) -> bool {
    let (a, c) = (face_vertices(mesh, fa), face_vertices(mesh, fb));
    let shared: Vec<u32> = a.iter().copied().filter(|v| c.contains(v)).collect();
    if shared.iter().any(|&v| b.contains(&mesh.vertices[v as usize], TOUCH_EPS)) {
        return true;
    }
    for i in 0..shared.len() {
        for j in i + 1..shared.len() {
            let (p, q) = (mesh.vertices[shared[i] as usize], mesh.vertices[shared[j] as usize]);
            if segment_touches_box(&p, &q, b, TOUCH_EPS) {
                return true;
            }
        }
    }
    false
}

/// Flood fill over an explicit adjacency predicate; labels ordered by smallest node.
fn flood(n: usize, adjacent: impl Fn(usize, usize) -> bool) -> Vec<u32> {
    let mut label = vec![u32::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != u32::MAX {
            continue;
        }
        let mut stack = vec![s];
        label[s] = next;
        while let Some(u) = stack.pop() {
            for w in 0..n {
                if label[w] == u32::MAX && adjacent(u, w) {
                    label[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    label
}

fn check_voxel_components(mesh: &TriangleMesh, level: &FragmentLevel, table: &ComponentTable) {
    for (vi, &v) in level.occupied_voxels().iter().enumerate() {
        let range = level.occupied_range(vi);
        let frags: Vec<usize> = range.clone().collect();
        let b = level.grid.voxel_box(v);
        let expected = flood(frags.len(), |i, j| {
            faces_meet_in(mesh, level.fragment(frags[i]).face, level.fragment(frags[j]).face, &b)
        });
        let base = table.fragment_voxel_component(range.start);
        let got: Vec<u32> = frags.iter().map(|&f| table.fragment_voxel_component(f) - base).collect();
        assert_eq!(got, expected, "voxel {v:?}");
    }
}

fn check_corner_components(mesh: &TriangleMesh, level: &FragmentLevel, table: &ComponentTable) {
    let grid = level.grid;
    for (k, count) in table.corners() {
        let mut frags = Vec::new();
        for v in corner_support_voxels(k, grid) {
            let slot = ((k[0] - v[0]) + 2 * (k[1] - v[1]) + 4 * (k[2] - v[2])) as usize;
            frags.extend(level.voxel_fragments(v).map(|f| (f, slot)));
        }
        let expected = flood(frags.len(), |i, j| {
            let (a, b) = (level.fragment(frags[i].0), level.fragment(frags[j].0));
            let shared = grid.voxel_box(a.voxel).intersection(&grid.voxel_box(b.voxel)).unwrap();
            if a.face == b.face {
                a.voxel == b.voxel || polygon_touches_box(&a.polygon, &shared, TOUCH_EPS)
            } else {
                faces_meet_in(mesh, a.face, b.face, &shared)
            }
        });
        // components are numbered over fragments on which b_k does not vanish
        let live: Vec<bool> = frags.iter().map(|&(f, s)| !vanishes_on(grid, level.fragment(f), s)).collect();
        let live_labels: std::collections::BTreeSet<u32> =
            expected.iter().zip(&live).filter(|(_, &l)| l).map(|(&e, _)| e).collect();
        let rank: std::collections::BTreeMap<u32, u32> =
            live_labels.iter().enumerate().map(|(r, &l)| (l, r as u32)).collect();
        let expected_live: Vec<u32> = expected
            .iter()
            .zip(&live)
            .filter(|(_, &l)| l)
            .map(|(e, _)| rank[e])
            .collect();
        let got: Vec<u32> = frags
            .iter()
            .zip(&live)
            .filter(|(_, &l)| l)
            .map(|(&(f, s), _)| table.fragment_ordinal(f, s))
            .collect();
        assert_eq!(got, expected_live, "corner {k:?}");
        assert_eq!(count as usize, rank.len());
        for (&(f, s), &l) in frags.iter().zip(&live) {
            if !l {
                assert_eq!(table.fragment_ordinal(f, s), NONE);
            }
        }
    }
}

fn parallel_squares(gap: f64) -> TriangleMesh {
    let place = |z: f64| {
        let mut s = models::square(2);
        s.vertices.iter_mut().for_each(|p| *p = Vec3::new(0.2 + 0.6 * p.x, 0.2 + 0.6 * p.y, z));
        s
    };
    TriangleMesh::merge(&[place(0.3), place(0.3 + gap)])
}

#[test]
fn parallel_squares_split_voxels_and_corners() {
    let m = parallel_squares(0.02);
    let forest = FragmentForest::build(&m, 2, 2).unwrap();
    let level = forest.level(2);
    let table = ComponentTable::build(&m, level);
    for vi in 0..level.occupied_voxels().len() {
        assert_eq!(table.components_in_voxel(vi), 2);
    }
    assert_eq!(table.component_count([2, 2, 1]), 2);
    assert_eq!(table.component_count([2, 2, 2]), 2);
    assert_eq!(table.component_count([0, 0, 0]), 0);
    let aware = BasisIndex::new(&table, Mode::Aware);
    let unaware = BasisIndex::new(&table, Mode::Unaware);
    assert_eq!(aware.dim(), 2 * unaware.dim());
    assert!(aware.find([0, 0, 0], 0).is_none());
    check_corner_components(&m, level, &table);
}

#[test]
fn single_triangle_is_one_component() {
    let m = TriangleMesh::new(
        vec![Vec3::new(0.1, 0.1, 0.1), Vec3::new(0.3, 0.1, 0.2), Vec3::new(0.2, 0.3, 0.15)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let forest = FragmentForest::build(&m, 0, 3).unwrap();
    for level in forest.levels() {
        let table = ComponentTable::build(&m, level);
        assert!((0..level.occupied_voxels().len()).all(|i| table.components_in_voxel(i) == 1));
        assert!(table.corners().all(|(_, c)| c == 1));
    }
}

#[test]
fn cube_lattice_components_match_flood_fill() {
    let (m, forest, tables) = prepared(&models::cube_lattice(3, 1.0), 1, 3);
    let mut multi = 0;
    for (level, table) in forest.levels().iter().zip(&tables) {
        check_voxel_components(&m, level, table);
        check_corner_components(&m, level, table);
        multi += (0..level.occupied_voxels().len()).filter(|&i| table.components_in_voxel(i) >= 2).count();
    }
    assert!(multi > 0);
}

#[test]
fn large_lattice_has_split_voxels_and_larger_aware_space() {
    let (m, forest, tables) = prepared(&models::cube_lattice(6, 1.0), 2, 3);
    let level = forest.level(3);
    check_voxel_components(&m, level, &tables[1]);
    let split = (0..level.occupied_voxels().len()).filter(|&i| tables[1].components_in_voxel(i) >= 2).count();
    assert!(split > 0);
    let table = &tables[0];
    let aware = BasisIndex::new(table, Mode::Aware).dim();
    let unaware = BasisIndex::new(table, Mode::Unaware).dim();
    let extra: usize = table.corners().map(|(_, c)| c as usize - 1).sum();
    assert!(extra > 0);
    assert_eq!(aware, unaware + extra);
}

#[test]
fn connected_smooth_meshes_have_equal_spaces() {
    // coarse enough that no support block cuts the surface in two
    for (mesh, depth) in [(models::icosphere(3), 4), (models::torus(48, 16, 1.0, 0.3), 2)] {
        let (_, _, tables) = prepared(&mesh, depth, depth);
        let table = &tables[0];
        assert!(table.corners().all(|(_, c)| c == 1));
        assert_eq!(BasisIndex::new(table, Mode::Aware).dim(), BasisIndex::new(table, Mode::Unaware).dim());
    }
}

#[test]
fn aware_dimension_counts_extra_components() {
    // near the poles of a sphere a support block can cut the surface in two
    let (m, forest, tables) = prepared(&models::icosphere(3), 5, 5);
    let table = &tables[0];
    let extra: usize = table.corners().map(|(_, c)| c as usize - 1).sum();
    assert!(extra > 0);
    assert_eq!(BasisIndex::new(table, Mode::Aware).dim(), BasisIndex::new(table, Mode::Unaware).dim() + extra);
    check_corner_components(&m, forest.level(5), table);
}

#[test]
fn empty_mesh_has_empty_spaces() {
    let m = TriangleMesh::new(vec![], vec![]).unwrap();
    let forest = FragmentForest::build(&m, 0, 2).unwrap();
    for mode in [Mode::Aware, Mode::Unaware] {
        let space = FunctionSpace::new(&m, &forest, mode);
        assert!(space.levels().iter().all(|b| b.dim() == 0));
    }
}

#[test]
fn aware_supports_refine_unaware_supports() {
    let (m, forest, tables) = prepared(&models::sphere_lattice(2, 2, 2.3), 1, 3);
    for (level, table) in forest.levels().iter().zip(&tables) {
        let aware = BasisIndex::new(table, Mode::Aware);
        let unaware = BasisIndex::new(table, Mode::Unaware);
        for u in 0..unaware.dim() {
            let k = unaware.corner(u);
            let mut union: Vec<u32> = (0..table.component_count(k))
                .flat_map(|i| aware.members(aware.find(k, i).unwrap()).to_vec())
                .collect();
            union.sort_unstable();
            assert_eq!(union, unaware.members(u));
        }
        check_corner_components(&m, level, table);
    }
}

#[test]
fn fine_components_sit_in_one_coarse_component_per_corner() {
    let mesh = TriangleMesh::merge(&[models::blob(2), models::two_sheets(12, 0.08)]);
    let (m, forest, tables) = prepared(&mesh, 1, 4);
    let comps = connected_components(&m);
    let mut face_comp = vec![0usize; m.face_count()];
    for (c, faces) in comps.iter().enumerate() {
        faces.iter().for_each(|&f| face_comp[f as usize] = c);
    }
    for depth in 2..=4 {
        let fine_level = forest.level(depth);
        let coarse = BasisIndex::new(&tables[(depth - 2) as usize], Mode::Aware);
        let fine = BasisIndex::new(&tables[(depth - 1) as usize], Mode::Aware);
        for fb in 0..fine.dim() {
            let kf = fine.corner(fb);
            let mut total = 0;
            for cb in 0..coarse.dim() {
                let kc = coarse.corner(cb);
                let covers = (0..3).all(|a| (kf[a] as i64 - 2 * kc[a] as i64).abs() <= 1);
                let hit = chi(&coarse, &fine, fine_level, cb, fb);
                if covers {
                    total += hit as usize;
                }
                let cface = face_comp[forest.level(depth - 1).fragment(coarse.members(cb)[0] as usize).face as usize];
                let fface = face_comp[fine_level.fragment(fine.members(fb)[0] as usize).face as usize];
                if cface != fface {
                    assert!(!hit);
                }
            }
            let covering_corners = (0..coarse.dim())
                .map(|cb| coarse.corner(cb))
                .filter(|kc| (0..3).all(|a| (kf[a] as i64 - 2 * kc[a] as i64).abs() <= 1))
                .collect::<std::collections::BTreeSet<_>>()
                .len();
            assert!(total >= 1);
            assert_eq!(total, covering_corners, "fine basis {fb} at depth {depth}");
        }
    }
}

#[test]
fn numbering_is_lexicographic_and_bijective() {
    let (_, _, tables) = prepared(&models::cube_lattice(2, 0.3), 2, 2);
    let b = BasisIndex::new(&tables[0], Mode::Aware);
    let grid = tables[0].grid;
    for i in 1..b.dim() {
        assert!((grid.corner_key(b.corner(i - 1)), b.ordinal(i - 1)) < (grid.corner_key(b.corner(i)), b.ordinal(i)));
    }
    for i in 0..b.dim() {
        assert_eq!(b.find(b.corner(i), b.ordinal(i)), Some(i));
    }
}

fn soup() -> impl Strategy<Value = TriangleMesh> {
    let pt = (0.05..0.95f64, 0.05..0.95f64, 0.05..0.95f64).prop_map(|(x, y, z)| Vec3::new(x, y, z));
    (prop::collection::vec(pt, 6..10), prop::collection::vec((0usize..10, 0usize..10, 0usize..10), 3..8)).prop_map(
        |(pts, tris)| {
            let n = pts.len();
            let faces: Vec<[u32; 3]> = tris
                .into_iter()
                .map(|(a, b, c)| [a % n, b % n, c % n])
                .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
                .map(|f| f.map(|i| i as u32))
                .collect();
            TriangleMesh::new(pts, faces).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn random_soups_match_flood_fill(m in soup()) {
        let forest = FragmentForest::build(&m, 1, 2).unwrap();
        for level in forest.levels() {
            let table = ComponentTable::build(&m, level);
            check_voxel_components(&m, level, &table);
            check_corner_components(&m, level, &table);
            let aware = BasisIndex::new(&table, Mode::Aware).dim();
            let unaware = BasisIndex::new(&table, Mode::Unaware).dim();
            prop_assert!(aware >= unaware);
        }
    }
}
