use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::assembly::screened_rhs;
use crate::components::FunctionSpace;
use crate::embedding::FragmentForest;
use crate::mesh::{connected_components, normalize, sample_points, TriangleMesh, DEFAULT_PAD};
use crate::models;
use crate::sparse::{dot, norm2};
use crate::Mode;

fn prepared(mesh: TriangleMesh, min: u32, max: u32) -> (TriangleMesh, FragmentForest) {
    let (mesh, _) = normalize(&mesh, DEFAULT_PAD).unwrap();
    let forest = FragmentForest::build(&mesh, min, max).unwrap();
    (mesh, forest)
}

fn max_defect(mesh: &TriangleMesh, forest: &FragmentForest, mode: Mode, mask: MaskKind) -> f64 {
    let space = FunctionSpace::new(mesh, forest, mode);
    let samples = sample_points(mesh, 400, &mut ChaCha8Rng::seed_from_u64(3));
    let mut worst = 0.0f64;
    for d in forest.min_depth() + 1..=forest.max_depth() {
        let (c, f) = (space.level(d - 1), space.level(d));
        let p = build_prolongation(c, f, forest.level(d), mask).unwrap();
        worst = worst.max(prolongation_defect(forest.level(d - 1), forest.level(d), c, f, &p, &samples).unwrap());
    }
    worst
}

#[test]
fn prolongation_reproduces_coarse_functions() {
    for mesh in [models::icosphere(3), models::two_sheets(24, 0.04), models::cube_lattice(2, 0.5)] {
        let (mesh, forest) = prepared(mesh, 2, 4);
        for mode in [Mode::Aware, Mode::Unaware] {
            let d = max_defect(&mesh, &forest, mode, MaskKind::Linear);
            assert!(d <= 1e-10, "{mode}: {d}");
        }
    }
}

#[test]
fn quadratic_mask_is_not_exact_for_trilinear_splines() {
    let (mesh, forest) = prepared(models::icosphere(3), 2, 3);
    assert!(max_defect(&mesh, &forest, Mode::Unaware, MaskKind::Quadratic) > 1e-3);
}

#[test]
fn prolonged_random_function_matches_pointwise() {
    let (mesh, forest) = prepared(models::two_sheets(24, 0.04), 3, 4);
    let space = FunctionSpace::new(&mesh, &forest, Mode::Aware);
    let (c, f) = (space.level(3), space.level(4));
    let p = build_prolongation(c, f, forest.level(4), MaskKind::Linear).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u: Vec<f64> = (0..c.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v = p.mul_vec(&u);
    for (face, x) in sample_points(&mesh, 1000, &mut rng) {
        let a = crate::assembly::evaluate(forest.level(3), c, &u, face, &x).unwrap();
        let b = crate::assembly::evaluate(forest.level(4), f, &v, face, &x).unwrap();
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

#[test]
fn aware_equals_unaware_when_spaces_coincide() {
    let (mesh, forest) = prepared(models::icosphere(3), 3, 4);
    let aware = FunctionSpace::new(&mesh, &forest, Mode::Aware);
    let unaware = FunctionSpace::new(&mesh, &forest, Mode::Unaware);
    for d in 3..=4 {
        assert_eq!(aware.level(d).dim(), unaware.level(d).dim());
    }
    let pa = build_prolongation(aware.level(3), aware.level(4), forest.level(4), MaskKind::Linear).unwrap();
    let pu = build_prolongation(unaware.level(3), unaware.level(4), forest.level(4), MaskKind::Linear).unwrap();
    assert_eq!(pa.to_dense(), pu.to_dense());
}

#[test]
fn sheets_prolong_only_onto_themselves() {
    let (mesh, forest) = prepared(models::two_sheets(24, 0.04), 1, 4);
    let mut face_sheet = vec![0usize; mesh.face_count()];
    let comps = connected_components(&mesh);
    assert_eq!(comps.len(), 2);
    for (i, c) in comps.iter().enumerate() {
        for &f in c {
            face_sheet[f as usize] = i;
        }
    }
    let space = FunctionSpace::new(&mesh, &forest, Mode::Aware);
    let sheet_of = |depth: u32, b: usize| {
        let level = forest.level(depth);
        let members = space.level(depth).members(b);
        let s = face_sheet[level.fragment(members[0] as usize).face as usize];
        assert!(members.iter().all(|&m| face_sheet[level.fragment(m as usize).face as usize] == s), "basis spans both sheets");
        s
    };
    let mut coupled_corners = 0;
    for d in 2..=4 {
        let (c, f) = (space.level(d - 1), space.level(d));
        let p = build_prolongation(c, f, forest.level(d), MaskKind::Linear).unwrap();
        for fb in 0..f.dim() {
            for (cb, _) in p.row(fb) {
                assert_eq!(sheet_of(d, fb), sheet_of(d - 1, cb));
            }
        }
        coupled_corners += (0..c.dim()).filter(|&b| c.ordinal(b) > 0).count();
    }
    assert!(coupled_corners > 0, "model never puts both sheets in one support");
}

#[test]
fn unaware_prolongation_is_aware_summed_by_corner() {
    let (mesh, forest) = prepared(models::two_sheets(24, 0.04), 2, 3);
    let aware = FunctionSpace::new(&mesh, &forest, Mode::Aware);
    let unaware = FunctionSpace::new(&mesh, &forest, Mode::Unaware);
    let pa = build_prolongation(aware.level(2), aware.level(3), forest.level(3), MaskKind::Linear).unwrap();
    let pu = build_prolongation(unaware.level(2), unaware.level(3), forest.level(3), MaskKind::Linear).unwrap();
    // aware rows of one fine corner all carry the same weight per coarse corner
    let (ua, uc) = (unaware.level(3), unaware.level(2));
    for fb in 0..aware.level(3).dim() {
        let fk = aware.level(3).corner(fb);
        let ufb = ua.find(fk, 0).unwrap();
        for (cb, w) in pa.row(fb) {
            let ucb = uc.find(aware.level(2).corner(cb), 0).unwrap();
            assert_eq!(pu.get(ufb, ucb), w);
        }
    }
    // and every unaware entry is realized by some aware component pair
    for ufb in 0..ua.dim() {
        for (ucb, w) in pu.row(ufb) {
            let fk = ua.corner(ufb);
            let ck = uc.corner(ucb);
            let found = (0..aware.level(3).dim())
                .filter(|&b| aware.level(3).corner(b) == fk)
                .any(|b| pa.row(b).any(|(c, v)| aware.level(2).corner(c) == ck && v == w));
            assert!(found);
        }
    }
}

fn lattice_problem(mode: Mode, options: MultigridOptions) -> (Hierarchy, Vec<f64>) {
    let (mesh, forest) = prepared(models::cube_lattice(2, 0.5), 1, 4);
    let space = FunctionSpace::new(&mesh, &forest, mode);
    let (h, _) = screened_hierarchy(&mesh, &forest, &space, 0.01, 0.0, options).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = h.finest().n_rows();
    // L + αM is singular on planar pieces; keep the rhs in its range
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rhs = h.finest().mul_vec(&x);
    (h, rhs)
}

#[test]
fn zero_rhs_stays_zero() {
    let (h, rhs) = lattice_problem(Mode::Aware, MultigridOptions::default());
    let mut u = vec![0.0; rhs.len()];
    let zero = vec![0.0; rhs.len()];
    for min in [1, 3, 4] {
        h.cycle(&mut u, &zero, min);
        assert!(u.iter().all(|&x| x == 0.0));
    }
}

#[test]
fn single_level_cycle_is_plain_relaxation() {
    let options = MultigridOptions { smooth: 3, ..Default::default() };
    let (h, rhs) = lattice_problem(Mode::Aware, options);
    let mut u = vec![0.0; rhs.len()];
    let history = h.cycle(&mut u, &rhs, h.max_depth());
    assert_eq!(history.len(), 1);
    let mut v = vec![0.0; rhs.len()];
    gauss_seidel(h.finest(), &mut v, &rhs, 6);
    assert_eq!(u, v);
}

#[test]
fn restriction_is_prolongation_transpose() {
    let (h, _) = lattice_problem(Mode::Aware, MultigridOptions { galerkin: true, ..Default::default() });
    let p = h.prolongation(h.max_depth()).unwrap();
    let a = h.operator(h.max_depth() - 1);
    let expected = h.finest().galerkin_product(p);
    let diff = a.linear_combination(1.0, &expected, -1.0);
    assert!(diff.max_abs() <= 1e-12 * expected.max_abs());
}

#[test]
fn aware_w_cycles_reduce_residual_monotonically() {
    let (h, rhs) = lattice_problem(Mode::Aware, MultigridOptions::default());
    let mut u = vec![0.0; rhs.len()];
    let rel = h.solve(&mut u, &rhs, 1, 5, 0.0).unwrap();
    assert_eq!(rel.len(), 5);
    assert!(rel.windows(2).all(|w| w[1] < w[0]), "{rel:?}");
    assert!(rel[4] < 1e-3, "{rel:?}");
}

#[test]
fn coarse_levels_help_only_in_aware_mode() {
    let mut ratios = Vec::new();
    for mode in [Mode::Aware, Mode::Unaware] {
        let (h, rhs) = lattice_problem(mode, MultigridOptions::default());
        let a = h.finest();
        let r0 = norm2(&rhs);
        let after = |min| {
            let mut u = vec![0.0; rhs.len()];
            h.cycle(&mut u, &rhs, min);
            norm2(&residual(a, &u, &rhs)) / r0
        };
        ratios.push(after(4) / after(1));
    }
    assert!(ratios[0] > ratios[1], "{ratios:?}");
}

#[test]
fn v_cycle_and_gauss_seidel_coarse_solver_converge() {
    let options = MultigridOptions { shape: CycleShape::V, coarse: CoarseSolver::GaussSeidel, ..Default::default() };
    let (h, rhs) = lattice_problem(Mode::Aware, options);
    let mut u = vec![0.0; rhs.len()];
    let rel = h.solve(&mut u, &rhs, 1, 30, 1e-6).unwrap();
    assert!(*rel.last().unwrap() <= 1e-6, "{rel:?}");
}

#[test]
fn multigrid_agrees_with_cg() {
    let (mesh, forest) = prepared(models::icosphere(3), 2, 4);
    let space = FunctionSpace::new(&mesh, &forest, Mode::Aware);
    let (h, finest) = screened_hierarchy(&mesh, &forest, &space, 0.01, 0.0, MultigridOptions::default()).unwrap();
    let values: Vec<f64> = mesh.vertices.iter().map(|p| p.x + p.y * p.y).collect();
    let (f, s) = crate::assembly::load_vectors(&mesh, forest.level(4), space.level(4), &values);
    let rhs = screened_rhs(&f, &s, 0.01);
    let mut u = vec![0.0; rhs.len()];
    let rel = h.solve(&mut u, &rhs, 2, 50, 1e-10).unwrap();
    assert!(*rel.last().unwrap() <= 1e-10);
    let cg = conjugate_gradient(&finest.screened(0.01), &rhs, None, 1e-12, 5000, true).unwrap();
    assert!(cg.converged);
    let mass = &finest.mass;
    let e: Vec<f64> = u.iter().zip(&cg.x).map(|(a, b)| a - b).collect();
    assert!(mass.bilinear(&e, &e).sqrt() <= 1e-6 * mass.bilinear(&u, &u).sqrt());
}

#[test]
fn preconditioner_is_symmetric() {
    let (mesh, forest) = prepared(models::blob(2), 1, 4);
    let space = FunctionSpace::new(&mesh, &forest, Mode::Aware);
    let (h, _) = screened_hierarchy(&mesh, &forest, &space, 2.0, 0.0, MultigridOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = h.finest().n_rows();
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for min_depth in [1, 4] {
        let (bx, by) = (h.precondition(&x, min_depth), h.precondition(&y, min_depth));
        let (a, b) = (dot(&y, &bx), dot(&x, &by));
        assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()), "min depth {min_depth}: {a} vs {b}");
    }
}

#[test]
fn preconditioned_cg_reaches_tight_tolerance() {
    let (mesh, forest) = prepared(models::blob(2), 1, 4);
    let space = FunctionSpace::new(&mesh, &forest, Mode::Aware);
    let (h, _) = screened_hierarchy(&mesh, &forest, &space, 2.0, 0.0, MultigridOptions::default()).unwrap();
    let n = h.finest().n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rhs = h.finest().mul_vec(&x);
    let mut u = vec![0.0; n];
    let rel = h.pcg(&mut u, &rhs, 1, 200, 1e-10).unwrap();
    assert!(*rel.last().unwrap() <= 1e-10, "{rel:?}");
    assert!(rel.len() < 60, "{} iterations", rel.len());
}
