use crate::sparse::CsrMatrix;

/// Forward Gauss-Seidel sweeps in index order. Rows with a zero diagonal are
/// left untouched.
pub fn gauss_seidel(a: &CsrMatrix, u: &mut [f64], rhs: &[f64], iterations: usize) {
    let (rp, ci, vals) = (a.row_ptr(), a.col_idx(), a.values());
    let mut skipped = 0usize;
    for _ in 0..iterations {
        skipped = 0;
        for i in 0..a.n_rows() {
            let mut sum = rhs[i];
            let mut diag = 0.0;
            for p in rp[i]..rp[i + 1] {
                let j = ci[p];
                if j == i {
                    diag = vals[p];
                } else {
                    sum -= vals[p] * u[j];
                }
            }
            if diag == 0.0 {
                skipped += 1;
                continue;
            }
            u[i] = sum / diag;
        }
    }
    if skipped > 0 {
        log::warn!("Gauss-Seidel skipped {skipped} rows with zero diagonal");
    }
}

/// Gauss-Seidel sweeps in reverse index order; composed with a forward
/// sweep this gives the symmetric smoother needed for preconditioning.
pub fn gauss_seidel_backward(a: &CsrMatrix, u: &mut [f64], rhs: &[f64], iterations: usize) {
    let (rp, ci, vals) = (a.row_ptr(), a.col_idx(), a.values());
    for _ in 0..iterations {
        for i in (0..a.n_rows()).rev() {
            let mut sum = rhs[i];
            let mut diag = 0.0;
            for p in rp[i]..rp[i + 1] {
                let j = ci[p];
                if j == i {
                    diag = vals[p];
                } else {
                    sum -= vals[p] * u[j];
                }
            }
            if diag != 0.0 {
                u[i] = sum / diag;
            }
        }
    }
}

/// `rhs - A u`.
pub fn residual(a: &CsrMatrix, u: &[f64], rhs: &[f64]) -> Vec<f64> {
    let mut r = rhs.to_vec();
    a.mul_vec_add(-1.0, u, &mut r);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dot;
    use rand::{Rng, SeedableRng};

    fn energy(a: &CsrMatrix, u: &[f64], b: &[f64]) -> f64 {
        0.5 * a.bilinear(u, u) - dot(u, b)
    }

    #[test]
    fn one_by_one_solves_in_one_sweep() {
        let a = CsrMatrix::from_diagonal(&[4.0]);
        let mut u = vec![0.0];
        gauss_seidel(&a, &mut u, &[2.0], 1);
        assert_eq!(u, vec![0.5]);
    }

    #[test]
    fn exact_solution_is_fixed() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)]);
        let x = vec![1.0, 2.0];
        let b = a.mul_vec(&x);
        let mut u = x.clone();
        gauss_seidel(&a, &mut u, &b, 5);
        assert_eq!(u, x);
    }

    #[test]
    fn zero_diagonal_rows_are_skipped() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 2.0)]);
        let mut u = vec![0.0, 7.0];
        gauss_seidel(&a, &mut u, &[2.0, 1.0], 2);
        assert_eq!(u, vec![1.0, 7.0]);
    }

    #[test]
    fn energy_decreases_on_random_spd() {
        let n = 50;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let b = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &b * b.transpose() + nalgebra::DMatrix::identity(n, n) * 0.1;
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                trip.push((i, j, spd[(i, j)]));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, trip);
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut u = vec![0.0; n];
        let mut e = energy(&a, &u, &rhs);
        for _ in 0..100 {
            gauss_seidel(&a, &mut u, &rhs, 1);
            let next = energy(&a, &u, &rhs);
            assert!(next <= e + 1e-12 * e.abs().max(1.0));
            e = next;
        }
    }
}
