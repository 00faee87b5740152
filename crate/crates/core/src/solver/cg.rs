use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm2, CsrMatrix};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b - A x‖ / ‖b‖` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Conjugate gradients for symmetric positive semi-definite `A`, optionally
/// Jacobi-preconditioned. Non-finite iterates abort with an error.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize, jacobi: bool) -> Result<CgOutcome> {
    let n = a.n_rows();
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 && x0.is_none() {
        return Ok(CgOutcome { x, iterations: 0, relative_residual: 0.0, converged: true });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if jacobi && d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    a.mul_vec_add(-1.0, &x, &mut r);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = norm2(&r) / scale;
    if !rel.is_finite() {
        return Err(Error::NonFinite("conjugate gradient initial residual".into()));
    }
    let mut it = 0;
    while it < max_iter && rel > tol {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || !rz.is_finite() {
            return Err(Error::NonFinite(format!("conjugate gradient iteration {it}")));
        }
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        z.iter_mut().zip(&r).zip(&inv_diag).for_each(|((z, r), d)| *z = r * d);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        it += 1;
        rel = norm2(&r) / scale;
        if !rel.is_finite() {
            return Err(Error::NonFinite(format!("conjugate gradient residual at iteration {it}")));
        }
    }
    Ok(CgOutcome { converged: rel <= tol, x, iterations: it, relative_residual: rel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let out = conjugate_gradient(&a, &b, None, 1e-12, 10, false).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn random_spd_converges() {
        let n = 100;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let m = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &m * m.transpose() + nalgebra::DMatrix::identity(n, n) * (n as f64);
        let trip = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (i, j, spd[(i, j)])).collect();
        let a = CsrMatrix::from_triplets(n, n, trip);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for jacobi in [false, true] {
            let out = conjugate_gradient(&a, &b, None, 1e-10, 100, jacobi).unwrap();
            assert!(out.converged, "{}", out.relative_residual);
        }
    }

    #[test]
    fn singular_neumann_with_compatible_rhs() {
        let n = 20;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let mut b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mean = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|v| *v -= mean);
        let out = conjugate_gradient(&a, &b, None, 1e-10, 200, false).unwrap();
        assert!(out.converged);
        let x2: Vec<f64> = out.x.iter().map(|v| v + 3.0).collect();
        let r = a.mul_vec(&x2);
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-8));
    }

    #[test]
    fn nan_aborts() {
        let a = CsrMatrix::from_diagonal(&[1.0, f64::NAN]);
        let out = conjugate_gradient(&a, &[1.0, 1.0], None, 1e-10, 10, false);
        assert!(matches!(out, Err(Error::NonFinite(_))), "{out:?}");
    }
}
