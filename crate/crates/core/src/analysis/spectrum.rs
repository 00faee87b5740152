use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::solver::LdlFactor;
use crate::sparse::{dot, norm2, CsrMatrix};

/// Pencils up to this dimension are solved densely.
pub const DENSE_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    /// Number of smallest eigenvalues wanted.
    pub count: usize,
    /// Relative residual `‖Lx - λMx‖ / ((|λ| + σ) ‖Mx‖)` accepted as converged.
    pub tolerance: f64,
    pub block_size: usize,
    /// Cap on the Krylov basis size.
    pub max_columns: usize,
    pub seed: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { count: 50, tolerance: 1e-8, block_size: 8, max_columns: 600, seed: 1 }
    }
}

/// Smallest generalized eigenpairs of `L x = λ M x`, ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    /// `‖Lx - λMx‖ / ‖x‖` per pair.
    pub residuals: Vec<f64>,
    /// False when the iteration budget ran out first; the values are then
    /// the best Ritz approximations.
    pub converged: bool,
}

impl Spectrum {
    /// Number of eigenvalues below `rel * scale` in magnitude.
    pub fn near_zero_count(&self, scale: f64, rel: f64) -> usize {
        self.eigenvalues.iter().filter(|l| l.abs() < rel * scale).count()
    }
}

/// `L` symmetric positive semi-definite, `M` symmetric positive
/// semi-definite. Directions in the common null space of `L` and `M` carry no
/// eigenvalue; directions in the null space of `M` alone are infinite.
pub fn generalized_eigen(l: &CsrMatrix, m: &CsrMatrix, options: &SpectrumOptions) -> Result<Spectrum> {
    let n = l.n_rows();
    if m.n_rows() != n || l.n_cols() != n || m.n_cols() != n {
        return Err(Error::InvalidArgument("stiffness and mass must be square and of equal size".into()));
    }
    if n == 0 || options.count == 0 {
        return Ok(Spectrum { eigenvalues: Vec::new(), vectors: Vec::new(), residuals: Vec::new(), converged: true });
    }
    if n <= DENSE_LIMIT {
        dense(l, m, options.count.min(n))
    } else {
        lanczos(l, m, options)
    }
}

/// Diagonal shift that makes `A + shift I` factorizable, trying zero first.
fn factor_with_fallback(a: &CsrMatrix) -> Result<LdlFactor> {
    match LdlFactor::new(a) {
        Ok(f) => Ok(f),
        Err(Error::Singular { .. }) => {
            let shift = 1e-12 * a.trace() / a.n_rows() as f64;
            log::debug!("shift-invert operator singular, regularizing by {shift:e}");
            LdlFactor::new(&a.add_diagonal(shift))
        }
        Err(e) => Err(e),
    }
}

fn residual_norm(l: &CsrMatrix, m: &CsrMatrix, x: &[f64], lambda: f64) -> f64 {
    let mut r = l.mul_vec(x);
    m.mul_vec_add(-lambda, x, &mut r);
    norm2(&r) / norm2(x).max(f64::MIN_POSITIVE)
}

pub(super) fn dense(l: &CsrMatrix, m: &CsrMatrix, count: usize) -> Result<Spectrum> {
    let n = l.n_rows();
    let ld = l.to_dense();
    let mut md = m.to_dense();
    let chol = match md.clone().cholesky() {
        Some(c) => c,
        None => {
            let shift = 1e-12 * m.trace() / n as f64;
            log::debug!("mass matrix not positive definite, shifting by {shift:e}");
            for i in 0..n {
                md[(i, i)] += shift;
            }
            md.clone().cholesky().ok_or_else(|| Error::Singular { row: 0, pivot: 0.0 })?
        }
    };
    // C^{-1} L C^{-T}
    let lower = chol.l();
    let a = lower.solve_lower_triangular(&ld).ok_or_else(|| Error::NonFinite("dense triangular solve".into()))?;
    let a = lower
        .solve_lower_triangular(&a.transpose())
        .ok_or_else(|| Error::NonFinite("dense triangular solve".into()))?;
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let upper = lower.transpose();
    let mut out = Spectrum { eigenvalues: Vec::new(), vectors: Vec::new(), residuals: Vec::new(), converged: true };
    for &i in order.iter().take(count) {
        let y: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        let x = upper.solve_upper_triangular(&y).ok_or_else(|| Error::NonFinite("dense back substitution".into()))?;
        let x: Vec<f64> = x.iter().copied().collect();
        let lambda = eig.eigenvalues[i];
        out.residuals.push(residual_norm(l, m, &x, lambda));
        out.eigenvalues.push(lambda);
        out.vectors.push(x);
    }
    if out.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dense eigenvalues".into()));
    }
    Ok(out)
}

/// Block Lanczos on `(L + σM)^{-1} M` with full M-orthogonal
/// reorthogonalization, followed by Rayleigh-Ritz on the pencil itself.
pub(super) fn lanczos(l: &CsrMatrix, m: &CsrMatrix, options: &SpectrumOptions) -> Result<Spectrum> {
    let n = l.n_rows();
    let count = options.count.min(n);
    let sigma = 1e-3 * l.trace() / m.trace().max(f64::MIN_POSITIVE);
    let factor = factor_with_fallback(&l.linear_combination(1.0, m, sigma))?;
    let bs = options.block_size.clamp(1, n);
    let max_cols = options.max_columns.max(count + 2 * bs).min(n);

    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut mq: Vec<Vec<f64>> = Vec::new();
    let mut lq: Vec<Vec<f64>> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut block: Vec<Vec<f64>> = (0..bs)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>())
        .map(|x| factor.solve(&m.mul_vec(&x)))
        .collect();
    let mut next_rr = count + 2 * bs;
    let mut best: Option<Spectrum> = None;
    loop {
        let mut accepted = Vec::new();
        for mut w in block.drain(..) {
            let start = dot(&w, &m.mul_vec(&w)).sqrt();
            for _ in 0..2 {
                for (qj, mqj) in q.iter().zip(&mq) {
                    let c = dot(mqj, &w);
                    w.iter_mut().zip(qj).for_each(|(a, b)| *a -= c * b);
                }
            }
            let mw = m.mul_vec(&w);
            let norm = dot(&w, &mw).max(0.0).sqrt();
            if !(norm > 1e-10 * start) || !norm.is_finite() {
                continue;
            }
            w.iter_mut().for_each(|v| *v /= norm);
            lq.push(l.mul_vec(&w));
            mq.push(mw.into_iter().map(|v| v / norm).collect());
            q.push(w);
            accepted.push(q.len() - 1);
        }
        let exhausted = accepted.is_empty() || q.len() >= max_cols;
        if q.len() >= count && (q.len() >= next_rr || exhausted) {
            next_rr = q.len() + (q.len() / 4).max(2 * bs);
            let spec = rayleigh_ritz(l, m, &q, &lq, &mq, count, sigma, options.tolerance);
            let done = spec.converged;
            best = Some(spec);
            if done {
                break;
            }
        }
        if exhausted {
            break;
        }
        block = accepted.iter().map(|&j| factor.solve(&mq[j])).collect();
    }
    let mut spec = match best {
        Some(s) => s,
        None => rayleigh_ritz(l, m, &q, &lq, &mq, count.min(q.len()), sigma, options.tolerance),
    };
    if spec.eigenvalues.len() < count {
        spec.converged = false;
    }
    if !spec.converged {
        log::warn!("eigensolver stopped with {} Krylov vectors before all {count} pairs converged", q.len());
    }
    Ok(spec)
}

#[allow(clippy::too_many_arguments)]
fn rayleigh_ritz(
    l: &CsrMatrix,
    m: &CsrMatrix,
    q: &[Vec<f64>],
    lq: &[Vec<f64>],
    mq: &[Vec<f64>],
    count: usize,
    sigma: f64,
    tolerance: f64,
) -> Spectrum {
    let k = q.len();
    let a = DMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&q[i], &lq[j]) + dot(&q[j], &lq[i])));
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let n = l.n_rows();
    let mut out = Spectrum { eigenvalues: Vec::new(), vectors: Vec::new(), residuals: Vec::new(), converged: true };
    for &i in order.iter().take(count) {
        let theta = eig.eigenvalues[i];
        let y = eig.eigenvectors.column(i);
        let mut x = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut mx = vec![0.0; n];
        for (j, &c) in y.iter().enumerate() {
            for t in 0..n {
                x[t] += c * q[j][t];
                r[t] += c * lq[j][t];
                mx[t] += c * mq[j][t];
            }
        }
        r.iter_mut().zip(&mx).for_each(|(a, b)| *a -= theta * b);
        if norm2(&r) > tolerance * (theta.abs() + sigma) * norm2(&mx) {
            out.converged = false;
        }
        out.residuals.push(residual_norm(l, m, &x, theta));
        out.eigenvalues.push(theta);
        out.vectors.push(x);
    }
    out
}
