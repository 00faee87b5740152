//! Envelope (skyline) LDLᵀ factorization under reverse Cuthill-McKee ordering.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Pivots below this fraction of the original diagonal mark the matrix singular.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]));
            nbrs.sort_by_key(|&j| (degree[j], j));
            for &j in &nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// `A = P L D Lᵀ Pᵀ` with `L` unit lower triangular stored by envelope rows.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl LdlFactor {
    /// Factorizes a symmetric matrix; fails when a pivot is not clearly positive.
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows();
        assert_eq!(n, a.n_cols(), "square matrix required");
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut lower = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let jn = inv[j];
                if jn < new {
                    lower[start[new] + jn - first[new]] = v;
                } else if jn == new {
                    diag[new] = v;
                }
            }
        }
        let original_diag = diag.clone();
        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            // after this loop row i holds (L D) entries; row j < i holds L
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = lower[row_i + j - fi];
                let (ri, rj) = (row_i + k0 - fi, start[j] + k0 - fj);
                for k in 0..j - k0 {
                    s -= lower[ri + k] * lower[rj + k];
                }
                lower[row_i + j - fi] = s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let ld = lower[row_i + j - fi];
                let l = ld / diag[j];
                d -= ld * l;
                lower[row_i + j - fi] = l;
            }
            let scale = original_diag[i].abs();
            if !(d > PIVOT_TOLERANCE * scale) || !d.is_finite() {
                return Err(Error::Singular { row: perm[i], pivot: d });
            }
            diag[i] = d;
        }
        Ok(Self { perm, first, start, lower, diag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Stored envelope entries; a measure of factorization cost.
    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            for (l, v) in row.iter().zip(&mut y[fi..i]) {
                *v -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
