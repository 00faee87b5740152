use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm2, CsrMatrix};

use super::direct::LdlFactor;
use super::mask::MaskKind;
use super::smoother::{gauss_seidel, gauss_seidel_backward, residual};

/// Coarse levels up to this dimension are solved directly when possible.
pub const DIRECT_COARSE_LIMIT: usize = 2000;
/// Sweeps of the exhaustive Gauss-Seidel coarse solve.
pub const COARSE_SWEEPS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CycleShape {
    V,
    #[default]
    W,
}

impl CycleShape {
    fn recursions(self) -> usize {
        match self {
            CycleShape::V => 1,
            CycleShape::W => 2,
        }
    }
}

impl FromStr for CycleShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v" => Ok(CycleShape::V),
            "w" => Ok(CycleShape::W),
            other => Err(Error::InvalidArgument(format!("unknown cycle shape '{other}' (expected v or w)"))),
        }
    }
}

impl std::fmt::Display for CycleShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CycleShape::V => "v",
            CycleShape::W => "w",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoarseSolver {
    /// Direct LDLᵀ when the level is small and factorizable, otherwise Gauss-Seidel.
    #[default]
    Auto,
    GaussSeidel,
}

impl FromStr for CoarseSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(CoarseSolver::Auto),
            "gs" | "gauss-seidel" => Ok(CoarseSolver::GaussSeidel),
            other => Err(Error::InvalidArgument(format!("unknown coarse solver '{other}' (expected auto or gs)"))),
        }
    }
}

impl std::fmt::Display for CoarseSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoarseSolver::Auto => "auto",
            CoarseSolver::GaussSeidel => "gs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultigridOptions {
    pub shape: CycleShape,
    /// Pre- and post-smoothing sweeps per level.
    pub smooth: usize,
    pub coarse: CoarseSolver,
    /// Replace coarse operators by `Pᵀ A P` instead of the directly assembled ones.
    pub galerkin: bool,
    pub mask: MaskKind,
}

impl Default for MultigridOptions {
    fn default() -> Self {
        Self { shape: CycleShape::W, smooth: 10, coarse: CoarseSolver::Auto, galerkin: false, mask: MaskKind::Linear }
    }
}

struct Level {
    depth: u32,
    a: CsrMatrix,
    /// Prolongation from the next coarser level into this one, with its transpose.
    p: Option<(CsrMatrix, CsrMatrix)>,
    factor: OnceLock<Option<LdlFactor>>,
}

/// Operators and prolongations over a contiguous depth range.
pub struct Hierarchy {
    levels: Vec<Level>,
    options: MultigridOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelResidual {
    pub depth: u32,
    /// Residual norm when the level is entered and when it is left.
    pub before: f64,
    pub after: f64,
}

impl Hierarchy {
    /// `operators[i]` is the system at depth `base_depth + i`; `prolongations[i]`
    /// maps depth `base_depth + i` into `base_depth + i + 1`.
    pub fn new(operators: Vec<CsrMatrix>, prolongations: Vec<CsrMatrix>, base_depth: u32, options: MultigridOptions) -> Result<Self> {
        if operators.is_empty() || prolongations.len() + 1 != operators.len() {
            return Err(Error::InvalidArgument(format!(
                "{} operators need {} prolongations, got {}",
                operators.len(),
                operators.len().saturating_sub(1),
                prolongations.len()
            )));
        }
        for (i, p) in prolongations.iter().enumerate() {
            if p.n_rows() != operators[i + 1].n_rows() || p.n_cols() != operators[i].n_rows() {
                return Err(Error::InvalidArgument(format!("prolongation {i} has shape {}x{}", p.n_rows(), p.n_cols())));
            }
        }
        let mut ops = operators;
        if options.galerkin {
            for i in (0..prolongations.len()).rev() {
                ops[i] = ops[i + 1].galerkin_product(&prolongations[i]);
            }
        }
        let mut ps: Vec<Option<(CsrMatrix, CsrMatrix)>> = vec![None];
        ps.extend(prolongations.into_iter().map(|p| {
            let pt = p.transpose();
            Some((p, pt))
        }));
        let levels = ops
            .into_iter()
            .zip(ps)
            .enumerate()
            .map(|(i, (a, p))| Level { depth: base_depth + i as u32, a, p, factor: OnceLock::new() })
            .collect();
        Ok(Self { levels, options })
    }

    pub fn options(&self) -> &MultigridOptions {
        &self.options
    }

    pub fn base_depth(&self) -> u32 {
        self.levels[0].depth
    }

    pub fn max_depth(&self) -> u32 {
        self.levels.last().unwrap().depth
    }

    pub fn operator(&self, depth: u32) -> &CsrMatrix {
        &self.levels[(depth - self.base_depth()) as usize].a
    }

    pub fn finest(&self) -> &CsrMatrix {
        &self.levels.last().unwrap().a
    }

    /// Prolongation into `depth` from `depth - 1`.
    pub fn prolongation(&self, depth: u32) -> Option<&CsrMatrix> {
        self.levels[(depth - self.base_depth()) as usize].p.as_ref().map(|(p, _)| p)
    }

    /// One cycle on the finest level, recursing down to `min_depth`.
    /// Returns the residual norms of every level visit in visiting order.
    pub fn cycle(&self, u: &mut [f64], rhs: &[f64], min_depth: u32) -> Vec<LevelResidual> {
        assert!(
            (self.base_depth()..=self.max_depth()).contains(&min_depth),
            "min_depth {min_depth} outside hierarchy {}..={}",
            self.base_depth(),
            self.max_depth()
        );
        let mut history = Vec::new();
        let top = self.levels.len() - 1;
        if min_depth == self.max_depth() {
            // single level: plain relaxation
            let a = &self.levels[top].a;
            let before = norm2(&residual(a, u, rhs));
            gauss_seidel(a, u, rhs, 2 * self.options.smooth);
            let after = norm2(&residual(a, u, rhs));
            history.push(LevelResidual { depth: min_depth, before, after });
        } else {
            self.visit(top, (min_depth - self.base_depth()) as usize, u, rhs, false, &mut history);
        }
        history
    }

    /// `symmetric` post-smooths backwards, making the cycle a symmetric
    /// operator on the residual.
    fn visit(&self, li: usize, bottom: usize, u: &mut [f64], rhs: &[f64], symmetric: bool, history: &mut Vec<LevelResidual>) {
        let level = &self.levels[li];
        let a = &level.a;
        let before = norm2(&residual(a, u, rhs));
        if li == bottom {
            self.coarse_solve(level, u, rhs, symmetric);
        } else {
            let nu = self.options.smooth;
            gauss_seidel(a, u, rhs, nu);
            let r = residual(a, u, rhs);
            let (p, pt) = level.p.as_ref().expect("non-base level has a prolongation");
            let rc = pt.mul_vec(&r);
            let mut ec = vec![0.0; p.n_cols()];
            for _ in 0..self.options.shape.recursions() {
                self.visit(li - 1, bottom, &mut ec, &rc, symmetric, history);
            }
            axpy(1.0, &p.mul_vec(&ec), u);
            if symmetric {
                gauss_seidel_backward(a, u, rhs, nu);
            } else {
                gauss_seidel(a, u, rhs, nu);
            }
        }
        let after = norm2(&residual(a, u, rhs));
        history.push(LevelResidual { depth: level.depth, before, after });
    }

    fn coarse_solve(&self, level: &Level, u: &mut [f64], rhs: &[f64], symmetric: bool) {
        let factor = match self.options.coarse {
            CoarseSolver::GaussSeidel => None,
            CoarseSolver::Auto => level
                .factor
                .get_or_init(|| {
                    if level.a.n_rows() > DIRECT_COARSE_LIMIT {
                        return None;
                    }
                    match LdlFactor::new(&level.a) {
                        Ok(f) => Some(f),
                        Err(e) => {
                            log::debug!("coarse level {} falls back to Gauss-Seidel: {e}", level.depth);
                            None
                        }
                    }
                })
                .as_ref(),
        };
        match factor {
            Some(f) => {
                // solve for the correction so a warm start is respected
                let r = residual(&level.a, u, rhs);
                axpy(1.0, &f.solve(&r), u);
            }
            None if symmetric => {
                for _ in 0..COARSE_SWEEPS / 2 {
                    gauss_seidel(&level.a, u, rhs, 1);
                    gauss_seidel_backward(&level.a, u, rhs, 1);
                }
            }
            None => gauss_seidel(&level.a, u, rhs, COARSE_SWEEPS),
        }
    }

    /// One symmetric cycle from a zero guess: an approximate inverse of the
    /// finest operator, suitable as a conjugate-gradient preconditioner.
    pub fn precondition(&self, r: &[f64], min_depth: u32) -> Vec<f64> {
        let mut z = vec![0.0; r.len()];
        let top = self.levels.len() - 1;
        if min_depth == self.max_depth() {
            let a = &self.levels[top].a;
            gauss_seidel(a, &mut z, r, self.options.smooth);
            gauss_seidel_backward(a, &mut z, r, self.options.smooth);
        } else {
            let mut history = Vec::new();
            self.visit(top, (min_depth - self.base_depth()) as usize, &mut z, r, true, &mut history);
        }
        z
    }

    /// Conjugate gradients on the finest operator preconditioned by one
    /// symmetric cycle per iteration. Returns the relative residual after
    /// each iteration.
    pub fn pcg(&self, u: &mut [f64], rhs: &[f64], min_depth: u32, max_iterations: usize, tol: f64) -> Result<Vec<f64>> {
        let a = self.finest();
        let scale = norm2(rhs).max(f64::MIN_POSITIVE);
        let mut r = residual(a, u, rhs);
        let mut rel = Vec::with_capacity(max_iterations);
        if norm2(&r) / scale <= tol {
            return Ok(rel);
        }
        let mut z = self.precondition(&r, min_depth);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for k in 0..max_iterations {
            let ap = a.mul_vec(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                // the remaining residual lies in the operator's null space
                break;
            }
            let step = rz / pap;
            axpy(step, &p, u);
            axpy(-step, &ap, &mut r);
            let res = norm2(&r) / scale;
            if !res.is_finite() {
                return Err(Error::NonFinite(format!("preconditioned residual after iteration {k}")));
            }
            rel.push(res);
            if res <= tol {
                break;
            }
            z = self.precondition(&r, min_depth);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        }
        Ok(rel)
    }

    /// Repeated cycles until the relative residual drops below `tol` or
    /// `max_cycles` is reached. Returns the relative residual after each cycle.
    pub fn solve(&self, u: &mut [f64], rhs: &[f64], min_depth: u32, max_cycles: usize, tol: f64) -> Result<Vec<f64>> {
        let a = self.finest();
        let scale = norm2(rhs).max(f64::MIN_POSITIVE);
        let mut rel = Vec::with_capacity(max_cycles);
        for c in 0..max_cycles {
            self.cycle(u, rhs, min_depth);
            let r = norm2(&residual(a, u, rhs)) / scale;
            if !r.is_finite() {
                return Err(Error::NonFinite(format!("multigrid residual after cycle {c}")));
            }
            rel.push(r);
            if r <= tol {
                break;
            }
        }
        Ok(rel)
    }
}
