//! Two-scale masks expressing a coarse B-spline through fine ones.

use crate::error::{Error, Result};

/// Choice of 1D refinement mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskKind {
    /// `(1/2, 1, 1/2)` at offsets `-1, 0, 1`: exact for the linear hat.
    #[default]
    Linear,
    /// `(1/4, 3/4, 3/4, 1/4)` at offsets `-1..=2`: the quadratic B-spline
    /// mask. Not exact for trilinear spaces; kept for comparison runs.
    Quadratic,
}

impl std::str::FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(MaskKind::Linear),
            "quadratic" => Ok(MaskKind::Quadratic),
            other => Err(Error::InvalidArgument(format!("unknown prolongation mask '{other}'"))),
        }
    }
}

impl std::fmt::Display for MaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MaskKind::Linear => "linear",
            MaskKind::Quadratic => "quadratic",
        })
    }
}

impl MaskKind {
    /// 1D weight of the fine spline at `2k + offset` in the coarse spline at `k`.
    pub fn weight(self, offset: i64) -> f64 {
        match (self, offset) {
            (MaskKind::Linear, 0) => 1.0,
            (MaskKind::Linear, -1 | 1) => 0.5,
            (MaskKind::Quadratic, 0 | 1) => 0.75,
            (MaskKind::Quadratic, -1 | 2) => 0.25,
            _ => 0.0,
        }
    }

    /// Tensor-product weight between a coarse corner and a fine corner.
    pub fn weight3(self, coarse: [u32; 3], fine: [u32; 3]) -> f64 {
        (0..3).map(|a| self.weight(fine[a] as i64 - 2 * coarse[a] as i64)).product()
    }
}

/// Mask coefficients for a spline of the given degree, ordered by offset
/// starting at -1.
pub fn one_dim_mask(degree: u32) -> Result<Vec<f64>> {
    match degree {
        1 => Ok(vec![0.5, 1.0, 0.5]),
        d => Err(Error::Unsupported(format!("refinement mask for degree {d} splines"))),
    }
}
