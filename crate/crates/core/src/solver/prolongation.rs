use crate::components::{BasisIndex, NONE};
use std::collections::BTreeMap;

use crate::assembly::bspline::local_basis;
use crate::assembly::locate_fragment;
use crate::embedding::{corner_of_slot, FragmentLevel};
use crate::geometry::Vec3;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

use super::mask::MaskKind;

/// Prolongation from `coarse` to `fine` coefficients (rows: fine bases).
///
/// A fine basis function receives the coarse basis function of a corner
/// when one of its fragments has its parent in that coarse component; the
/// weight is the tensor two-scale mask between the two corners.
pub fn build_prolongation(coarse: &BasisIndex, fine: &BasisIndex, fine_level: &FragmentLevel, mask: MaskKind) -> Result<CsrMatrix> {
    assert_eq!(coarse.grid.depth + 1, fine.grid.depth, "levels must be consecutive");
    let mut triplets = Vec::new();
    let mut row: Vec<(usize, f64)> = Vec::new();
    for fb in 0..fine.dim() {
        row.clear();
        let kf = fine.corner(fb);
        for &f in fine.members(fb) {
            let parent = fine_level.fragment(f as usize).parent as usize;
            let voxel = fine_level.fragment(f as usize).voxel.map(|c| c / 2);
            let cb = coarse.fragment_basis(parent);
            for (s, &c) in cb.iter().enumerate() {
                if c == NONE {
                    continue;
                }
                let w = mask.weight3(corner_of_slot(voxel, s), kf);
                if w != 0.0 {
                    row.push((c as usize, w));
                }
            }
        }
        row.sort_by_key(|e| e.0);
        row.dedup_by_key(|e| e.0);
        if row.is_empty() {
            return Err(Error::Consistency(format!(
                "fine basis {fb} (corner {kf:?}, component {}) at depth {} has no coarse parent",
                fine.ordinal(fb),
                fine.grid.depth
            )));
        }
        triplets.extend(row.iter().map(|&(c, w)| (fb, c, w)));
    }
    Ok(CsrMatrix::from_triplets(fine.dim(), coarse.dim(), triplets))
}

/// Largest pointwise defect `|b(p) - Σ_j P[j, b] b'_j(p)|` over all coarse
/// basis functions `b` and the given surface samples. Coarse functions that
/// vanish at a sample must prolong to zero there too.
pub fn prolongation_defect(
    coarse_level: &FragmentLevel,
    fine_level: &FragmentLevel,
    coarse: &BasisIndex,
    fine: &BasisIndex,
    p: &CsrMatrix,
    samples: &[(u32, Vec3)],
) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut values: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for (face, x) in samples {
        let (Some(fc), Some(ff)) = (locate_fragment(coarse_level, *face, x), locate_fragment(fine_level, *face, x)) else {
            return Err(Error::Consistency(format!("sample {x:?} on face {face} has no fragment")));
        };
        values.clear();
        let (cv, _) = local_basis(coarse_level.grid, coarse_level.fragment(fc).voxel, x);
        for (&b, v) in coarse.fragment_basis(fc).iter().zip(cv) {
            if b != NONE {
                values.entry(b as usize).or_default().0 += v;
            }
        }
        let (fv, _) = local_basis(fine_level.grid, fine_level.fragment(ff).voxel, x);
        for (&b, v) in fine.fragment_basis(ff).iter().zip(fv) {
            if b != NONE {
                for (c, w) in p.row(b as usize) {
                    values.entry(c).or_default().1 += w * v;
                }
            }
        }
        worst = values.values().fold(worst, |m, (a, b)| m.max((a - b).abs()));
    }
    Ok(worst)
}
