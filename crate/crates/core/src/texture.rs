//! Synthetic per-vertex textures, evaluated in the mesh's own coordinates.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::TriangleMesh;

const EVEN: [f64; 3] = [0.9, 0.8, 0.1];
const ODD: [f64; 3] = [0.1, 0.2, 0.8];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Texture {
    /// Alternating colors on cells of side `period`.
    Checkerboard { period: f64 },
    /// Each channel ramps linearly with one coordinate over the bounding box.
    Ramp,
    Constant([f64; 3]),
}

impl Texture {
    pub fn color(&self, p: &Vec3, lo: &Vec3, hi: &Vec3) -> [f64; 3] {
        match *self {
            Texture::Checkerboard { period } => {
                let parity = (p / period).map(f64::floor).iter().sum::<f64>().rem_euclid(2.0);
                if parity < 0.5 {
                    EVEN
                } else {
                    ODD
                }
            }
            Texture::Ramp => std::array::from_fn(|i| {
                let ext = hi[i] - lo[i];
                if ext > 0.0 {
                    (p[i] - lo[i]) / ext
                } else {
                    0.5
                }
            }),
            Texture::Constant(c) => c,
        }
    }

    /// Copy of `mesh` with this texture sampled at its vertices.
    pub fn apply(&self, mesh: &TriangleMesh) -> TriangleMesh {
        let colors = match mesh.bounding_box() {
            Some(bb) => mesh.vertices.iter().map(|p| self.color(p, &bb.min, &bb.max)).collect(),
            None => Vec::new(),
        };
        mesh.clone().with_colors(colors).expect("one color per vertex")
    }
}

impl std::fmt::Display for Texture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Texture::Checkerboard { period } => write!(f, "checkerboard3d {period}"),
            Texture::Ramp => f.write_str("ramp"),
            Texture::Constant([r, g, b]) => write!(f, "constant {r} {g} {b}"),
        }
    }
}

impl FromStr for Texture {
    type Err = Error;

    /// `checkerboard3d <period>`, `ramp` or `constant <r> <g> <b>`.
    fn from_str(s: &str) -> Result<Self> {
        let words: Vec<&str> = s.split(|c: char| c.is_whitespace() || c == ':' || c == ',').filter(|w| !w.is_empty()).collect();
        let num = |w: &str| {
            w.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("texture parameter '{w}' is not a number")))
        };
        match words.as_slice() {
            ["checkerboard3d", period] => {
                let period = num(period)?;
                if period <= 0.0 {
                    return Err(Error::InvalidArgument("checkerboard period must be positive".into()));
                }
                Ok(Texture::Checkerboard { period })
            }
            ["ramp"] => Ok(Texture::Ramp),
            ["constant", r, g, b] => Ok(Texture::Constant([num(r)?, num(g)?, num(b)?])),
            _ => Err(Error::InvalidArgument(format!(
                "unknown texture '{s}' (expected 'checkerboard3d <period>', 'ramp' or 'constant <r> <g> <b>')"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn parses() {
        assert_eq!("checkerboard3d 1.5".parse::<Texture>().unwrap(), Texture::Checkerboard { period: 1.5 });
        assert_eq!("ramp".parse::<Texture>().unwrap(), Texture::Ramp);
        assert_eq!("constant 1 0 0.5".parse::<Texture>().unwrap(), Texture::Constant([1.0, 0.0, 0.5]));
        assert!("checkerboard3d -1".parse::<Texture>().is_err());
        assert!("plaid".parse::<Texture>().is_err());
        for t in [Texture::Checkerboard { period: 0.3 }, Texture::Ramp, Texture::Constant([0.1, 1.0, 0.25])] {
            assert_eq!(t.to_string().parse::<Texture>().unwrap(), t);
        }
    }

    #[test]
    fn checkerboard_with_lattice_pitch_is_constant_per_cube() {
        let gap = 1.0;
        let mesh = Texture::Checkerboard { period: 1.0 + gap }.apply(&models::cube_lattice(3, gap));
        let colors = mesh.colors.as_ref().unwrap();
        for cube in 0..27 {
            let c = &colors[cube * 8..cube * 8 + 8];
            assert!(c.iter().all(|x| x == &c[0]));
            let parity = (cube % 3 + cube / 3 % 3 + cube / 9) % 2;
            assert_eq!(c[0], if parity == 0 { EVEN } else { ODD });
        }
    }

    #[test]
    fn ramp_spans_unit_range() {
        let mesh = Texture::Ramp.apply(&models::icosphere(1));
        for i in 0..3 {
            let vals: Vec<f64> = mesh.colors.as_ref().unwrap().iter().map(|c| c[i]).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        }
    }
}
