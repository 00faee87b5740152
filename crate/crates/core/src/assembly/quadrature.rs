//! Symmetric triangle quadrature rules with positive weights.

use crate::geometry::{triangle_area, Vec3};

/// Barycentric points with weights summing to 1; scaled by triangle area on use.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureRule {
    pub degree: u32,
    pub points: &'static [([f64; 3], f64)],
}

const A4: f64 = 0.445948490915965;
const B4: f64 = 0.091576213509771;
const W4A: f64 = 0.223381589678011;
const W4B: f64 = 0.109951743655322;

/// Six points, exact through degree 4.
pub const DEGREE4: QuadratureRule = QuadratureRule {
    degree: 4,
    points: &[
        ([1.0 - 2.0 * A4, A4, A4], W4A),
        ([A4, 1.0 - 2.0 * A4, A4], W4A),
        ([A4, A4, 1.0 - 2.0 * A4], W4A),
        ([1.0 - 2.0 * B4, B4, B4], W4B),
        ([B4, 1.0 - 2.0 * B4, B4], W4B),
        ([B4, B4, 1.0 - 2.0 * B4], W4B),
    ],
};

const A6: f64 = 0.249286745170910;
const B6: f64 = 0.063089014491502;
const C6: [f64; 3] = [0.053145049844817, 0.310352451033784, 0.636502499121399];
const W6A: f64 = 0.116786275726379;
const W6B: f64 = 0.050844906370207;
const W6C: f64 = 0.082851075618374;

/// Twelve points, exact through degree 6.
pub const DEGREE6: QuadratureRule = QuadratureRule {
    degree: 6,
    points: &[
        ([1.0 - 2.0 * A6, A6, A6], W6A),
        ([A6, 1.0 - 2.0 * A6, A6], W6A),
        ([A6, A6, 1.0 - 2.0 * A6], W6A),
        ([1.0 - 2.0 * B6, B6, B6], W6B),
        ([B6, 1.0 - 2.0 * B6, B6], W6B),
        ([B6, B6, 1.0 - 2.0 * B6], W6B),
        ([C6[0], C6[1], C6[2]], W6C),
        ([C6[0], C6[2], C6[1]], W6C),
        ([C6[1], C6[0], C6[2]], W6C),
        ([C6[1], C6[2], C6[0]], W6C),
        ([C6[2], C6[0], C6[1]], W6C),
        ([C6[2], C6[1], C6[0]], W6C),
    ],
};

impl QuadratureRule {
    /// Physical points and area-scaled weights on a triangle.
    pub fn points_on<'a>(&'a self, tri: &'a [Vec3; 3]) -> impl Iterator<Item = (Vec3, f64)> + 'a {
        let area = triangle_area(&tri[0], &tri[1], &tri[2]);
        self.points.iter().map(move |(b, w)| (tri[0] * b[0] + tri[1] * b[1] + tri[2] * b[2], w * area))
    }

    pub fn integrate(&self, tri: &[Vec3; 3], mut f: impl FnMut(&Vec3) -> f64) -> f64 {
        self.points_on(tri).map(|(p, w)| w * f(&p)).sum()
    }
}
