//! Small geometric kernel: points, boxes and convex polygon clipping.

use nalgebra::Vector3;
use smallvec::SmallVec;

pub type Vec3 = Vector3<f64>;

/// Convex planar polygon. A triangle clipped by a box has at most nine
/// vertices; the inline capacity covers that without spilling.
pub type Polygon = SmallVec<[Vec3; 9]>;

/// Tolerance used by the closed-box intersection predicates.
pub const TOUCH_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Aabb::new(first, first);
        for p in it {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn contains(&self, p: &Vec3, eps: f64) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - eps && p[a] <= self.max[a] + eps)
    }

    /// Intersection of two boxes; may be degenerate (a face, edge or point).
    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let min = self.min.sup(&other.min);
        let max = self.max.inf(&other.max);
        if (0..3).all(|a| min[a] <= max[a]) {
            Some(Aabb::new(min, max))
        } else {
            None
        }
    }
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Area vector (Newell) of a planar polygon; its norm is twice the area.
pub fn polygon_normal(poly: &[Vec3]) -> Vec3 {
    let mut n = Vec3::zeros();
    if poly.len() < 3 {
        return n;
    }
    let o = poly[0];
    for i in 1..poly.len() - 1 {
        n += (poly[i] - o).cross(&(poly[i + 1] - o));
    }
    n
}

pub fn polygon_area(poly: &[Vec3]) -> f64 {
    0.5 * polygon_normal(poly).norm()
}

pub fn polygon_centroid(poly: &[Vec3]) -> Vec3 {
    let o = poly[0];
    let mut acc = Vec3::zeros();
    let mut total = 0.0;
    for i in 1..poly.len().saturating_sub(1) {
        let a = triangle_area(&o, &poly[i], &poly[i + 1]);
        acc += a * (o + poly[i] + poly[i + 1]) / 3.0;
        total += a;
    }
    if total > 0.0 {
        acc / total
    } else {
        poly.iter().sum::<Vec3>() / poly.len() as f64
    }
}

/// Fan triangles `(p0, p_i, p_{i+1})` of a convex polygon.
pub fn fan(poly: &[Vec3]) -> impl Iterator<Item = [Vec3; 3]> + '_ {
    (1..poly.len().saturating_sub(1)).map(move |i| [poly[0], poly[i], poly[i + 1]])
}

/// Keeps the part of `poly` with `sign * (x[axis] - c) >= 0`.
fn clip_half(poly: &[Vec3], axis: usize, c: f64, sign: f64) -> Polygon {
    let mut out = Polygon::new();
    let n = poly.len();
    if n == 0 {
        return out;
    }
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let dp = sign * (p[axis] - c);
        let dq = sign * (q[axis] - c);
        if dp >= 0.0 {
            out.push(p);
        }
        if (dp > 0.0 && dq < 0.0) || (dp < 0.0 && dq > 0.0) {
            let t = dp / (dp - dq);
            let mut x = p + (q - p) * t;
            x[axis] = c;
            out.push(x);
        }
    }
    dedup(&mut out);
    out
}

fn dedup(poly: &mut Polygon) {
    poly.dedup_by(|a, b| a == b);
    while poly.len() > 1 && poly.first() == poly.last() {
        poly.pop();
    }
}

/// Splits a convex polygon by the plane `x[axis] = c` into its closed lower
/// and upper parts.
pub fn split_polygon(poly: &[Vec3], axis: usize, c: f64) -> (Polygon, Polygon) {
    (clip_half(poly, axis, c, -1.0), clip_half(poly, axis, c, 1.0))
}

/// Sutherland-Hodgman clip of a convex polygon against the closed box
/// expanded by `eps`. Returns the (possibly degenerate) remaining vertices.
pub fn clip_polygon_to_box(poly: &[Vec3], b: &Aabb, eps: f64) -> Polygon {
    let mut cur: Polygon = poly.iter().copied().collect();
    for axis in 0..3 {
        cur = clip_half(&cur, axis, b.min[axis] - eps, 1.0);
        if cur.is_empty() {
            return cur;
        }
        cur = clip_half(&cur, axis, b.max[axis] + eps, -1.0);
        if cur.is_empty() {
            return cur;
        }
    }
    cur
}

/// True when the closed polygon and the closed box share a point (up to `eps`).
pub fn polygon_touches_box(poly: &[Vec3], b: &Aabb, eps: f64) -> bool {
    !clip_polygon_to_box(poly, b, eps).is_empty()
}

/// Liang-Barsky test of a closed segment against a closed box.
pub fn segment_touches_box(p: &Vec3, q: &Vec3, b: &Aabb, eps: f64) -> bool {
    let d = q - p;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for a in 0..3 {
        let lo = b.min[a] - eps;
        let hi = b.max[a] + eps;
        if d[a].abs() < 1e-300 {
            if p[a] < lo || p[a] > hi {
                return false;
            }
        } else {
            let mut ta = (lo - p[a]) / d[a];
            let mut tb = (hi - p[a]) / d[a];
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// Rotation matrix from a unit quaternion given as (w, x, y, z); the input is normalized.
pub fn rotation_from_quaternion(q: [f64; 4]) -> nalgebra::Matrix3<f64> {
    let uq = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
    uq.to_rotation_matrix().into_inner()
}
