//! Planar geometry on the ground plane.
//!
//! The world lives on `y = 0`; everything here works in the `(x, z)` plane.
//! Headings are yaw angles in degrees measured clockwise from `+z` when viewed
//! from above, so heading 0 points along `+z` and heading 90 along `+x`.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, z: 0.0 };

    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    /// Unit vector pointing along `heading` (degrees).
    pub fn from_heading(heading: f64) -> Self {
        let r = heading.to_radians();
        Self::new(r.sin(), r.cos())
    }

    /// Heading of this direction in `[0, 360)`.
    pub fn heading(self) -> f64 {
        normalize_deg(self.x.atan2(self.z).to_degrees())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.z * o.z
    }

    /// z-up style cross product `self.x * o.z - self.z * o.x`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.z - self.z * o.x
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn length_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).length()
    }

    pub fn normalized(self) -> Vec2 {
        let l = self.length();
        if l > 0.0 {
            self * (1.0 / l)
        } else {
            Vec2::ZERO
        }
    }

    /// Direction 90 degrees clockwise (to the driver's right for a forward vector).
    pub fn right(self) -> Vec2 {
        Vec2::new(self.z, -self.x)
    }

    pub fn to_xyz(self) -> [f64; 3] {
        [self.x, 0.0, self.z]
    }

    pub fn from_xyz(p: [f64; 3]) -> Self {
        Self::new(p[0], p[2])
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.z + o.z)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.z += o.z;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.z - o.z)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.z -= o.z;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.z * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.z)
    }
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn normalize_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Oriented rectangle: a vehicle footprint or an axis-aligned obstacle block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    /// Unit vector along the long axis.
    pub forward: Vec2,
    pub half_length: f64,
    pub half_width: f64,
}

impl Obb {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Self {
            center,
            forward: Vec2::from_heading(heading),
            half_length: 0.5 * length,
            half_width: 0.5 * width,
        }
    }

    pub fn axis_aligned(min: Vec2, max: Vec2) -> Self {
        Self {
            center: (min + max) * 0.5,
            forward: Vec2::new(0.0, 1.0),
            half_length: 0.5 * (max.z - min.z),
            half_width: 0.5 * (max.x - min.x),
        }
    }

    /// Corners in counter-clockwise order when viewed with `+x` right and `+z` up.
    pub fn corners(&self) -> [Vec2; 4] {
        let f = self.forward * self.half_length;
        let r = self.forward.right() * self.half_width;
        let c = self.center;
        [c + f + r, c + f - r, c - f - r, c - f + r]
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    /// Point expressed in the box frame as (lateral, longitudinal).
    fn local(&self, p: Vec2) -> (f64, f64) {
        let d = p - self.center;
        (d.dot(self.forward.right()), d.dot(self.forward))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (lx, lz) = self.local(p);
        lx.abs() <= self.half_width && lz.abs() <= self.half_length
    }

    /// Euclidean distance from `p` to the rectangle (0 inside).
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let (lx, lz) = self.local(p);
        let dx = (lx.abs() - self.half_width).max(0.0);
        let dz = (lz.abs() - self.half_length).max(0.0);
        dx.hypot(dz)
    }

    /// Entry distance of the ray `origin + t * dir` (unit `dir`) for `t` in `[0, max_t]`.
    /// A ray starting inside the box reports 0.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2, max_t: f64) -> Option<f64> {
        let (ox, oz) = self.local(origin);
        let dx = dir.dot(self.forward.right());
        let dz = dir.dot(self.forward);
        let mut t0 = 0.0_f64;
        let mut t1 = max_t;
        for (o, d, h) in [(ox, dx, self.half_width), (oz, dz, self.half_length)] {
            if d.abs() < 1e-12 {
                if o.abs() > h {
                    return None;
                }
            } else {
                let mut ta = (-h - o) / d;
                let mut tb = (h - o) / d;
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some(t0)
    }
}

/// Line segment obstacle edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let ab = self.b - self.a;
        let len2 = ab.length_sq();
        let t = if len2 > 0.0 {
            ((p - self.a).dot(ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (self.a + ab * t).distance(p)
    }

    /// Distance along the ray `origin + t * dir` to this segment, within `[0, max_t]`.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2, max_t: f64) -> Option<f64> {
        let e = self.b - self.a;
        let denom = dir.cross(e);
        let w = self.a - origin;
        if denom.abs() < 1e-12 {
            // parallel; collinear overlap counts as a hit at the nearest endpoint
            if w.cross(dir).abs() > 1e-9 {
                return None;
            }
            let ta = w.dot(dir);
            let tb = (self.b - origin).dot(dir);
            let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
            if hi < 0.0 || lo > max_t {
                return None;
            }
            return Some(lo.max(0.0));
        }
        let t = w.cross(e) / denom;
        let u = w.cross(dir) / denom;
        if (0.0..=max_t).contains(&t) && (0.0..=1.0).contains(&u) {
            Some(t)
        } else {
            None
        }
    }

    pub fn intersects(&self, o: &Segment) -> bool {
        let d1 = (self.b - self.a).cross(o.a - self.a);
        let d2 = (self.b - self.a).cross(o.b - self.a);
        let d3 = (o.b - o.a).cross(self.a - o.a);
        let d4 = (o.b - o.a).cross(self.b - o.a);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        let on = |p: Vec2, s: &Segment, d: f64| {
            d == 0.0
                && p.x >= s.a.x.min(s.b.x)
                && p.x <= s.a.x.max(s.b.x)
                && p.z >= s.a.z.min(s.b.z)
                && p.z <= s.a.z.max(s.b.z)
        };
        on(o.a, self, d1) || on(o.b, self, d2) || on(self.a, o, d3) || on(self.b, o, d4)
    }
}

/// Separating-axis overlap test between two convex polygons (2 vertices for a
/// segment, 4 for a rectangle).
///
/// Returns the minimum-translation normal and the penetration depth: moving
/// `b` by `depth` along the normal separates the pair. Ties between the two
/// directions of an axis resolve towards `b`'s centroid. Touching polygons
/// (zero overlap) do not count.
pub fn sat_overlap(a: &[Vec2], b: &[Vec2]) -> Option<(Vec2, f64)> {
    let mut best_depth = f64::INFINITY;
    let mut best_axis = Vec2::ZERO;
    let toward_b = centroid(b) - centroid(a);
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let edge = poly[(i + 1) % n] - poly[i];
            if edge.length_sq() < 1e-24 {
                continue;
            }
            let axis = edge.right().normalized();
            let (amin, amax) = project(a, axis);
            let (bmin, bmax) = project(b, axis);
            // distance b must travel along +axis or -axis to clear a
            let forward = amax - bmin;
            let backward = bmax - amin;
            if forward <= 0.0 || backward <= 0.0 {
                return None;
            }
            let (depth, dir) = if forward < backward || (forward == backward && toward_b.dot(axis) >= 0.0) {
                (forward, axis)
            } else {
                (backward, -axis)
            };
            if depth < best_depth {
                best_depth = depth;
                best_axis = dir;
            }
        }
    }
    Some((best_axis, best_depth))
}

fn project(poly: &[Vec2], axis: Vec2) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

fn centroid(poly: &[Vec2]) -> Vec2 {
    let sum = poly.iter().fold(Vec2::ZERO, |acc, &p| acc + p);
    sum * (1.0 / poly.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn heading_convention() {
        assert_abs_diff_eq!(Vec2::new(0.0, 1.0).heading(), 0.0);
        assert_abs_diff_eq!(Vec2::new(1.0, 0.0).heading(), 90.0);
        assert_abs_diff_eq!(Vec2::new(0.0, -1.0).heading(), 180.0);
        assert_abs_diff_eq!(Vec2::new(-1.0, 0.0).heading(), 270.0);
        let f = Vec2::from_heading(0.0);
        assert_abs_diff_eq!(f.right().x, 1.0);
    }

    #[test]
    fn normalize_wraps() {
        assert_eq!(normalize_deg(-10.0), 350.0);
        assert_eq!(normalize_deg(360.0), 0.0);
        assert!(normalize_deg(-1e-20) < 360.0);
    }

    #[test]
    fn obb_ray_from_behind() {
        let b = Obb::new(Vec2::new(0.0, 5.0), 0.0, 4.0, 2.0);
        let t = b.ray_hit(Vec2::ZERO, Vec2::new(0.0, 1.0), 10.0).unwrap();
        assert_abs_diff_eq!(t, 3.0, epsilon = 1e-12);
        assert!(b.ray_hit(Vec2::ZERO, Vec2::new(0.0, 1.0), 2.0).is_none());
        assert!(b.ray_hit(Vec2::ZERO, Vec2::new(1.0, 0.0), 10.0).is_none());
    }

    #[test]
    fn segment_ray() {
        let s = Segment::new(Vec2::new(-1.0, 4.0), Vec2::new(1.0, 4.0));
        assert_abs_diff_eq!(s.ray_hit(Vec2::ZERO, Vec2::new(0.0, 1.0), 6.0).unwrap(), 4.0);
        assert!(s.ray_hit(Vec2::ZERO, Vec2::new(0.0, -1.0), 6.0).is_none());
    }

    #[test]
    fn sat_coincident_boxes_penetrate_by_width() {
        let a = Obb::new(Vec2::ZERO, 30.0, 4.5, 1.9);
        let (n, d) = sat_overlap(&a.corners(), &a.corners()).unwrap();
        assert_abs_diff_eq!(d, 1.9, epsilon = 1e-9);
        assert_abs_diff_eq!(n.length(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sat_separated() {
        let a = Obb::new(Vec2::ZERO, 0.0, 4.5, 1.9);
        let b = Obb::new(Vec2::new(10.0, 0.0), 0.0, 4.5, 1.9);
        assert!(sat_overlap(&a.corners(), &b.corners()).is_none());
    }
}
