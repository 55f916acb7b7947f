//! Planar vectors and oriented rectangles.
//!
//! Rectangles are closed sets: a point on the boundary is inside, and two
//! rectangles that only touch along an edge or at a corner intersect.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from +x.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = angle % two_pi;
    if a <= -std::f64::consts::PI {
        a += two_pi;
    } else if a > std::f64::consts::PI {
        a -= two_pi;
    }
    a
}

/// A rectangle with a center, half extents along its local axes and a heading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrientedBox {
    pub center: Vec2,
    pub half_extents: Vec2,
    #[serde(default)]
    pub heading: f64,
}

impl OrientedBox {
    pub fn new(center: Vec2, half_extents: Vec2, heading: f64) -> Self {
        Self {
            center,
            half_extents,
            heading,
        }
    }

    pub fn axis_aligned(center: Vec2, half_extents: Vec2) -> Self {
        Self::new(center, half_extents, 0.0)
    }

    /// Local x and y axes in world coordinates. Exact for heading 0.
    pub fn axes(&self) -> [Vec2; 2] {
        if self.heading == 0.0 {
            return [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        }
        let u = Vec2::from_angle(self.heading);
        [u, Vec2::new(-u.y, u.x)]
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let [u, v] = self.axes();
        let a = u * self.half_extents.x;
        let b = v * self.half_extents.y;
        [
            self.center + a + b,
            self.center - a + b,
            self.center - a - b,
            self.center + a - b,
        ]
    }

    fn local(&self, p: Vec2) -> Vec2 {
        let [u, v] = self.axes();
        let d = p - self.center;
        Vec2::new(d.dot(u), d.dot(v))
    }

    /// Closed point-in-rectangle test.
    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.local(p);
        l.x.abs() <= self.half_extents.x && l.y.abs() <= self.half_extents.y
    }

    /// Separating-axis intersection test; touching boxes intersect.
    pub fn intersects(&self, other: &OrientedBox) -> bool {
        let a = self.corners();
        let b = other.corners();
        for axis in self.axes().into_iter().chain(other.axes()) {
            let (amin, amax) = project(&a, axis);
            let (bmin, bmax) = project(&b, axis);
            if amax < bmin || bmax < amin {
                return false;
            }
        }
        true
    }

    /// Distance along the ray to the first point of the rectangle, if the ray
    /// crosses its interior with a chord of positive length.
    ///
    /// Rays that only graze an edge or a corner do not count as hits. A ray
    /// starting inside the rectangle reports distance 0.
    pub fn ray_intersection(&self, origin: Vec2, direction: Vec2) -> Option<f64> {
        let o = self.local(origin);
        let [u, v] = self.axes();
        let d = Vec2::new(direction.dot(u), direction.dot(v));
        let mut t_lo = f64::NEG_INFINITY;
        let mut t_hi = f64::INFINITY;
        for (oc, dc, h) in [
            (o.x, d.x, self.half_extents.x),
            (o.y, d.y, self.half_extents.y),
        ] {
            if dc == 0.0 {
                if oc <= -h || oc >= h {
                    return None;
                }
            } else {
                let t1 = (-h - oc) / dc;
                let t2 = (h - oc) / dc;
                t_lo = t_lo.max(t1.min(t2));
                t_hi = t_hi.min(t1.max(t2));
            }
        }
        if t_lo < t_hi && t_hi > 0.0 {
            Some(t_lo.max(0.0))
        } else {
            None
        }
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let c = self.corners();
        let mut lo = c[0];
        let mut hi = c[0];
        for p in &c[1..] {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }
}

fn project(points: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let d = p.dot(axis);
            (lo.min(d), hi.max(d))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_counts_as_inside() {
        let b = OrientedBox::axis_aligned(Vec2::ZERO, Vec2::new(1.0, 0.5));
        assert!(b.contains(Vec2::new(1.0, 0.5)));
        assert!(b.contains(Vec2::new(-1.0, -0.5)));
        assert!(!b.contains(Vec2::new(1.0 + 1e-12, 0.0)));
    }

    #[test]
    fn touching_boxes_intersect() {
        let a = OrientedBox::axis_aligned(Vec2::ZERO, Vec2::new(1.0, 1.0));
        let b = OrientedBox::axis_aligned(Vec2::new(2.0, 0.0), Vec2::new(1.0, 1.0));
        let c = OrientedBox::axis_aligned(Vec2::new(2.0 + 1e-9, 0.0), Vec2::new(1.0, 1.0));
        assert!(a.intersects(&b));
        assert!(!a.intersects(&c));
    }

    #[test]
    fn rotated_separation_found_on_second_box_axis() {
        // Diamond next to a square: only the diamond's axes separate them.
        let a = OrientedBox::axis_aligned(Vec2::ZERO, Vec2::new(1.0, 1.0));
        let b = OrientedBox::new(
            Vec2::new(2.5, 2.5),
            Vec2::new(1.0, 1.0),
            std::f64::consts::FRAC_PI_4,
        );
        assert!(!a.intersects(&b));
    }

    #[test]
    fn ray_hits_near_face() {
        let b = OrientedBox::axis_aligned(Vec2::new(5.0, 0.0), Vec2::new(1.0, 1.0));
        let t = b.ray_intersection(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(t, 4.0);
        assert!(b
            .ray_intersection(Vec2::ZERO, Vec2::new(-1.0, 0.0))
            .is_none());
        // Grazing the top edge is not a hit.
        assert!(b
            .ray_intersection(Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0))
            .is_none());
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }
}
