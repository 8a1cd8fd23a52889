//! Planar vector math and oriented rectangles.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or direction in the global plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise rotation by 90 degrees (left normal of a heading).
    pub fn rot90(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, other: Vec2, t: f64) -> Vec2 {
        self + (other - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
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

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Vehicle footprint: a rectangle with `length` along `heading` and `width`
/// across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    /// Unit vector along the length axis.
    pub heading: Vec2,
    pub width: f64,
    pub length: f64,
}

impl OrientedRect {
    pub fn new(center: Vec2, heading: Vec2, width: f64, length: f64) -> Self {
        Self {
            center,
            heading: heading.normalized(),
            width,
            length,
        }
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let fwd = self.heading * (0.5 * self.length);
        let side = self.heading.rot90() * (0.5 * self.width);
        [
            self.center + fwd + side,
            self.center + fwd - side,
            self.center - fwd - side,
            self.center - fwd + side,
        ]
    }

    fn project_onto(&self, axis: Vec2) -> (f64, f64) {
        let c = self.center.dot(axis);
        let r = 0.5 * self.length * self.heading.dot(axis).abs()
            + 0.5 * self.width * self.heading.rot90().dot(axis).abs();
        (c - r, c + r)
    }

    /// Separating-axis test over the four face normals. Touching edges count
    /// as an overlap.
    pub fn overlaps(&self, other: &OrientedRect) -> bool {
        let axes = [
            self.heading,
            self.heading.rot90(),
            other.heading,
            other.heading.rot90(),
        ];
        axes.iter().all(|&axis| {
            let (a0, a1) = self.project_onto(axis);
            let (b0, b1) = other.project_onto(axis);
            a0.max(b0) <= a1.min(b1)
        })
    }

    pub fn contains(&self, point: Vec2) -> bool {
        let rel = point - self.center;
        rel.dot(self.heading).abs() <= 0.5 * self.length
            && rel.dot(self.heading.rot90()).abs() <= 0.5 * self.width
    }

    /// Euclidean distance between the two footprints; zero when they overlap.
    pub fn distance_to(&self, other: &OrientedRect) -> f64 {
        if self.overlaps(other) {
            return 0.0;
        }
        let a = self.corners();
        let b = other.corners();
        let mut best = f64::INFINITY;
        for i in 0..4 {
            let (a0, a1) = (a[i], a[(i + 1) % 4]);
            let (b0, b1) = (b[i], b[(i + 1) % 4]);
            for j in 0..4 {
                best = best.min(point_segment_distance(b[j], a0, a1));
                best = best.min(point_segment_distance(a[j], b0, b1));
            }
        }
        best
    }
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}
