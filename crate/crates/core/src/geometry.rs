//! Points in dimension one or two, balls, and target regions.
//!
//! Points always carry two coordinates; in dimension one the second
//! coordinate stays at zero so that norms and distances need no dimension
//! argument.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point(pub [f64; 2]);

impl Point {
    pub const ORIGIN: Point = Point([0.0, 0.0]);

    pub fn new1(x: f64) -> Self {
        Point([x, 0.0])
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Point([x, y])
    }

    /// Builds a point from a coordinate slice of length one or two.
    pub fn from_slice(c: &[f64]) -> Option<Self> {
        match c {
            [x] => Some(Point::new1(*x)),
            [x, y] => Some(Point::new2(*x, *y)),
            _ => None,
        }
    }

    pub fn coords(&self, dim: usize) -> &[f64] {
        &self.0[..dim]
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn norm2(&self) -> f64 {
        self.0[0] * self.0[0] + self.0[1] * self.0[1]
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm2().sqrt()
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        (*self - *other).norm()
    }

    #[inline]
    pub fn dot(&self, other: &Point) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        Point([
            0.5 * (self.0[0] + other.0[0]),
            0.5 * (self.0[1] + other.0[1]),
        ])
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0[0], self.0[1])
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, o: Point) {
        self.0[0] += o.0[0];
        self.0[1] += o.0[1];
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point([self.0[0] * s, self.0[1] * s])
    }
}

/// Volume of the unit ball in dimension `dim` (1 or 2).
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        _ => std::f64::consts::PI,
    }
}

/// Surface measure of the unit sphere in dimension `dim` (1 or 2).
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI,
    }
}

/// Open Euclidean ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Self {
        Ball { center, radius }
    }

    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        self.center.dist(p) < self.radius
    }

    pub fn volume(&self, dim: usize) -> f64 {
        unit_ball_volume(dim) * self.radius.powi(dim as i32)
    }
}

/// Target sets for hitting problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Empty,
    /// Closed ball.
    Ball { center: Point, radius: f64 },
    /// Closed axis-aligned box `[lo, hi]`; unused axes are ignored in dimension one.
    Box { lo: Point, hi: Point },
    /// Closed annulus `inner ≤ |x − center| ≤ outer`.
    Annulus { center: Point, inner: f64, outer: f64 },
}

impl Region {
    pub fn contains(&self, p: &Point, dim: usize) -> bool {
        match self {
            Region::Empty => false,
            Region::Ball { center, radius } => center.dist(p) <= *radius,
            Region::Box { lo, hi } => (0..dim).all(|k| p.0[k] >= lo.0[k] && p.0[k] <= hi.0[k]),
            Region::Annulus { center, inner, outer } => {
                let r = center.dist(p);
                r >= *inner && r <= *outer
            }
        }
    }

    /// Lebesgue measure in dimension `dim`.
    pub fn volume(&self, dim: usize) -> f64 {
        match self {
            Region::Empty => 0.0,
            Region::Ball { radius, .. } => unit_ball_volume(dim) * radius.powi(dim as i32),
            Region::Box { lo, hi } => (0..dim).map(|k| (hi.0[k] - lo.0[k]).max(0.0)).product(),
            Region::Annulus { inner, outer, .. } => {
                unit_ball_volume(dim) * (outer.powi(dim as i32) - inner.powi(dim as i32))
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Region::Empty)
    }

    /// Whether the straight segment from `a` to `b` meets the region.
    ///
    /// Used for diffusive steps, whose sample paths are continuous between
    /// skeleton points.
    pub fn meets_segment(&self, a: &Point, b: &Point, dim: usize) -> bool {
        if self.contains(a, dim) || self.contains(b, dim) {
            return true;
        }
        match self {
            Region::Empty => false,
            Region::Ball { center, radius } => segment_point_distance(a, b, center) <= *radius,
            Region::Annulus { center, inner, outer } => {
                // Both endpoints miss; the segment meets the annulus iff it
                // crosses the outer sphere or dips to the inner sphere from outside.
                let ra = center.dist(a);
                let rb = center.dist(b);
                let dmin = segment_point_distance(a, b, center);
                let outside_a = ra > *outer;
                let outside_b = rb > *outer;
                if outside_a != outside_b {
                    return true;
                }
                outside_a && dmin <= *outer
                    || !outside_a && (ra < *inner) != (rb < *inner)
            }
            Region::Box { lo, hi } => {
                // Slab clipping.
                let mut t0 = 0.0_f64;
                let mut t1 = 1.0_f64;
                for k in 0..dim {
                    let d = b.0[k] - a.0[k];
                    if d == 0.0 {
                        if a.0[k] < lo.0[k] || a.0[k] > hi.0[k] {
                            return false;
                        }
                        continue;
                    }
                    let mut ta = (lo.0[k] - a.0[k]) / d;
                    let mut tb = (hi.0[k] - a.0[k]) / d;
                    if ta > tb {
                        std::mem::swap(&mut ta, &mut tb);
                    }
                    t0 = t0.max(ta);
                    t1 = t1.min(tb);
                    if t0 > t1 {
                        return false;
                    }
                }
                true
            }
        }
    }
}

fn segment_point_distance(a: &Point, b: &Point, c: &Point) -> f64 {
    let ab = *b - *a;
    let len2 = ab.norm2();
    if len2 == 0.0 {
        return a.dist(c);
    }
    let t = ((*c - *a).dot(&ab) / len2).clamp(0.0, 1.0);
    (*a + ab * t).dist(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_crossing_thin_interval() {
        let r = Region::Ball { center: Point::new1(0.5), radius: 0.01 };
        assert!(r.meets_segment(&Point::new1(0.3), &Point::new1(0.7), 1));
        assert!(!r.meets_segment(&Point::new1(0.3), &Point::new1(0.48), 1));
        let b = Region::Box { lo: Point::new2(0.0, 0.0), hi: Point::new2(1.0, 1.0) };
        assert!(b.meets_segment(&Point::new2(-1.0, 0.5), &Point::new2(2.0, 0.5), 2));
        assert!(!b.meets_segment(&Point::new2(-1.0, 2.0), &Point::new2(2.0, 2.0), 2));
    }

    #[test]
    fn annulus_crossed_from_center() {
        let r = Region::Annulus { center: Point::ORIGIN, inner: 0.2, outer: 0.3 };
        assert!(r.meets_segment(&Point::new2(0.1, 0.0), &Point::new2(0.5, 0.0), 2));
        assert!(!r.meets_segment(&Point::new2(0.05, 0.0), &Point::new2(0.1, 0.0), 2));
        assert!((r.volume(1) - 0.2).abs() < 1e-15);
    }
}
