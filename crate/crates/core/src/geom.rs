//! Planar geometry primitives.
//!
//! Two numeric layers coexist:
//!
//! * [`Pt`] — `f64` points used for sampling, dynamics, chord angles and
//!   rendering, where a tolerance is inherent anyway;
//! * [`RPt`] — exact `BigRational` points used for the combinatorial
//!   predicates (side-of-line, strict convexity, half-plane spanning)
//!   whose outcomes must be decided by a sign, never by a tolerance.

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

/// Floating-point planar point / vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pt {
    pub x: f64,
    pub y: f64,
}

impl Pt {
    pub const fn new(x: f64, y: f64) -> Self {
        Pt { x, y }
    }

    pub const ZERO: Pt = Pt::new(0.0, 0.0);

    pub fn from_polar(r: f64, theta: f64) -> Pt {
        Pt::new(r * theta.cos(), r * theta.sin())
    }

    pub fn dot(self, o: Pt) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product `self × o`.
    pub fn cross(self, o: Pt) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn dist(self, o: Pt) -> f64 {
        (self - o).norm()
    }

    pub fn unit(self) -> Pt {
        let n = self.norm();
        Pt::new(self.x / n, self.y / n)
    }

    /// Polar angle in `[0, 2π)`.
    pub fn angle(self) -> f64 {
        norm_angle(self.y.atan2(self.x))
    }

    /// Rotation by `theta` about the origin.
    pub fn rot(self, theta: f64) -> Pt {
        let (s, c) = theta.sin_cos();
        Pt::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Pt, t: f64) -> Pt {
        self + (o - self) * t
    }

    /// Complex multiplication, reading the point as `x + iy`.
    pub fn cmul(self, o: Pt) -> Pt {
        Pt::new(self.x * o.x - self.y * o.y, self.x * o.y + self.y * o.x)
    }
}

impl Add for Pt {
    type Output = Pt;
    fn add(self, o: Pt) -> Pt {
        Pt::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Pt {
    type Output = Pt;
    fn sub(self, o: Pt) -> Pt {
        Pt::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Pt {
    type Output = Pt;
    fn mul(self, k: f64) -> Pt {
        Pt::new(self.x * k, self.y * k)
    }
}

impl Neg for Pt {
    type Output = Pt;
    fn neg(self) -> Pt {
        Pt::new(-self.x, -self.y)
    }
}

/// Exact rational planar point / vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RPt {
    pub x: BigRational,
    pub y: BigRational,
}

/// Exact rational value of a finite `f64`.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("coordinate must be finite")
}

/// Nearest `f64` below/at the rational value (good to one ulp).
pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().expect("rational out of f64 range")
}

/// Sign of a rational number as `-1`, `0` or `1`.
pub fn sgn(q: &BigRational) -> i8 {
    if q.is_zero() {
        0
    } else if q.is_positive() {
        1
    } else {
        -1
    }
}

impl RPt {
    pub fn new(x: BigRational, y: BigRational) -> Self {
        RPt { x, y }
    }

    pub fn from_pt(p: Pt) -> Self {
        RPt::new(rational(p.x), rational(p.y))
    }

    pub fn to_pt(&self) -> Pt {
        Pt::new(to_f64(&self.x), to_f64(&self.y))
    }

    pub fn add(&self, o: &RPt) -> RPt {
        RPt::new(&self.x + &o.x, &self.y + &o.y)
    }

    pub fn sub(&self, o: &RPt) -> RPt {
        RPt::new(&self.x - &o.x, &self.y - &o.y)
    }

    pub fn neg(&self) -> RPt {
        RPt::new(-self.x.clone(), -self.y.clone())
    }

    pub fn scale(&self, k: &BigRational) -> RPt {
        RPt::new(&self.x * k, &self.y * k)
    }

    pub fn dot(&self, o: &RPt) -> BigRational {
        &self.x * &o.x + &self.y * &o.y
    }

    /// z-component of the cross product `self × o`.
    pub fn cross(&self, o: &RPt) -> BigRational {
        &self.x * &o.y - &self.y * &o.x
    }

    pub fn norm2(&self) -> BigRational {
        self.dot(self)
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }
}

/// Normalize an angle to `[0, 2π)`.
pub fn norm_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r < 0.0 {
        r += TAU;
    }
    if r >= TAU {
        r -= TAU;
    }
    if r == 0.0 {
        0.0 // collapse -0.0
    } else {
        r
    }
}

/// Circular distance between two angles, in `[0, π]`.
pub fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (norm_angle(a) - norm_angle(b)).abs();
    d.min(TAU - d)
}

/// Counterclockwise distance from angle `a` to angle `b`, in `[0, 2π)`.
pub fn ccw_dist(a: f64, b: f64) -> f64 {
    norm_angle(b - a)
}

/// Intersection angles of the oriented line `t ↦ p + t·d` with the unit
/// circle. Returns `(alpha, omega)` where `alpha` is the angle of the first
/// intersection along the orientation (smaller parameter `t`) and `omega`
/// the last; `None` when the line misses the circle or is tangent.
pub fn chord_angles(p: Pt, d: Pt) -> Option<(f64, f64)> {
    let a = d.norm2();
    if a == 0.0 {
        return None;
    }
    let b = p.dot(d);
    let c = p.norm2() - 1.0;
    let disc = b * b - a * c;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let first = p + d * ((-b - s) / a);
    let last = p + d * ((-b + s) / a);
    Some((first.angle(), last.angle()))
}

/// Half-plane class of a nonzero direction: `0` when its polar angle lies
/// in `[0, π)`, `1` when in `[π, 2π)`. Exact.
fn angular_half(v: &RPt) -> u8 {
    match sgn(&v.y) {
        1 => 0,
        -1 => 1,
        _ => {
            if sgn(&v.x) >= 0 {
                0
            } else {
                1
            }
        }
    }
}

/// Exact comparison of two nonzero directions by polar angle in `[0, 2π)`.
pub fn angular_cmp(a: &RPt, b: &RPt) -> Ordering {
    angular_half(a).cmp(&angular_half(b)).then_with(|| {
        match sgn(&a.cross(b)) {
            1 => Ordering::Less,
            -1 => Ordering::Greater,
            _ => Ordering::Equal,
        }
    })
}

/// Whether the counterclockwise rotation taking direction `u` onto
/// direction `v` is strictly less than π. Exact.
pub fn ccw_gap_lt_pi(u: &RPt, v: &RPt) -> bool {
    match sgn(&u.cross(v)) {
        1 => true,
        0 => sgn(&u.dot(v)) > 0,
        _ => false,
    }
}

/// Intersection of two lines given as (point, direction); `None` when the
/// directions are parallel. Exact.
pub fn line_intersection(a: &RPt, da: &RPt, b: &RPt, db: &RPt) -> Option<RPt> {
    let den = da.cross(db);
    if den.is_zero() {
        return None;
    }
    let t = b.sub(a).cross(db) / den;
    Some(a.add(&da.scale(&t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angle_normalization() {
        assert_eq!(norm_angle(0.0), 0.0);
        assert_eq!(norm_angle(TAU), 0.0);
        assert!((norm_angle(-PI / 2.0) - 3.0 * PI / 2.0).abs() < 1e-12);
        assert!((norm_angle(5.0 * PI) - PI).abs() < 1e-12);
        assert!((circ_dist(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
        assert!((ccw_dist(TAU - 0.1, 0.1) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn chord_through_center() {
        let (a, w) = chord_angles(Pt::ZERO, Pt::new(1.0, 0.0)).unwrap();
        assert!((a - PI).abs() < 1e-12);
        assert!(w.abs() < 1e-12);
    }

    #[test]
    fn chord_horizontal_secant() {
        // Line y = 0.5 oriented to the right: endpoints where sin θ = 0.5,
        // first hit on the left (5π/6), last on the right (π/6).
        let (a, w) = chord_angles(Pt::new(0.0, 0.5), Pt::new(1.0, 0.0)).unwrap();
        assert!((a - 5.0 * PI / 6.0).abs() < 1e-9);
        assert!((w - PI / 6.0).abs() < 1e-9);
        // Reversing the orientation swaps the endpoints.
        let (a2, w2) = chord_angles(Pt::new(0.0, 0.5), Pt::new(-2.0, 0.0)).unwrap();
        assert!((a2 - PI / 6.0).abs() < 1e-9);
        assert!((w2 - 5.0 * PI / 6.0).abs() < 1e-9);
    }

    #[test]
    fn chord_miss_and_tangent() {
        assert!(chord_angles(Pt::new(0.0, 1.5), Pt::new(1.0, 0.0)).is_none());
        assert!(chord_angles(Pt::new(0.0, 1.0), Pt::new(1.0, 0.0)).is_none());
    }

    #[test]
    fn exact_angular_order() {
        let dirs = [
            (1.0, 0.0),
            (1.0, 1.0),
            (0.0, 1.0),
            (-1.0, 1.0),
            (-1.0, 0.0),
            (-1.0, -1.0),
            (0.0, -1.0),
            (1.0, -1.0),
        ];
        let pts: Vec<RPt> = dirs
            .iter()
            .map(|&(x, y)| RPt::new(rational(x), rational(y)))
            .collect();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_eq!(angular_cmp(&pts[i], &pts[j]), i.cmp(&j), "{i} vs {j}");
            }
        }
        // Gaps of a quarter turn are < π; the gap from +x to -x is exactly
        // π and must be rejected; three-quarter turns are rejected.
        assert!(ccw_gap_lt_pi(&pts[0], &pts[2]));
        assert!(!ccw_gap_lt_pi(&pts[0], &pts[4]));
        assert!(!ccw_gap_lt_pi(&pts[2], &pts[0]));
        // Zero gap counts as < π.
        assert!(ccw_gap_lt_pi(&pts[0], &pts[0]));
    }

    #[test]
    fn lines_meet() {
        let p = line_intersection(
            &RPt::new(rational(0.0), rational(1.0)),
            &RPt::new(rational(1.0), rational(0.0)),
            &RPt::new(rational(2.0), rational(0.0)),
            &RPt::new(rational(0.0), rational(3.0)),
        )
        .unwrap();
        assert_eq!(p, RPt::new(rational(2.0), rational(1.0)));
        assert!(line_intersection(
            &RPt::new(rational(0.0), rational(0.0)),
            &RPt::new(rational(1.0), rational(1.0)),
            &RPt::new(rational(1.0), rational(0.0)),
            &RPt::new(rational(-2.0), rational(-2.0)),
        )
        .is_none());
    }
}
