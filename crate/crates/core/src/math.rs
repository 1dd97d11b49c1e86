//! Small fixed-size linear algebra and angle helpers shared by the
//! geometry and beamforming modules.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

/// A point (or displacement) in 3D Cartesian space, in meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Point3) -> Point3 {
        Point3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Point3) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction; `None` for (near-)zero vectors.
    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        if n < 1e-300 {
            None
        } else {
            Some(self * (1.0 / n))
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        self * -1.0
    }
}

/// Row-major 3x3 real matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub fn new(m: [[f64; 3]; 3]) -> Self {
        Mat3 { m }
    }

    pub fn identity() -> Self {
        Mat3::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn mul_vec(&self, v: Point3) -> Point3 {
        Point3 {
            x: self.m[0][0] * v.x + self.m[0][1] * v.y + self.m[0][2] * v.z,
            y: self.m[1][0] * v.x + self.m[1][1] * v.y + self.m[1][2] * v.z,
            z: self.m[2][0] * v.x + self.m[2][1] * v.y + self.m[2][2] * v.z,
        }
    }

    pub fn column(&self, j: usize) -> Point3 {
        Point3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

/// Reduce an angle to `[0, 2*pi)`.
pub fn wrap_2pi(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can return TAU itself when theta is a tiny negative number.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduce an angle to `(-pi, pi]`.
pub fn principal_angle(theta: f64) -> f64 {
    let r = wrap_2pi(theta);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wallis integral `W_q = integral_0^{pi/2} cos^q(t) dt`.
///
/// Closed form via the recurrence `W_q = (q-1)/q * W_{q-2}` for integer `q`,
/// composite Simpson quadrature otherwise.
pub fn wallis_integral(q: f64) -> f64 {
    if q < 0.0 {
        return f64::NAN;
    }
    if q.fract() == 0.0 && q <= 1000.0 {
        let n = q as u64;
        let mut w = if n % 2 == 0 { PI / 2.0 } else { 1.0 };
        let mut k = if n % 2 == 0 { 2 } else { 3 };
        while k <= n {
            w *= (k - 1) as f64 / k as f64;
            k += 2;
        }
        return w;
    }
    // Simpson on [0, pi/2]; the integrand is smooth for q >= 0.
    let n = 4096;
    let h = (PI / 2.0) / n as f64;
    let f = |t: f64| t.cos().max(0.0).powf(q);
    let mut acc = f(0.0) + f(PI / 2.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// One angular interval `[start, end]` on the circle, `end >= start`,
/// `end - start <= 2*pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcInterval {
    pub start: f64,
    pub end: f64,
}

impl ArcInterval {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

/// Solve `a*cos(t) + b*sin(t) <= c` for `t` on the circle.
///
/// Returns the solution set as a list of arcs (empty list = no solution,
/// one full-circle arc = always true).
pub fn sinusoid_leq(a: f64, b: f64, c: f64) -> Vec<ArcInterval> {
    let r = a.hypot(b);
    if r < 1e-300 {
        return if c >= 0.0 { vec![ArcInterval { start: 0.0, end: TAU }] } else { vec![] };
    }
    if c >= r {
        return vec![ArcInterval { start: 0.0, end: TAU }];
    }
    if c < -r {
        return vec![];
    }
    // r*cos(t - phi) <= c  <=>  t - phi in [alpha, 2*pi - alpha]
    let phi = b.atan2(a);
    let alpha = (c / r).clamp(-1.0, 1.0).acos();
    vec![ArcInterval { start: phi + alpha, end: phi + TAU - alpha }]
}

/// Intersect several arc-sets on the circle; each input is a union of arcs.
///
/// The result is returned as arcs with `start` in `[0, 2*pi)`.
pub fn intersect_arcs(sets: &[Vec<ArcInterval>]) -> Vec<ArcInterval> {
    let mut current = vec![ArcInterval { start: 0.0, end: TAU }];
    for set in sets {
        let mut next = Vec::new();
        for cur in &current {
            for arc in set {
                // Try the arc at three unwrappings so overlaps across the
                // 0/2*pi seam are caught.
                for shift in [-TAU, 0.0, TAU] {
                    let s = arc.start + shift;
                    let e = arc.end + shift;
                    let lo = s.max(cur.start);
                    let hi = e.min(cur.end);
                    if hi > lo + 1e-15 {
                        next.push(ArcInterval { start: lo, end: hi });
                    }
                }
            }
        }
        current = next;
        if current.is_empty() {
            break;
        }
    }
    // Normalize starts into [0, 2*pi) and merge duplicates from the
    // unwrapping trick.
    let mut out: Vec<ArcInterval> = Vec::new();
    for arc in current {
        let mut s = arc.start;
        let len = arc.len();
        while s < 0.0 {
            s += TAU;
        }
        while s >= TAU {
            s -= TAU;
        }
        let cand = ArcInterval { start: s, end: s + len };
        if !out.iter().any(|o| (o.start - cand.start).abs() < 1e-12 && (o.end - cand.end).abs() < 1e-12) {
            out.push(cand);
        }
    }
    out.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
    out
}
