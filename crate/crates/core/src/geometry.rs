//! Fresnel-zone ellipsoid geometry.
//!
//! A fractional zone of index `j` collects the points whose path via the
//! reflector exceeds the direct transmitter-receiver path by `j` wavelengths.
//! The zone boundary is a prolate spheroid with the transmitter and receiver
//! at its foci. This module builds those spheroids, intersects them with the
//! reflector plane, and validates every produced point against the defining
//! path-difference condition.

use crate::math::{intersect_arcs, sinusoid_leq, Mat3, Point3};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("wavelength must be positive, got {0}")]
    NonPositiveWavelength(f64),
    #[error("zone index must be non-negative, got {0}")]
    NegativeZoneIndex(f64),
    #[error("d1 + d2 = {sum} does not equal the total distance {total}")]
    InconsistentSplit { sum: f64, total: f64 },
    #[error("plane normal is degenerate")]
    DegenerateNormal,
}

/// How the semi-middle/minor axes of a fractional zone are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AxesMode {
    /// `b = sqrt(a^2 - (d/2)^2)`: the spheroid satisfies the focal-sum
    /// condition exactly.
    #[default]
    Exact,
    /// `b = sqrt(j*lambda*d/2)`: first-order Fresnel expansion, valid for
    /// `j*lambda << d`.
    Approximate,
}

/// Parameters of one fractional Fresnel ellipsoid.
///
/// The spheroid is centered at `center`, its major axis points along the
/// direction given by azimuth `alpha` / elevation `beta`, and it is
/// rotationally symmetric about that axis (`b == c`).
#[derive(Debug, Clone, Copy)]
pub struct FresnelZoneSpec {
    /// Fractional zone index (a multiple of `1/2^D`).
    pub j: f64,
    pub semi_major: f64,
    pub semi_middle: f64,
    pub semi_minor: f64,
    pub center: Point3,
    pub azimuth: f64,
    pub elevation: f64,
}

/// One sampled point of a zone curve in the reflector plane.
#[derive(Debug, Clone, Copy)]
pub struct CurveSample {
    pub point: Point3,
    /// Zone index of the curve this sample belongs to.
    pub zone_index: f64,
    /// Transmit-antenna index of the zone system.
    pub antenna_index: usize,
}

/// Radius of the circle cut from zone `i` by the plane perpendicular to the
/// axis at distances `d1` (from the transmitter) and `d2` (from the
/// receiver), under the Fresnel approximation.
pub fn fresnel_radius(d1: f64, d2: f64, d_total: f64, i: f64, lambda: f64) -> Result<f64, GeometryError> {
    if d1 <= 0.0 || d2 <= 0.0 || d_total <= 0.0 {
        return Err(GeometryError::NonPositiveDistance(d1.min(d2).min(d_total)));
    }
    if lambda <= 0.0 {
        return Err(GeometryError::NonPositiveWavelength(lambda));
    }
    if i < 0.0 {
        return Err(GeometryError::NegativeZoneIndex(i));
    }
    let sum = d1 + d2;
    if ((sum - d_total) / d_total).abs() > 1e-9 {
        return Err(GeometryError::InconsistentSplit { sum, total: d_total });
    }
    Ok((i * lambda * d1 * d2 / d_total).sqrt())
}

/// Semi-axes `(a, b, c)` of the fractional zone with index `j` for a direct
/// path of length `d`.
///
/// The focal-sum condition is `d1 + d2 = d + j*lambda`, so `a = (d + j*lambda)/2`
/// regardless of mode; `b == c` by rotational symmetry.
pub fn fractional_axes(d: f64, j: f64, lambda: f64, mode: AxesMode) -> Result<(f64, f64, f64), GeometryError> {
    if d <= 0.0 {
        return Err(GeometryError::NonPositiveDistance(d));
    }
    if lambda <= 0.0 {
        return Err(GeometryError::NonPositiveWavelength(lambda));
    }
    if j < 0.0 {
        return Err(GeometryError::NegativeZoneIndex(j));
    }
    let a = (d + j * lambda) / 2.0;
    let b = match mode {
        AxesMode::Exact => (a * a - (d / 2.0) * (d / 2.0)).max(0.0).sqrt(),
        AxesMode::Approximate => (j * lambda * d / 2.0).sqrt(),
    };
    Ok((a, b, b))
}

/// Rotation matrix carrying the spheroid's body frame into the working frame.
///
/// Note this is an improper rotation (det = -1); the spheroid's rotational
/// symmetry about its major axis makes the handedness immaterial.
pub fn rotation_matrix(alpha: f64, beta: f64) -> Mat3 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Mat3::new([
        [ca * cb, -ca * sb, -sa],
        [sa * cb, -sa * sb, ca],
        [sb, cb, 0.0],
    ])
}

/// Azimuth/elevation pair such that `rotation_matrix(alpha, beta)` maps the
/// body x-axis onto the unit vector along `w`.
pub fn axis_angles(w: Point3) -> (f64, f64) {
    let alpha = w.y.atan2(w.x);
    let beta = w.z.atan2(w.x.hypot(w.y));
    (alpha, beta)
}

/// Zone-family center: midpoint of the transmit antenna and the (noisy)
/// receiver position.
pub fn zone_center(t: Point3, u: Point3, n_l: Point3) -> Point3 {
    (t + u + n_l) * 0.5
}

/// Build the full zone spec for the pair `(t, u)` in the working frame, with
/// the focal sum `||t-p|| + ||u-p|| = ||t-u|| + excess`.
///
/// The localization perturbation `n_l` enters only through the center; the
/// axis direction and length use the nominal pair, matching the small-noise
/// approximation under which the angle formulas are derived. Callers that
/// only have a noisy position pass it as `u` with `n_l = 0`.
pub fn zone_spec_from_excess(
    t: Point3,
    u: Point3,
    n_l: Point3,
    j: f64,
    excess: f64,
    lambda: f64,
    mode: AxesMode,
) -> Result<FresnelZoneSpec, GeometryError> {
    let d = (u - t).norm();
    if d <= 0.0 {
        return Err(GeometryError::NonPositiveDistance(d));
    }
    let a = (d + excess) / 2.0;
    if a < d / 2.0 {
        return Err(GeometryError::NegativeZoneIndex(excess / lambda));
    }
    let b = match mode {
        AxesMode::Exact => (a * a - (d / 2.0) * (d / 2.0)).max(0.0).sqrt(),
        AxesMode::Approximate => (excess * d / 2.0).max(0.0).sqrt(),
    };
    let (alpha, beta) = axis_angles(u - t);
    Ok(FresnelZoneSpec {
        j,
        semi_major: a,
        semi_middle: b,
        semi_minor: b,
        center: zone_center(t, u, n_l),
        azimuth: alpha,
        elevation: beta,
    })
}

/// Convenience wrapper: zone `j` has a path excess of `j * lambda`.
pub fn zone_spec(
    t: Point3,
    u: Point3,
    n_l: Point3,
    j: f64,
    lambda: f64,
    mode: AxesMode,
) -> Result<FresnelZoneSpec, GeometryError> {
    if j < 0.0 {
        return Err(GeometryError::NegativeZoneIndex(j));
    }
    zone_spec_from_excess(t, u, n_l, j, j * lambda, lambda, mode)
}

/// The intersection circle of the spheroid surface with the `z = 0` plane,
/// expressed in the spheroid's unit-sphere parameter space.
///
/// Points on the surface are `v = center + R * diag(a, b, c) * p` with
/// `|p| = 1`; the plane constraint is linear in `p`, so the intersection in
/// p-space is a circle. Returns `(p_center, radius, basis1, basis2)`.
fn unit_sphere_circle(spec: &FresnelZoneSpec) -> Option<(Point3, f64, Point3, Point3)> {
    let (sb, cb) = spec.elevation.sin_cos();
    // Third row of R * diag(a, b, c); the c-axis never contributes to z.
    let n = Point3::new(spec.semi_major * sb, spec.semi_middle * cb, 0.0);
    let nn = n.norm();
    if nn < 1e-300 {
        return None;
    }
    let e = -spec.center.z;
    if e.abs() > nn {
        return None; // plane misses the spheroid
    }
    let p_center = n * (e / (nn * nn));
    let radius = (1.0 - (e / nn) * (e / nn)).max(0.0).sqrt();
    let u1 = Point3::new(-n.y / nn, n.x / nn, 0.0);
    let u2 = Point3::new(0.0, 0.0, 1.0);
    Some((p_center, radius, u1, u2))
}

fn body_to_world(spec: &FresnelZoneSpec) -> Mat3 {
    rotation_matrix(spec.azimuth, spec.elevation)
}

/// Map a unit-sphere parameter point to the spheroid surface.
fn surface_point(spec: &FresnelZoneSpec, rot: &Mat3, p: Point3) -> Point3 {
    let scaled = Point3::new(spec.semi_major * p.x, spec.semi_middle * p.y, spec.semi_minor * p.z);
    spec.center + rot.mul_vec(scaled)
}

/// Parametric curve cut from the zone spheroid by the reflector plane
/// (`z = 0` in the reflector-local frame), sampled at `n_samples` points.
///
/// An empty result means the spheroid does not reach the plane. Degenerate
/// zones (`b == 0`) reduce to the focal segment; its plane crossing, when it
/// exists, is returned as a single sample.
pub fn curve_in_plane(spec: &FresnelZoneSpec, n_samples: usize) -> Vec<CurveSample> {
    curve_samples(spec, n_samples, 0)
}

fn curve_samples(spec: &FresnelZoneSpec, n_samples: usize, antenna_index: usize) -> Vec<CurveSample> {
    if spec.semi_middle <= 1e-300 {
        // Degenerate spheroid: the focal segment.
        let rot = body_to_world(spec);
        let axis = rot.column(0);
        let half = spec.semi_major;
        let (z0, z1) = (spec.center.z - half * axis.z, spec.center.z + half * axis.z);
        if axis.z.abs() < 1e-300 || z0 * z1 > 0.0 {
            return Vec::new();
        }
        let s = -spec.center.z / (half * axis.z);
        let p = spec.center + axis * (half * s);
        return vec![CurveSample {
            point: Point3::new(p.x, p.y, 0.0),
            zone_index: spec.j,
            antenna_index,
        }];
    }
    let Some((p0, r, u1, u2)) = unit_sphere_circle(spec) else {
        return Vec::new();
    };
    let rot = body_to_world(spec);
    let mut out = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let t = TAU * k as f64 / n_samples as f64;
        let p = p0 + u1 * (r * t.cos()) + u2 * (r * t.sin());
        let mut v = surface_point(spec, &rot, p);
        v.z = 0.0; // exact by construction; clear residual roundoff
        out.push(CurveSample { point: v, zone_index: spec.j, antenna_index });
    }
    out
}

/// Axis-aligned rectangle in the reflector plane.
#[derive(Debug, Clone, Copy)]
pub struct PlaneWindow {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl PlaneWindow {
    pub fn inflate(&self, margin: f64) -> PlaneWindow {
        PlaneWindow {
            x_min: self.x_min - margin,
            x_max: self.x_max + margin,
            y_min: self.y_min - margin,
            y_max: self.y_max + margin,
        }
    }

    pub fn contains(&self, p: Point3) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// Sample only the portions of the zone curve inside `window`, at an
/// arc-length step of at most `max_gap`.
///
/// The curve is `v(t) = q + c1*cos(t) + c2*sin(t)`; each window edge is a
/// sinusoid inequality in `t`, so the in-window parameter set is an exact
/// intersection of arcs. Work is proportional to the in-window arc length,
/// not the full curve.
pub fn curve_in_window(
    spec: &FresnelZoneSpec,
    window: &PlaneWindow,
    max_gap: f64,
    antenna_index: usize,
) -> Vec<CurveSample> {
    if spec.semi_middle <= 1e-300 {
        return curve_samples(spec, 1, antenna_index)
            .into_iter()
            .filter(|s| window.contains(s.point))
            .collect();
    }
    let Some((p0, r, u1, u2)) = unit_sphere_circle(spec) else {
        return Vec::new();
    };
    let rot = body_to_world(spec);
    // v(t) = q + c1 cos t + c2 sin t in the plane.
    let scale = |p: Point3| Point3::new(spec.semi_major * p.x, spec.semi_middle * p.y, spec.semi_minor * p.z);
    let q = spec.center + rot.mul_vec(scale(p0));
    let c1 = rot.mul_vec(scale(u1)) * r;
    let c2 = rot.mul_vec(scale(u2)) * r;

    let constraints = vec![
        sinusoid_leq(c1.x, c2.x, window.x_max - q.x),
        sinusoid_leq(-c1.x, -c2.x, q.x - window.x_min),
        sinusoid_leq(c1.y, c2.y, window.y_max - q.y),
        sinusoid_leq(-c1.y, -c2.y, q.y - window.y_min),
    ];
    let arcs = intersect_arcs(&constraints);
    if arcs.is_empty() {
        return Vec::new();
    }
    let speed_bound = (c1.norm() * c1.norm() + c2.norm() * c2.norm()).sqrt();
    let mut out = Vec::new();
    for arc in arcs {
        let len = arc.len() * speed_bound;
        let n = ((len / max_gap).ceil() as usize).clamp(2, 1 << 20);
        for k in 0..=n {
            let t = arc.start + arc.len() * k as f64 / n as f64;
            let mut v = q + c1 * t.cos() + c2 * t.sin();
            v.z = 0.0;
            if window.contains(v) {
                out.push(CurveSample { point: v, zone_index: spec.j, antenna_index });
            }
        }
    }
    out
}

/// Adaptive full-curve sampling: doubles the sample count from `initial`
/// until adjacent samples are closer than `max_gap`.
pub fn curve_in_plane_adaptive(spec: &FresnelZoneSpec, initial: usize, max_gap: f64) -> Vec<CurveSample> {
    let mut n = initial.max(8);
    loop {
        let samples = curve_in_plane(spec, n);
        if samples.len() < 2 {
            return samples;
        }
        let mut worst: f64 = 0.0;
        for w in samples.windows(2) {
            worst = worst.max(w[0].point.distance(w[1].point));
        }
        worst = worst.max(samples[samples.len() - 1].point.distance(samples[0].point));
        if worst <= max_gap || n >= (1 << 22) {
            return samples;
        }
        n *= 2;
    }
}

/// Rigid map between world coordinates and a reflector-local frame whose
/// `z = 0` plane is the reflector plane and whose origin is the projection
/// of the receiver onto that plane.
#[derive(Debug, Clone, Copy)]
pub struct RisFrame {
    origin: Point3,
    ex: Point3,
    ey: Point3,
    ez: Point3,
}

impl RisFrame {
    pub fn build(ris_center: Point3, ris_normal: Point3, ue: Point3) -> Result<RisFrame, GeometryError> {
        let ez = ris_normal.normalized().ok_or(GeometryError::DegenerateNormal)?;
        // Deterministic in-plane basis: project the world axis least aligned
        // with the normal.
        let candidates = [
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let reference = candidates
            .into_iter()
            .min_by(|a, b| a.dot(ez).abs().partial_cmp(&b.dot(ez).abs()).unwrap())
            .unwrap();
        let ex = (reference - ez * reference.dot(ez))
            .normalized()
            .ok_or(GeometryError::DegenerateNormal)?;
        let ey = ez.cross(ex);
        let origin = ue - ez * (ue - ris_center).dot(ez);
        Ok(RisFrame { origin, ex, ey, ez })
    }

    pub fn to_local(&self, p: Point3) -> Point3 {
        let d = p - self.origin;
        Point3::new(d.dot(self.ex), d.dot(self.ey), d.dot(self.ez))
    }

    pub fn to_world(&self, p: Point3) -> Point3 {
        self.origin + self.ex * p.x + self.ey * p.y + self.ez * p.z
    }
}

/// Transform `points` into the reflector-local frame defined by
/// (`ris_center`, `ris_normal`, `ue`). See [`RisFrame`].
pub fn to_ris_frame(
    points: &[Point3],
    ris_center: Point3,
    ris_normal: Point3,
    ue: Point3,
) -> Result<Vec<Point3>, GeometryError> {
    let frame = RisFrame::build(ris_center, ris_normal, ue)?;
    Ok(points.iter().map(|p| frame.to_local(*p)).collect())
}

/// Absolute deviation of point `p` from the zone-`j` focal-sum condition:
/// `| ||t-p|| + ||u-p|| - ||t-u|| - j*lambda |`.
pub fn focal_sum_residual(p: Point3, t: Point3, u: Point3, j: f64, lambda: f64) -> f64 {
    (t.distance(p) + u.distance(p) - t.distance(u) - j * lambda).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn fresnel_radius_midpoint_is_semi_middle_axis() {
        let d = 12.0;
        let lambda = 0.01;
        for i in [1.0, 2.0, 5.0] {
            let r = fresnel_radius(d / 2.0, d / 2.0, d, i, lambda).unwrap();
            assert!((r - (i * lambda * d).sqrt() / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fresnel_radius_zeroth_zone_degenerates() {
        assert_eq!(fresnel_radius(1.0, 3.0, 4.0, 0.0, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn fresnel_radius_asymmetric_split() {
        let r = fresnel_radius(1.0, 3.0, 4.0, 1.0, 0.01).unwrap();
        assert!((r - 0.086603).abs() < 1e-6, "r={r}");
    }

    /// Independent oracle: intersect the exact focal-sum ellipse
    /// (sum = d + i*lambda/2) with the perpendicular plane at distance d1.
    #[test]
    fn fresnel_radius_vs_exact_ellipse() {
        let (d1, d2, d, lambda, i) = (1.0f64, 3.0f64, 4.0f64, 0.01f64, 1.0f64);
        let a = (d + i * lambda / 2.0) / 2.0;
        let b = (a * a - (d / 2.0) * (d / 2.0)).sqrt();
        let x = d1 - d / 2.0; // plane position relative to the center
        let exact = b * (1.0 - x * x / (a * a)).sqrt();
        let approx = fresnel_radius(d1, d2, d, i, lambda).unwrap();
        assert!(
            (exact - approx).abs() / exact < 1e-3,
            "exact={exact} approx={approx}"
        );
    }

    #[test]
    fn fresnel_radius_rejects_bad_input() {
        assert!(fresnel_radius(-1.0, 3.0, 2.0, 1.0, 0.01).is_err());
        assert!(fresnel_radius(1.0, 3.0, 5.0, 1.0, 0.01).is_err());
    }

    #[test]
    fn fractional_axes_zero_index_collapses() {
        let (a, b, c) = fractional_axes(10.0, 0.0, 0.01, AxesMode::Exact).unwrap();
        assert_eq!(a, 5.0);
        assert_eq!(b, 0.0);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn fractional_axes_exact_and_approximate() {
        let (a, b, _) = fractional_axes(10.0, 1.0, 0.01, AxesMode::Exact).unwrap();
        assert!((a - 5.005).abs() < 1e-12);
        assert!((b - 0.223663).abs() < 1e-6, "b={b}");
        let (_, b_approx, _) = fractional_axes(10.0, 1.0, 0.01, AxesMode::Approximate).unwrap();
        assert!((b_approx - 0.05f64.sqrt()).abs() < 1e-12);
        assert!((b - b_approx).abs() / b < 3e-4);
    }

    /// A random point on the exact-mode surface satisfies the focal sum to
    /// machine precision.
    #[test]
    fn exact_surface_point_satisfies_focal_sum() {
        let d = 10.0;
        let lambda = 0.01;
        let j = 1.0;
        let t = Point3::new(-d / 2.0, 0.0, 0.0);
        let u = Point3::new(d / 2.0, 0.0, 0.0);
        let (a, b, _) = fractional_axes(d, j, lambda, AxesMode::Exact).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let theta: f64 = rng.random_range(0.0..TAU);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let p = Point3::new(
                a * phi.sin() * theta.cos(),
                b * phi.sin() * theta.sin(),
                b * phi.cos(),
            );
            assert!(focal_sum_residual(p, t, u, j, lambda) < 1e-12);
        }
    }

    #[test]
    fn rotation_matrix_at_zero_angles() {
        let r = rotation_matrix(0.0, 0.0);
        assert_eq!(r.m, [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
    }

    #[test]
    fn rotation_matrix_at_quarter_turn() {
        let r = rotation_matrix(std::f64::consts::FRAC_PI_2, 0.0);
        let expect = [[0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((r.m[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rotation_matrix_columns_orthonormal() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = rng.random_range(-10.0..10.0);
            let b = rng.random_range(-10.0..10.0);
            let r = rotation_matrix(a, b);
            for j in 0..3 {
                assert!((r.column(j).norm() - 1.0).abs() < 1e-12);
                for k in (j + 1)..3 {
                    assert!(r.column(j).dot(r.column(k)).abs() < 1e-12);
                }
            }
            assert!((r.det().abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_maps_x_axis_to_requested_direction() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..200 {
            let w = Point3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            if w.norm() < 0.1 {
                continue;
            }
            let (alpha, beta) = axis_angles(w);
            let mapped = rotation_matrix(alpha, beta).mul_vec(Point3::new(1.0, 0.0, 0.0));
            let expect = w.normalized().unwrap();
            assert!(mapped.distance(expect) < 1e-12);
        }
    }

    #[test]
    fn zone_center_cases() {
        let t = Point3::ZERO;
        assert_eq!(zone_center(t, t, Point3::ZERO), t);
        assert_eq!(
            zone_center(t, Point3::new(2.0, 4.0, 6.0), Point3::ZERO),
            Point3::new(1.0, 2.0, 3.0)
        );
        assert_eq!(
            zone_center(t, Point3::new(2.0, 0.0, 0.0), Point3::new(0.1, 0.0, 0.0)),
            Point3::new(1.05, 0.0, 0.0)
        );
    }

    #[test]
    fn curve_in_plane_centered_spheroid() {
        // Foci on the plane, axis in the plane: intersection is an ellipse.
        let lambda = 0.01;
        let t = Point3::new(-5.0, 0.0, 0.0);
        let u = Point3::new(5.0, 0.0, 0.0);
        let spec = zone_spec(t, u, Point3::ZERO, 1.0, lambda, AxesMode::Approximate).unwrap();
        let samples = curve_in_plane(&spec, 512);
        assert_eq!(samples.len(), 512);
        for s in &samples {
            assert!(s.point.z.abs() < 1e-9);
            assert!(focal_sum_residual(s.point, t, u, 1.0, lambda) < lambda / 100.0);
        }
    }

    #[test]
    fn curve_in_plane_no_intersection() {
        let lambda = 0.01;
        let t = Point3::new(-5.0, 0.0, 3.0);
        let u = Point3::new(5.0, 0.0, 3.0);
        // Zone 1 has b ~ 0.22 m, well short of the 3 m standoff.
        let spec = zone_spec(t, u, Point3::ZERO, 1.0, lambda, AxesMode::Exact).unwrap();
        assert!(curve_in_plane(&spec, 128).is_empty());
    }

    #[test]
    fn curve_in_plane_degenerate_zone() {
        // j = 0: the spheroid is the focal segment; crossing the plane gives
        // at most one point.
        let lambda = 0.01;
        let t = Point3::new(0.0, 0.0, -1.0);
        let u = Point3::new(0.0, 0.0, 1.0);
        let spec = zone_spec(t, u, Point3::ZERO, 0.0, lambda, AxesMode::Exact).unwrap();
        let samples = curve_in_plane(&spec, 128);
        assert_eq!(samples.len(), 1);
        assert!(samples[0].point.distance(Point3::ZERO) < 1e-12);

        let t2 = Point3::new(-5.0, 0.0, 3.0);
        let u2 = Point3::new(5.0, 0.0, 3.0);
        let spec2 = zone_spec(t2, u2, Point3::ZERO, 0.0, lambda, AxesMode::Exact).unwrap();
        assert!(curve_in_plane(&spec2, 128).is_empty());
    }

    #[test]
    fn windowed_curve_matches_full_curve() {
        let lambda = 0.01;
        let t = Point3::new(-3.0, 0.2, 1.5);
        let u = Point3::new(4.0, -0.7, 0.8);
        // Zone picked so the curve passes near the origin (path excess there
        // is about 0.41 m).
        let spec = zone_spec(t, u, Point3::ZERO, 41.0, lambda, AxesMode::Exact).unwrap();
        let window = PlaneWindow { x_min: -0.5, x_max: 0.5, y_min: -0.5, y_max: 0.5 };
        let windowed = curve_in_window(&spec, &window, 0.002, 0);
        assert!(!windowed.is_empty());
        for s in &windowed {
            assert!(window.contains(s.point));
            assert!(focal_sum_residual(s.point, t, u, 41.0, lambda) < 1e-9);
        }
        // Every full-curve sample inside the window has a nearby windowed sample.
        let full = curve_in_plane(&spec, 65_536);
        for f in full.iter().filter(|s| window.inflate(-0.01).contains(s.point)) {
            let nearest = windowed
                .iter()
                .map(|w| w.point.distance(f.point))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 0.004, "gap {nearest}");
        }
    }

    #[test]
    fn adaptive_sampling_honors_gap() {
        let t = Point3::new(-1.0, 0.0, 0.05);
        let u = Point3::new(1.0, 0.0, 0.05);
        let spec = zone_spec(t, u, Point3::ZERO, 1.0, 0.01, AxesMode::Exact).unwrap();
        let samples = curve_in_plane_adaptive(&spec, 8, 0.01);
        for w in samples.windows(2) {
            assert!(w[0].point.distance(w[1].point) <= 0.01 + 1e-12);
        }
    }

    #[test]
    fn ris_frame_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let center = Point3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let normal = Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if normal.norm() < 0.2 {
                continue;
            }
            let ue = Point3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let frame = RisFrame::build(center, normal, ue).unwrap();
            for _ in 0..10 {
                let p = Point3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                );
                assert!(frame.to_world(frame.to_local(p)).distance(p) < 1e-12);
            }
            // The reflector center lies in the local z = 0 plane.
            assert!(frame.to_local(center).z.abs() < 1e-12);
            // The receiver projects to the local origin.
            let ue_local = frame.to_local(ue);
            assert!(ue_local.x.abs() < 1e-12 && ue_local.y.abs() < 1e-12);
        }
    }

    #[test]
    fn ris_frame_identity_pose() {
        let frame = RisFrame::build(Point3::ZERO, Point3::new(0.0, 0.0, 1.0), Point3::ZERO).unwrap();
        let pts = [Point3::new(1.0, 2.0, 3.0), Point3::new(-0.5, 0.25, 0.0)];
        for p in pts {
            assert!(frame.to_local(p).distance(p) < 1e-15);
        }
    }

    #[test]
    fn ris_frame_ue_above_center_maps_to_axis_point() {
        // Hand-constructed pose: reflector in the world y = 2 plane, receiver
        // straight above its center. In local coordinates, the receiver sits
        // on the frame axis normal to the plane at the standoff distance.
        let center = Point3::new(1.0, 2.0, -0.5);
        let normal = Point3::new(0.0, 1.0, 0.0);
        let ue = Point3::new(1.0, 5.0, -0.5);
        let frame = RisFrame::build(center, normal, ue).unwrap();
        let local = frame.to_local(ue);
        assert!(local.x.abs() < 1e-12 && local.y.abs() < 1e-12);
        assert!((local.z.abs() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ris_frame_rejects_zero_normal() {
        assert_eq!(
            RisFrame::build(Point3::ZERO, Point3::ZERO, Point3::ZERO).unwrap_err(),
            GeometryError::DegenerateNormal
        );
    }

    #[test]
    fn focal_sum_residual_on_segment() {
        let t = Point3::new(-1.0, 0.0, 0.0);
        let u = Point3::new(1.0, 0.0, 0.0);
        let p = Point3::new(0.3, 0.0, 0.0);
        assert!(focal_sum_residual(p, t, u, 0.0, 0.01) < 1e-15);
    }

    /// Focal-sum residual is invariant under a rigid change of frame applied
    /// jointly to the point and both foci.
    #[test]
    fn focal_sum_residual_frame_invariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..200 {
            let t = Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let u = Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let p = Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let normal = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.2..1.0));
            let frame = RisFrame::build(Point3::ZERO, normal, u).unwrap();
            let before = focal_sum_residual(p, t, u, 0.5, 0.01);
            let after = focal_sum_residual(frame.to_local(p), frame.to_local(t), frame.to_local(u), 0.5, 0.01);
            assert!((before - after).abs() < 1e-12);
        }
    }

    /// Zone j + step strictly encloses zone j: both semi-axes grow with j.
    #[test]
    fn monotone_nesting_in_zone_index() {
        let d = 8.0;
        let lambda = 0.02;
        for mode in [AxesMode::Exact, AxesMode::Approximate] {
            let mut prev = fractional_axes(d, 0.25, lambda, mode).unwrap();
            let mut j = 0.5;
            while j < 6.0 {
                let cur = fractional_axes(d, j, lambda, mode).unwrap();
                assert!(cur.0 > prev.0 && cur.1 > prev.1);
                prev = cur;
                j += 0.25;
            }
        }
    }

    /// With the axis parallel to the plane (beta = 0) and an in-plane
    /// location perturbation, the intersection curve displaces rigidly by
    /// exactly half the perturbation.
    #[test]
    fn noise_displacement_with_zero_elevation() {
        let lambda = 0.01;
        let t = Point3::new(-4.0, 0.3, 0.1);
        let u = Point3::new(4.0, -0.6, 0.1);
        // Keep beta = 0 by making the axis horizontal in z.
        assert!((u - t).z.abs() < 1e-12);
        let n_l = Point3::new(0.004, -0.002, 0.0);
        let spec0 = zone_spec(t, u, Point3::ZERO, 2.0, lambda, AxesMode::Exact).unwrap();
        let spec1 = zone_spec(t, u, n_l, 2.0, lambda, AxesMode::Exact).unwrap();
        let s0 = curve_in_plane(&spec0, 256);
        let s1 = curve_in_plane(&spec1, 256);
        assert_eq!(s0.len(), s1.len());
        for (a, b) in s0.iter().zip(&s1) {
            let delta = b.point - a.point;
            assert!((delta.x - n_l.x / 2.0).abs() < 1e-9, "dx={}", delta.x);
            assert!((delta.y - n_l.y / 2.0).abs() < 1e-9, "dy={}", delta.y);
        }
    }
}
