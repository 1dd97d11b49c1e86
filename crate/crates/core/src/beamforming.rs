//! Distributed determine-then-align beamforming: maximum-ratio transmission
//! at the transmitter, then per-surface element selection from fractional
//! Fresnel zones, grid phase assignment, absorptive complement, and the
//! harvest-switch design.
//!
//! The per-surface work is organized around a [`ZoneSystem`], which holds
//! the transmitter/receiver geometry in the surface-local frame and samples
//! zone curves only inside a window around the element lattice. All cost
//! then scales with the lattice size, not with the (much longer) full
//! curves.

use crate::channel::ChannelSet;
use crate::geometry::{
    curve_in_window, zone_spec_from_excess, AxesMode, CurveSample, GeometryError, PlaneWindow,
    RisFrame,
};
use crate::localization::binary_flip_for_phase;
use crate::math::{principal_angle, wrap_2pi, Point3};
use crate::ris::{
    available_power, feasible_amplification, harvested_power, sustainability_check, ElementMode,
    NoiseMode, RisConfiguration, RisError,
};
use crate::scenario::ScenarioConfig;
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BeamformingError {
    #[error("estimated direct channel is zero; MRT undefined")]
    ZeroChannel,
    #[error("zone index {0} is not a positive multiple of 1/2^D")]
    OffGridZoneIndex(f64),
    #[error("modified focal excess is negative for j={j}, psi={psi}")]
    NegativeExcess { j: f64, psi: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Ris(#[from] RisError),
}

/// Maximum-ratio transmission precoder and its per-antenna phase offsets.
#[derive(Debug, Clone)]
pub struct Precoder {
    /// Unit-norm precoding vector.
    pub weights: Vec<Complex64>,
    /// Per-antenna phase `angle(f_hat)` in `[0, 2*pi)`.
    pub phases: Vec<f64>,
}

/// MRT from the estimated direct channel: `w = f_hat / ||f_hat||`, so the
/// combined direct link `f_hat^H w = ||f_hat||` is real positive.
pub fn mrt_precoder(f_hat: &[Complex64]) -> Result<Precoder, BeamformingError> {
    let norm = f_hat.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm <= 0.0 || !norm.is_finite() {
        return Err(BeamformingError::ZeroChannel);
    }
    Ok(Precoder {
        weights: f_hat.iter().map(|x| x / norm).collect(),
        phases: f_hat.iter().map(|x| wrap_2pi(x.arg())).collect(),
    })
}

/// Semi-axes of the precoding-modified fractional zone: the focal-sum excess
/// becomes `j*lambda - psi*lambda/(2*pi)`, absorbing the precoder phase into
/// the zone geometry.
pub fn modified_axes(
    d: f64,
    j: f64,
    lambda: f64,
    psi: f64,
    mode: AxesMode,
) -> Result<(f64, f64, f64), BeamformingError> {
    let excess = j * lambda - psi * lambda / TAU;
    if excess < 0.0 {
        return Err(BeamformingError::NegativeExcess { j, psi });
    }
    let a = (d + excess) / 2.0;
    let b = match mode {
        AxesMode::Exact => (a * a - (d / 2.0) * (d / 2.0)).max(0.0).sqrt(),
        AxesMode::Approximate => (excess * d / 2.0).sqrt(),
    };
    Ok((a, b, b))
}

/// Decision threshold for one zone: the fraction `2^D * chi / pi` of the
/// minimum spacing between the zone curve and its adjacent fractional
/// neighbor.
pub fn decision_threshold(
    curve_j: &[CurveSample],
    curve_next: &[CurveSample],
    d_bits: u32,
    chi: f64,
) -> Option<f64> {
    let spacing = min_pairwise_distance(curve_j, curve_next)?;
    Some(spacing * (1u64 << d_bits) as f64 * chi / PI)
}

/// Brute-force minimum distance between two sampled curves.
pub fn min_pairwise_distance(a: &[CurveSample], b: &[CurveSample]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mut best = f64::INFINITY;
    for sa in a {
        for sb in b {
            let d = sa.point.distance(sb.point);
            if d < best {
                best = d;
            }
        }
    }
    Some(best)
}

/// Grid-hashed minimum distance between two sampled curves; linear in the
/// sample counts. Falls back to the brute-force scan when the ring search
/// exhausts its budget.
fn min_curve_distance(a: &[CurveSample], b: &[CurveSample], cell: f64) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    if a.len() * b.len() <= 4096 {
        return min_pairwise_distance(a, b);
    }
    use std::collections::HashMap;
    let key = |p: Point3| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut hash: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (idx, s) in b.iter().enumerate() {
        hash.entry(key(s.point)).or_default().push(idx);
    }
    let mut best = f64::INFINITY;
    for sa in a {
        let (cx, cy) = key(sa.point);
        let mut local = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue; // only the ring boundary
                    }
                    if let Some(idxs) = hash.get(&(cx + dx, cy + dy)) {
                        for &i in idxs {
                            local = local.min(sa.point.distance(b[i].point));
                        }
                    }
                }
            }
            // Scan enough rings to certify the minimum found so far.
            if local.is_finite() && (ring as f64 - 1.0) * cell > local {
                break;
            }
            ring += 1;
            if ring > 64 {
                break;
            }
        }
        if !local.is_finite() {
            return min_pairwise_distance(a, b);
        }
        best = best.min(local);
    }
    Some(best)
}

/// Mark elements within `tau` of the sampled curve (the minimum-distance
/// selection rule, inclusive at the threshold).
pub fn select_elements(elements: &[Point3], curve: &[CurveSample], tau: f64) -> Vec<bool> {
    elements
        .iter()
        .map(|e| curve.iter().any(|s| s.point.distance(*e) <= tau))
        .collect()
}

/// Entrywise AND of per-antenna selections: an element reflects only when
/// every antenna's zone system selected it.
pub fn combine_across_antennas(indicators: &[Vec<bool>]) -> Vec<bool> {
    let Some(first) = indicators.first() else {
        return Vec::new();
    };
    let mut out = first.clone();
    for ind in &indicators[1..] {
        for (o, v) in out.iter_mut().zip(ind) {
            *o = *o && *v;
        }
    }
    out
}

/// Grid index of the zone-compensation phase `mod(-2*pi*j, 2*pi)` for a zone
/// index `j` that is a positive multiple of `1/2^D`. The result lies exactly
/// on the discrete grid.
pub fn zone_phase_index(j: f64, d_bits: u32) -> Result<u32, BeamformingError> {
    let levels = 1i64 << d_bits;
    let m = (j * levels as f64).round();
    if j <= 0.0 || (j * levels as f64 - m).abs() > 1e-9 {
        return Err(BeamformingError::OffGridZoneIndex(j));
    }
    Ok(((-(m as i64)).rem_euclid(levels)) as u32)
}

/// Zone-compensation phase in radians; see [`zone_phase_index`].
pub fn zone_phase(j: f64, d_bits: u32) -> Result<f64, BeamformingError> {
    let idx = zone_phase_index(j, d_bits)?;
    Ok(TAU * idx as f64 / (1u64 << d_bits) as f64)
}

/// Absorptive complement of a reflective diagonal: the absorb efficiency
/// wherever the reflective entry is zero.
pub fn absorptive_complement(reflective: &[Complex64], absorb_efficiency: f64) -> Vec<f64> {
    reflective
        .iter()
        .map(|r| if r.norm() == 0.0 { absorb_efficiency } else { 0.0 })
        .collect()
}

/// Harvest-switch design: per element, the composite incident phasor over
/// antennas is `sum_nt exp(j*(psi_nt + 2*pi*D(nt, n)/lambda))` (the phase
/// convention of the received-signal model); elements whose composite phase
/// falls in the destructive half-cycle get a pi flip.
pub fn eh_switch_design(distances: &[Vec<f64>], psi: &[f64], lambda: f64) -> Vec<bool> {
    let n_r = distances.first().map(|row| row.len()).unwrap_or(0);
    (0..n_r)
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (row, psi_t) in distances.iter().zip(psi) {
                acc += Complex64::from_polar(1.0, psi_t + TAU * row[n] / lambda);
            }
            binary_flip_for_phase(acc.arg())
        })
        .collect()
}

/// Region tag of one element after selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Small post-quantization phase deviation; reflect priority.
    Distinct,
    /// Large deviation; harvest priority.
    Indistinct,
}

#[derive(Debug, Clone)]
pub struct ZoneThreshold {
    pub antenna: usize,
    pub j: f64,
    pub tau: f64,
    /// Spacing to the adjacent fractional curve the threshold was cut from.
    pub spacing: f64,
}

/// Element selection bookkeeping of one surface.
#[derive(Debug, Clone)]
pub struct ZoneAssignment {
    /// Reflect-region phase half-angle.
    pub chi: f64,
    /// Largest usable zone index, when any zone is usable.
    pub max_index: Option<f64>,
    /// Zone index per element; `None` tags the harvest region.
    pub zone_of_element: Vec<Option<f64>>,
    pub thresholds: Vec<ZoneThreshold>,
    /// Zones whose (first-antenna) curve crosses the element lattice.
    pub zones_crossing: Vec<f64>,
}

impl ZoneAssignment {
    pub fn region(&self, element: usize) -> Region {
        if self.zone_of_element[element].is_some() {
            Region::Distinct
        } else {
            Region::Indistinct
        }
    }

    /// Distinct zone indices that own at least one element, ascending.
    pub fn populated_zones(&self) -> Vec<f64> {
        let mut zones: Vec<f64> = Vec::new();
        for j in self.zone_of_element.iter().flatten() {
            if !zones.iter().any(|z| (z - j).abs() < 1e-12) {
                zones.push(*j);
            }
        }
        zones.sort_by(|a, b| a.partial_cmp(b).unwrap());
        zones
    }

    pub fn validate(&self, d_bits: u32) -> Result<(), String> {
        let max_chi = PI / (1u64 << d_bits) as f64;
        if !(0.0..=max_chi + 1e-12).contains(&self.chi) {
            return Err(format!("chi {} outside [0, {max_chi}]", self.chi));
        }
        for t in &self.thresholds {
            if t.tau < 0.0 {
                return Err(format!("negative threshold for antenna {} zone {}", t.antenna, t.j));
            }
        }
        if let Some(j_max) = self.max_index {
            for j in self.zone_of_element.iter().flatten() {
                if *j > j_max + 1e-12 {
                    return Err(format!("element assigned zone {j} beyond J={j_max}"));
                }
            }
        } else if self.zone_of_element.iter().any(|z| z.is_some()) {
            return Err("elements assigned zones but no usable zone index".into());
        }
        Ok(())
    }
}

/// Output of the distributed design for one surface.
#[derive(Debug, Clone)]
pub struct AlgorithmOutput {
    pub config: RisConfiguration,
    pub zones: ZoneAssignment,
    /// Budget-clamped amplification actually applied.
    pub rho_eff: f64,
    /// Stored harvested power, watts.
    pub harvested_w: f64,
    /// Post-drain surplus available for amplification, watts.
    pub available_w: f64,
    /// Strict self-sustainability of the final configuration.
    pub sustainable: bool,
    /// False when the budget forced the all-absorptive fallback.
    pub reflect_active: bool,
}

/// Beamforming knobs; defaults follow the strategy-comparison setup.
#[derive(Debug, Clone, Copy)]
pub struct BeamformingOptions {
    /// Reflect-region half angle; `None` uses `pi / 2^(D+1)`.
    pub chi: Option<f64>,
    pub axes_mode: AxesMode,
    pub noise_mode: NoiseMode,
}

impl Default for BeamformingOptions {
    fn default() -> Self {
        BeamformingOptions {
            chi: None,
            axes_mode: AxesMode::Exact,
            noise_mode: NoiseMode::Expectation,
        }
    }
}

/// Transmitter/receiver geometry of one surface in its local frame, with the
/// per-antenna focal shifts already folded in.
pub struct ZoneSystem {
    antennas: Vec<Point3>,
    ue: Point3,
    lambda: f64,
    /// Per-antenna focal-sum shift in meters: the curve of zone `j` collects
    /// the points with path excess `j*lambda + shift_m`.
    shift_m: Vec<f64>,
    window: PlaneWindow,
    sample_gap: f64,
    axes_mode: AxesMode,
    /// Memoized curves: the zone scan and the selection pass revisit the
    /// same (antenna, j) pairs.
    cache: std::cell::RefCell<std::collections::HashMap<(usize, i64), std::rc::Rc<Vec<CurveSample>>>>,
}

impl ZoneSystem {
    fn new(
        antennas: Vec<Point3>,
        ue: Point3,
        lambda: f64,
        shift_m: Vec<f64>,
        window: PlaneWindow,
        sample_gap: f64,
        axes_mode: AxesMode,
    ) -> ZoneSystem {
        ZoneSystem {
            antennas,
            ue,
            lambda,
            shift_m,
            window,
            sample_gap,
            axes_mode,
            cache: std::cell::RefCell::new(std::collections::HashMap::new()),
        }
    }

    /// Direct-path length for one antenna.
    fn direct_distance(&self, antenna: usize) -> f64 {
        self.antennas[antenna].distance(self.ue)
    }

    /// Sampled curve of zone `j` for one antenna, clipped to the window.
    pub fn curve(&self, antenna: usize, j: f64) -> Result<std::rc::Rc<Vec<CurveSample>>, BeamformingError> {
        // Zone indices live on the 1/2^D grid with D <= 16.
        let key = (antenna, (j * 65536.0).round() as i64);
        if let Some(hit) = self.cache.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let excess = j * self.lambda + self.shift_m[antenna];
        let samples = if excess < 0.0 {
            Vec::new()
        } else {
            let spec = zone_spec_from_excess(
                self.antennas[antenna],
                self.ue,
                Point3::ZERO,
                j,
                excess,
                self.lambda,
                self.axes_mode,
            )?;
            curve_in_window(&spec, &self.window, self.sample_gap, antenna)
        };
        let rc = std::rc::Rc::new(samples);
        self.cache.borrow_mut().insert(key, rc.clone());
        Ok(rc)
    }

    /// Path excess over the direct link at a point, for one antenna.
    fn excess_at(&self, antenna: usize, p: Point3) -> f64 {
        self.antennas[antenna].distance(p) + self.ue.distance(p) - self.direct_distance(antenna)
    }

    /// Zone-index range whose curves can intersect the window, on the
    /// `1/2^D` grid, for one antenna.
    fn zone_index_range(&self, antenna: usize, d_bits: u32) -> (f64, f64) {
        let step = 1.0 / (1u64 << d_bits) as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let xs = [self.window.x_min, (self.window.x_min + self.window.x_max) / 2.0, self.window.x_max];
        let ys = [self.window.y_min, (self.window.y_min + self.window.y_max) / 2.0, self.window.y_max];
        for x in xs {
            for y in ys {
                let e = self.excess_at(antenna, Point3::new(x, y, 0.0));
                lo = lo.min(e);
                hi = hi.max(e);
            }
        }
        let j_lo = (((lo - self.shift_m[antenna]) / self.lambda) / step).floor() * step - step;
        let j_hi = (((hi - self.shift_m[antenna]) / self.lambda) / step).ceil() * step + step;
        (j_lo.max(step), j_hi.max(step))
    }

    /// First-order estimate of the in-plane spacing of one full zone-index
    /// step at the window center.
    fn spacing_estimate(&self, antenna: usize) -> f64 {
        let c = Point3::new(
            (self.window.x_min + self.window.x_max) / 2.0,
            (self.window.y_min + self.window.y_max) / 2.0,
            0.0,
        );
        let g1 = (c - self.antennas[antenna]).normalized().unwrap_or(Point3::ZERO);
        let g2 = (c - self.ue).normalized().unwrap_or(Point3::ZERO);
        let g = g1 + g2;
        let inplane = g.x.hypot(g.y).max(1e-9);
        self.lambda / inplane
    }
}

/// Largest zone index whose curve keeps more than one element pitch of
/// clearance from its opposite-phase neighbor (`j + 1/2`), scanning the
/// window in `1/2^D` steps. `None` means no usable zone: the surface falls
/// back to all-absorptive.
pub fn max_zone_index(
    system: &ZoneSystem,
    spacing_s_r: f64,
    d_bits: u32,
) -> Result<Option<f64>, BeamformingError> {
    let step = 1.0 / (1u64 << d_bits) as f64;
    let antenna = 0;
    let (j_lo, j_hi) = system.zone_index_range(antenna, d_bits);
    let cell = system.spacing_estimate(antenna).max(spacing_s_r);
    let mut best: Option<f64> = None;
    let mut j = j_lo;
    while j <= j_hi + 1e-12 {
        let curve = system.curve(antenna, j)?;
        if !curve.is_empty() {
            let mate = system.curve(antenna, j + 0.5)?;
            if let Some(spacing) = min_curve_distance(&curve, &mate, cell) {
                if spacing - spacing_s_r > 0.0 {
                    best = Some(j);
                } else {
                    break;
                }
            } else {
                // Opposite-phase mate outside the window: clearance holds by
                // at least the window margin.
                best = Some(j);
            }
        }
        j += step;
    }
    Ok(best)
}

/// Run the full distributed design for every surface.
///
/// `f_hat` is the estimated direct channel and `u_hat` the estimated
/// receiver position; the true channels enter only through the harvested
/// power. Returns the precoder and one output per surface.
pub fn run_algorithm1(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    f_hat: &[Complex64],
    u_hat: Point3,
    opts: &BeamformingOptions,
) -> Result<(Precoder, Vec<AlgorithmOutput>), BeamformingError> {
    let precoder = mrt_precoder(f_hat)?;
    let mut outputs = Vec::with_capacity(cfg.ris.len());
    for (k, panel) in cfg.ris.iter().enumerate() {
        outputs.push(design_single_surface(cfg, channels, &precoder, u_hat, k, panel, opts)?);
    }
    Ok((precoder, outputs))
}

fn design_single_surface(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    precoder: &Precoder,
    u_hat: Point3,
    k: usize,
    panel: &crate::scenario::RisPanel,
    opts: &BeamformingOptions,
) -> Result<AlgorithmOutput, BeamformingError> {
    let d_bits = cfg.phase_resolution_bits;
    let lambda = cfg.wavelength;
    let step = 1.0 / (1u64 << d_bits) as f64;
    let chi = opts.chi.unwrap_or(PI / (1u64 << (d_bits + 1)) as f64);
    let elements_world = panel.element_positions();
    let n_r = elements_world.len();

    // Surface-local frame; elements land in the z = 0 plane.
    let frame = RisFrame::build(panel.center, panel.normal, u_hat)?;
    let elements: Vec<Point3> = elements_world.iter().map(|p| frame.to_local(*p)).collect();
    let antennas: Vec<Point3> = cfg.bs_antennas.iter().map(|p| frame.to_local(*p)).collect();
    let ue = frame.to_local(u_hat);

    // Per-antenna focal shift, two parts:
    //
    // 1. The estimated-phase deviation from the geometric line-of-sight
    //    phase at the estimated position, referenced to the first antenna so
    //    a global precoder phase cannot move the zones.
    // 2. The geometric offset of this antenna's direct distance from the
    //    array mean. Without it the per-antenna zone families sit at
    //    different fractional positions and the cross-antenna AND starves;
    //    anchoring every family on the mean distance makes same-index
    //    curves coincide and spreads the residual per-antenna phase error
    //    symmetrically around the assigned zone phase.
    let d_hats: Vec<f64> = cfg.bs_antennas.iter().map(|t| t.distance(u_hat)).collect();
    let d_mean = d_hats.iter().sum::<f64>() / d_hats.len() as f64;
    let raw: Vec<f64> = precoder
        .phases
        .iter()
        .zip(&d_hats)
        .map(|(psi, d)| principal_angle(psi + TAU * d / lambda))
        .collect();
    let shift_m: Vec<f64> = raw
        .iter()
        .zip(&d_hats)
        .map(|(dev, d)| (d_mean - d) - principal_angle(dev - raw[0]) * lambda / TAU)
        .collect();

    // Element lattice in local coordinates (regular by construction).
    let lattice = Lattice::from_elements(&elements, panel.rows, panel.cols);

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for e in &elements {
        x_min = x_min.min(e.x);
        x_max = x_max.max(e.x);
        y_min = y_min.min(e.y);
        y_max = y_max.max(e.y);
    }
    let mut system = ZoneSystem::new(
        antennas,
        ue,
        lambda,
        shift_m,
        PlaneWindow { x_min, x_max, y_min, y_max },
        panel.spacing / 4.0,
        opts.axes_mode,
    );
    // Window margin: the half-period clearance mate must stay measurable at
    // the panel edge, plus a couple of pitches of selection reach.
    let margin = (0.6 * system.spacing_estimate(0)).max(panel.spacing) + 2.0 * panel.spacing;
    system.window = system.window.inflate(margin);

    let j_max_usable = max_zone_index(&system, panel.spacing, d_bits)?;

    // Cross-antenna parallax: even with co-anchored families, the antennas'
    // path-excess landscapes differ by a small position-dependent amount.
    // Each antenna's selection reach grows by half that spread so the AND
    // keeps elements that are constructive for all antennas instead of
    // dropping band-edge elements over sub-quantization misregistration.
    // Zero for a single antenna.
    let reach_extra = {
        let probes = [
            Point3::new(x_min, y_min, 0.0),
            Point3::new(x_min, y_max, 0.0),
            Point3::new(x_max, y_min, 0.0),
            Point3::new(x_max, y_max, 0.0),
            Point3::new((x_min + x_max) / 2.0, (y_min + y_max) / 2.0, 0.0),
        ];
        let mut spread: f64 = 0.0;
        for p in probes {
            let centers: Vec<f64> = (0..system.antennas.len())
                .map(|nt| system.excess_at(nt, p) - system.shift_m[nt])
                .collect();
            let lo = centers.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = centers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            spread = spread.max(hi - lo);
        }
        // Convert the path-length spread to in-plane reach.
        spread / 2.0 * system.spacing_estimate(0) / lambda
    };

    // Per-antenna selection: smallest in-threshold zone per element.
    let n_t = system.antennas.len();
    let mut zone_per_antenna: Vec<Vec<Option<f64>>> = vec![vec![None; n_r]; n_t];
    let mut thresholds = Vec::new();
    let mut zones_crossing: Vec<f64> = Vec::new();
    if let Some(j_max) = j_max_usable {
        for antenna in 0..n_t {
            let (j_lo, j_hi) = system.zone_index_range(antenna, d_bits);
            let cell = system.spacing_estimate(antenna).max(panel.spacing);
            let fallback_spacing = system.spacing_estimate(antenna) * step;
            let mut j = j_lo;
            while j <= j_hi.min(j_max) + 1e-12 {
                let curve = system.curve(antenna, j)?;
                if !curve.is_empty() {
                    let mate = system.curve(antenna, j + step)?;
                    let spacing = min_curve_distance(&curve, &mate, cell).unwrap_or(fallback_spacing);
                    let tau = spacing * (1u64 << d_bits) as f64 * chi / PI;
                    thresholds.push(ZoneThreshold { antenna, j, tau, spacing });
                    // Selection band: total width tau, i.e. half-width tau/2,
                    // so the covered fraction of one fractional period is
                    // chi * 2^D / pi.
                    lattice.mark_near_curve(
                        &curve,
                        tau / 2.0 + reach_extra,
                        system.sample_gap,
                        j,
                        &mut zone_per_antenna[antenna],
                    );
                    if antenna == 0 && lattice.crosses(&curve) {
                        zones_crossing.push(j);
                    }
                }
                j += step;
            }
        }
    }

    // Constructive-interference condition across antennas: same zone index
    // everywhere.
    let mut zone_of_element: Vec<Option<f64>> = vec![None; n_r];
    for n in 0..n_r {
        if let Some(j) = zone_per_antenna[0][n] {
            if zone_per_antenna.iter().all(|za| matches!(za[n], Some(jj) if (jj - j).abs() < 1e-12)) {
                zone_of_element[n] = Some(j);
            }
        }
    }

    // Zone phases on the discrete grid, absorptive complement, harvest switch.
    let mut modes: Vec<ElementMode> = Vec::with_capacity(n_r);
    for z in &zone_of_element {
        match z {
            Some(j) => modes.push(ElementMode::Reflective { phase_index: zone_phase_index(*j, d_bits)? }),
            None => modes.push(ElementMode::Absorptive),
        }
    }

    let dist_matrix: Vec<Vec<f64>> = cfg
        .bs_antennas
        .iter()
        .map(|t| elements_world.iter().map(|r| t.distance(*r)).collect())
        .collect();
    let switch = eh_switch_design(&dist_matrix, &precoder.phases, lambda);

    let mut config = RisConfiguration::new(
        modes,
        switch,
        d_bits,
        cfg.power_model.rho_max,
        cfg.power_model.absorb_efficiency,
    )?;

    // Budget: harvested power from the absorptive composite stream, drains,
    // then the feasible amplification for the reflective set.
    let incident = channels.incident_field(k, &precoder.weights);
    let switch_diag = config.switch_diagonal();
    let mut harvested = harvested_power(
        &switch_diag,
        &config.absorptive_diagonal(),
        &incident,
        cfg.transmit_power_w,
        cfg.ris_noise_w,
        cfg.power_model.eta_charge,
        opts.noise_mode,
    )?;
    let mut available = available_power(harvested, &cfg.power_model, d_bits, n_r);
    let n_reflective = config.n_reflective();
    let mut reflect_active = n_reflective > 0;
    let mut rho_eff = 1.0;

    if reflect_active && sustainability_check(available) {
        let refl_power: f64 = config
            .modes()
            .iter()
            .zip(&incident)
            .filter(|(m, _)| matches!(m, ElementMode::Reflective { .. }))
            .map(|(_, inc)| inc.norm_sqr() * cfg.transmit_power_w)
            .sum();
        let h_rms = (refl_power / n_reflective as f64).sqrt();
        rho_eff = feasible_amplification(available, n_reflective, h_rms, cfg.power_model.rho_max)?;
        config.set_reflect_gain(rho_eff);
    } else if reflect_active {
        // The split cannot cover the fixed drains: revert to all-absorptive
        // for this slot and recompute the harvest.
        config.revert_all_absorptive();
        reflect_active = false;
        harvested = harvested_power(
            &switch_diag,
            &config.absorptive_diagonal(),
            &incident,
            cfg.transmit_power_w,
            cfg.ris_noise_w,
            cfg.power_model.eta_charge,
            opts.noise_mode,
        )?;
        available = available_power(harvested, &cfg.power_model, d_bits, n_r);
        for z in zone_of_element.iter_mut() {
            *z = None;
        }
    }
    let sustainable = sustainability_check(available);

    let zones = ZoneAssignment {
        chi,
        max_index: j_max_usable,
        zone_of_element,
        thresholds,
        zones_crossing,
    };
    debug_assert!(zones.validate(d_bits).is_ok(), "{:?}", zones.validate(d_bits));

    Ok(AlgorithmOutput {
        config,
        zones,
        rho_eff,
        harvested_w: harvested,
        available_w: available,
        sustainable,
        reflect_active,
    })
}

/// Distance from a point to a line segment, all in the z = 0 plane.
fn point_segment_distance(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Regular 2D lattice fitted to the local element positions; maps plane
/// points to nearby elements in O(1).
struct Lattice {
    origin: Point3,
    a: (f64, f64),
    b: (f64, f64),
    inv: [[f64; 2]; 2],
    rows: usize,
    cols: usize,
    pitch: f64,
}

impl Lattice {
    fn from_elements(elements: &[Point3], rows: usize, cols: usize) -> Lattice {
        let origin = elements[0];
        let a = if rows > 1 { elements[cols] - origin } else { Point3::ZERO };
        let b = if cols > 1 { elements[1] - origin } else { Point3::ZERO };
        let (ax, ay) = (a.x, a.y);
        let (bx, by) = (b.x, b.y);
        let det = ax * by - ay * bx;
        let inv = if det.abs() > 1e-30 {
            [[by / det, -bx / det], [-ay / det, ax / det]]
        } else {
            // Degenerate (single row or column); handled by projection.
            [[0.0, 0.0], [0.0, 0.0]]
        };
        let pitch = a.norm().max(b.norm()).max(1e-12);
        Lattice { origin, a: (ax, ay), b: (bx, by), inv, rows, cols, pitch }
    }

    fn index_of(&self, row: i64, col: i64) -> Option<usize> {
        if row < 0 || col < 0 || row >= self.rows as i64 || col >= self.cols as i64 {
            return None;
        }
        Some(row as usize * self.cols + col as usize)
    }

    fn element_at(&self, row: i64, col: i64) -> Point3 {
        Point3::new(
            self.origin.x + row as f64 * self.a.0 + col as f64 * self.b.0,
            self.origin.y + row as f64 * self.a.1 + col as f64 * self.b.1,
            0.0,
        )
    }

    fn fractional_coords(&self, p: Point3) -> (f64, f64) {
        let dx = p.x - self.origin.x;
        let dy = p.y - self.origin.y;
        let degenerate = self.inv[0][0] == 0.0
            && self.inv[0][1] == 0.0
            && self.inv[1][0] == 0.0
            && self.inv[1][1] == 0.0;
        if degenerate {
            let a2 = self.a.0 * self.a.0 + self.a.1 * self.a.1;
            let b2 = self.b.0 * self.b.0 + self.b.1 * self.b.1;
            if a2 > b2 {
                return ((dx * self.a.0 + dy * self.a.1) / a2.max(1e-30), 0.0);
            }
            return (0.0, (dx * self.b.0 + dy * self.b.1) / b2.max(1e-30));
        }
        (
            self.inv[0][0] * dx + self.inv[0][1] * dy,
            self.inv[1][0] * dx + self.inv[1][1] * dy,
        )
    }

    /// Assign `j` to every element within `reach` of the sampled curve,
    /// measuring distance to the polyline (so the reach may be much finer
    /// than the sample spacing). Keeps the smallest zone index on conflicts.
    fn mark_near_curve(&self, curve: &[CurveSample], reach: f64, max_gap: f64, j: f64, out: &mut [Option<f64>]) {
        if curve.is_empty() {
            return;
        }
        let r_cells = (reach / self.pitch).ceil() as i64 + 1;
        let mut mark_cells = |center: Point3, lo: Point3, hi: Option<Point3>| {
            let (fr, fc) = self.fractional_coords(center);
            let (cr, cc) = (fr.round() as i64, fc.round() as i64);
            // The segment spans at most one extra cell beyond the reach.
            let span = hi.map(|h| (h.distance(lo) / self.pitch).ceil() as i64).unwrap_or(0);
            for dr in -(r_cells + span)..=(r_cells + span) {
                for dc in -(r_cells + span)..=(r_cells + span) {
                    let (row, col) = (cr + dr, cc + dc);
                    let Some(idx) = self.index_of(row, col) else {
                        continue;
                    };
                    if matches!(out[idx], Some(existing) if existing <= j) {
                        continue;
                    }
                    let e = self.element_at(row, col);
                    let d = match hi {
                        Some(h) => point_segment_distance(e, lo, h),
                        None => e.distance(lo),
                    };
                    if d <= reach {
                        out[idx] = Some(j);
                    }
                }
            }
        };
        if curve.len() == 1 {
            mark_cells(curve[0].point, curve[0].point, None);
            return;
        }
        for w in curve.windows(2) {
            let (a, b) = (w[0].point, w[1].point);
            if a.distance(b) <= 3.0 * max_gap {
                let mid = (a + b) * 0.5;
                mark_cells(mid, a, Some(b));
            } else {
                // Arc boundary: treat the endpoints individually.
                mark_cells(a, a, None);
                mark_cells(b, b, None);
            }
        }
        let last = curve[curve.len() - 1].point;
        mark_cells(last, last, None);
    }

    /// Whether any curve sample falls inside an element's own cell.
    fn crosses(&self, curve: &[CurveSample]) -> bool {
        curve.iter().any(|s| {
            let (fr, fc) = self.fractional_coords(s.point);
            let (cr, cc) = (fr.round() as i64, fc.round() as i64);
            if self.index_of(cr, cc).is_none() {
                return false;
            }
            (fr - cr as f64).abs() <= 0.5 && (fc - cc as f64).abs() <= 0.5
        })
    }
}
