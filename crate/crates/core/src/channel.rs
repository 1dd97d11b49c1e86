//! Near-field line-of-sight channel coefficients, radiation patterns, the
//! optional diffuse (NLoS) component on the direct link, and the
//! channel-estimation error model.

use crate::math::{wallis_integral, Point3};
use crate::scenario::ScenarioConfig;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("endpoints coincide; the path-loss model needs a positive distance")]
    CoincidentPoints,
    #[error("gain must be non-negative, got {0}")]
    NegativeGain(f64),
}

/// Normalized cosine-power radiation pattern.
///
/// `G(theta) = 4*pi*cos^q(theta) / (2*pi*W_q)` over the front hemisphere,
/// zero behind, with `W_q` the Wallis integral. The normalization integrates
/// over `d(theta) d(phi)` without the solid-angle Jacobian, exactly as the
/// pattern model is defined; the constant scales all gains uniformly.
pub fn radiation_gain(theta: f64, q: f64) -> f64 {
    if !(0.0..=PI / 2.0).contains(&theta) {
        return 0.0;
    }
    let wq = wallis_integral(q);
    4.0 * PI * theta.cos().powf(q) / (2.0 * PI * wq)
}

/// Directional gain of one node: a boresight gain scaled by `cos^q` of the
/// off-axis angle, zero behind the aperture plane. Omnidirectional nodes
/// (single-antenna receivers) keep the boresight gain over the full sphere.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AntennaPattern {
    /// Boresight gain in dBi.
    pub boresight_gain_dbi: f64,
    /// Cosine-power exponent; 0 keeps the gain flat over the front hemisphere.
    pub exponent_q: f64,
    /// Full-sphere coverage; disables the hemisphere cutoff.
    pub omni: bool,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern::isotropic()
    }
}

impl AntennaPattern {
    pub fn isotropic() -> Self {
        AntennaPattern { boresight_gain_dbi: 0.0, exponent_q: 0.0, omni: true }
    }

    pub fn boresight_linear(&self) -> f64 {
        10f64.powf(self.boresight_gain_dbi / 10.0)
    }

    /// Linear gain toward `target` as seen from `position` with boresight
    /// direction `boresight`.
    pub fn gain_towards(&self, position: Point3, boresight: Point3, target: Point3) -> f64 {
        if self.omni {
            return self.boresight_linear();
        }
        let dir = target - position;
        let (Some(d), Some(b)) = (dir.normalized(), boresight.normalized()) else {
            return 0.0;
        };
        let c = d.dot(b);
        if c <= 0.0 {
            return 0.0;
        }
        self.boresight_linear() * c.powf(self.exponent_q)
    }
}

/// Free-space line-of-sight coefficient between two points:
/// magnitude `sqrt(g_tx*g_rx) * lambda / (4*pi*d)`, phase `-2*pi*d/lambda`.
pub fn los_coefficient(
    p1: Point3,
    p2: Point3,
    g_tx: f64,
    g_rx: f64,
    lambda: f64,
) -> Result<Complex64, ChannelError> {
    if g_tx < 0.0 || g_rx < 0.0 {
        return Err(ChannelError::NegativeGain(g_tx.min(g_rx)));
    }
    let d = p1.distance(p2);
    if d <= 0.0 {
        return Err(ChannelError::CoincidentPoints);
    }
    let magnitude = (g_tx * g_rx).sqrt() * lambda / (4.0 * PI * d);
    let phase = -TAU * d / lambda;
    Ok(Complex64::from_polar(magnitude, phase))
}

/// All channels of one scenario realization.
///
/// `direct[n_t]` is the BS-to-UE coefficient, `bs_ris[k][(n_t, n_r)]` the
/// BS-to-RIS matrix stored row-major by antenna, and `ris_ue[k][n_r]` the
/// RIS-to-UE vector.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub direct: Vec<Complex64>,
    pub bs_ris: Vec<Vec<Complex64>>,
    pub ris_ue: Vec<Vec<Complex64>>,
    pub n_t: usize,
    pub n_r: usize,
}

impl ChannelSet {
    pub fn bs_ris_entry(&self, k: usize, n_t: usize, n_r: usize) -> Complex64 {
        self.bs_ris[k][n_t * self.n_r + n_r]
    }

    /// Incident field at each element of RIS `k` for precoder `w` (unit
    /// transmit power): the `n_r`-th entry of `h_k^H w`.
    pub fn incident_field(&self, k: usize, w: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_r];
        for (n_r, slot) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n_t, &w_t) in w.iter().enumerate() {
                acc += self.bs_ris_entry(k, n_t, n_r).conj() * w_t;
            }
            *slot = acc;
        }
        out
    }
}

/// Build the true channels of a scenario. Deterministic: the diffuse
/// component, when enabled, is drawn from `rng`.
pub fn build_channels<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<ChannelSet, ChannelError> {
    let lambda = cfg.wavelength;
    let ue = cfg.ue_position;
    let n_t = cfg.bs_antennas.len();

    let mut direct = Vec::with_capacity(n_t);
    for &t in &cfg.bs_antennas {
        let g_t = cfg.bs_pattern.gain_towards(t, cfg.bs_boresight, ue);
        let g_u = cfg.ue_pattern.gain_towards(ue, cfg.ue_boresight, t);
        direct.push(los_coefficient(t, ue, g_t, g_u, lambda)?);
    }
    if let Some(k_db) = cfg.rician_factor_db {
        let nlos = nlos_component(&direct, k_db, rng);
        for (f, e) in direct.iter_mut().zip(nlos) {
            *f += e;
        }
    }

    let mut bs_ris = Vec::with_capacity(cfg.ris.len());
    let mut ris_ue = Vec::with_capacity(cfg.ris.len());
    let mut n_r_all = 0;
    for panel in &cfg.ris {
        let elements = panel.element_positions();
        n_r_all = elements.len();
        let mut h = Vec::with_capacity(n_t * elements.len());
        for &t in &cfg.bs_antennas {
            for &r in &elements {
                let g_t = cfg.bs_pattern.gain_towards(t, cfg.bs_boresight, r);
                let g_r = cfg.ris_pattern.gain_towards(r, panel.normal, t);
                h.push(los_coefficient(t, r, g_t, g_r, lambda)?);
            }
        }
        let mut g = Vec::with_capacity(elements.len());
        for &r in &elements {
            let g_r = cfg.ris_pattern.gain_towards(r, panel.normal, ue);
            let g_u = cfg.ue_pattern.gain_towards(ue, cfg.ue_boresight, r);
            g.push(los_coefficient(r, ue, g_r, g_u, lambda)?);
        }
        bs_ris.push(h);
        ris_ue.push(g);
    }

    Ok(ChannelSet { direct, bs_ris, ris_ue, n_t, n_r: n_r_all })
}

/// Circularly-symmetric Gaussian multipath term for the direct link, with
/// per-antenna power equal to the line-of-sight power divided by the Rician
/// factor. An infinite factor returns zeros.
pub fn nlos_component<R: Rng + ?Sized>(
    los: &[Complex64],
    rician_factor_db: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    if rician_factor_db.is_infinite() && rician_factor_db > 0.0 {
        return vec![Complex64::new(0.0, 0.0); los.len()];
    }
    let k_lin = 10f64.powf(rician_factor_db / 10.0);
    let normal = Normal::new(0.0, 1.0).unwrap();
    los.iter()
        .map(|f| {
            let sigma = (f.norm_sqr() / k_lin / 2.0).sqrt();
            Complex64::new(sigma * normal.sample(rng), sigma * normal.sample(rng))
        })
        .collect()
}

/// Channel-estimation error model: `f_hat = f + e` with `e` a
/// circularly-symmetric Gaussian of per-entry standard deviation
/// `sigma_ce * ||f|| / sqrt(N_T)`.
pub fn apply_ce_error<R: Rng + ?Sized>(f: &[Complex64], sigma_ce: f64, rng: &mut R) -> Vec<Complex64> {
    if sigma_ce == 0.0 {
        return f.to_vec();
    }
    let norm = f.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let per_entry = sigma_ce * norm / (f.len() as f64).sqrt();
    let normal = Normal::new(0.0, per_entry / 2f64.sqrt()).unwrap();
    f.iter()
        .map(|x| x + Complex64::new(normal.sample(rng), normal.sample(rng)))
        .collect()
}
