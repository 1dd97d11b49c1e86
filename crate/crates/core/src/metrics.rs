//! Link metrics (SNR, spectrum and energy efficiency), the asymptotic
//! reflective-proportion analysis, and near-field region diagnostics.

use crate::channel::ChannelSet;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("total power must be positive, got {0}")]
    NonPositivePower(f64),
}

/// Received SNR for a precoder and per-surface reflective diagonals:
///
/// `gamma = P_t * |(f^H + sum_k g_k^H Phi_k h_k^H) w|^2
///          / (sigma_r^2 * sum_k ||g_k^H Phi_k||^2 + sigma_u^2)`.
///
/// The surface-noise term is the expectation over the independent
/// per-element noise; the direct link is counted once.
pub fn snr(
    channels: &ChannelSet,
    weights: &[Complex64],
    reflective: &[Vec<Complex64>],
    transmit_power_w: f64,
    ue_noise_w: f64,
    ris_noise_w: f64,
) -> Result<f64, MetricsError> {
    if weights.len() != channels.n_t {
        return Err(MetricsError::DimensionMismatch(format!(
            "{} precoder entries for {} antennas",
            weights.len(),
            channels.n_t
        )));
    }
    if reflective.len() != channels.bs_ris.len() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{} reflective diagonals for {} surfaces",
            reflective.len(),
            channels.bs_ris.len()
        )));
    }
    // Direct term f^H w.
    let mut signal: Complex64 = channels
        .direct
        .iter()
        .zip(weights)
        .map(|(f, w)| f.conj() * w)
        .sum();
    // Cascade terms g_k^H Phi_k h_k^H w and the surface-noise quadratic form.
    let mut noise = ue_noise_w;
    for (k, phi) in reflective.iter().enumerate() {
        if phi.len() != channels.n_r {
            return Err(MetricsError::DimensionMismatch(format!(
                "surface {k}: {} phases for {} elements",
                phi.len(),
                channels.n_r
            )));
        }
        let incident = channels.incident_field(k, weights);
        for ((g, p), inc) in channels.ris_ue[k].iter().zip(phi).zip(&incident) {
            signal += g.conj() * p * inc;
            noise += g.norm_sqr() * p.norm_sqr() * ris_noise_w;
        }
    }
    Ok(transmit_power_w * signal.norm_sqr() / noise)
}

/// Shannon mapping, bit/s/Hz.
pub fn spectrum_efficiency(gamma: f64) -> f64 {
    (1.0 + gamma.max(0.0)).log2()
}

/// Spectrum efficiency per watt of total supplied power. Self-sustaining
/// surfaces contribute no external power.
pub fn energy_efficiency(se: f64, transmit_power_w: f64, external_ris_power_w: f64) -> Result<f64, MetricsError> {
    let total = transmit_power_w + external_ris_power_w;
    if total <= 0.0 {
        return Err(MetricsError::NonPositivePower(total));
    }
    Ok(se / total)
}

/// Parameters of the asymptotic reflective-proportion analysis (uniform
/// spherical wave regime: every element sees the same incident amplitude).
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticParams {
    pub absorb_efficiency: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub n_r: f64,
    /// Uniform per-element incident amplitude, sqrt-watts.
    pub h: f64,
    pub p_controller_w: f64,
    pub p_dc_w: f64,
    /// Per-element circuit draw at the operating resolution, watts.
    pub f_d_w: f64,
    /// Fixed amplification ratio for the peak-gain expression.
    pub rho: f64,
}

impl AsymptoticParams {
    pub fn efficiency_product(&self) -> f64 {
        self.absorb_efficiency * self.eta_charge * self.eta_discharge
    }

    pub fn circuit_drain(&self) -> f64 {
        self.p_controller_w + self.p_dc_w + self.f_d_w * self.n_r
    }
}

/// Asymptotic power-gain model as a function of the reflective proportion
/// `p`:
///
/// `P_gain(p) = p * (rho_a*eta1*eta2*(1-p))^2 * N_R + C * p / (N_R * h^2)`
///
/// with `C` the total circuit drain. The expression embeds the
/// budget-determined amplification and is evaluated exactly as printed.
pub fn power_gain(p: f64, params: &AsymptoticParams) -> f64 {
    let eff = params.efficiency_product();
    let first = p * (eff * (1.0 - p)).powi(2) * params.n_r;
    let second = params.circuit_drain() * p / (params.n_r * params.h * params.h);
    first + second
}

/// Closed-form optimal reflective proportion:
///
/// `p_opt = 2/3 - sqrt(N_R^2 h^2 - C) / (3 N_R h rho_a eta1 eta2)`.
///
/// Returns `None` when the discriminant is negative (no interior optimum;
/// the harvest cannot cover the circuit drain at this size).
pub fn optimal_p(params: &AsymptoticParams) -> Option<f64> {
    let disc = params.n_r * params.n_r * params.h * params.h - params.circuit_drain();
    if disc < 0.0 {
        return None;
    }
    Some(2.0 / 3.0 - disc.sqrt() / (3.0 * params.n_r * params.h * params.efficiency_product()))
}

/// Large-surface limit of [`optimal_p`]: `2/3 - 1/(3 rho_a eta1 eta2)`.
pub fn optimal_p_limit(efficiency_product: f64) -> f64 {
    2.0 / 3.0 - 1.0 / (3.0 * efficiency_product)
}

/// Reflect-region half-angle realizing a proportion `p` at resolution `D`:
/// `chi = p * pi / 2^D`.
pub fn chi_for_proportion(p: f64, d_bits: u32) -> f64 {
    p * std::f64::consts::PI / (1u64 << d_bits) as f64
}

/// Optimal half-angle: `chi_opt = p_opt * pi / 2^D`.
pub fn optimal_chi(params: &AsymptoticParams, d_bits: u32) -> Option<f64> {
    optimal_p(params).map(|p| chi_for_proportion(p, d_bits))
}

/// Peak asymptotic gain over a passive surface at fixed amplification:
/// `(rho * p_opt_limit)^2`.
pub fn max_power_gain(params: &AsymptoticParams) -> f64 {
    let p = optimal_p_limit(params.efficiency_product()).max(0.0);
    (params.rho * p).powi(2)
}

/// Feasible reflective proportions under the sustainability constraint
/// `(rho_a*eta1*eta2*(1-p)*N_R*h)^2 > C`, found by bisection, plus whether
/// the closed-form optimum lies inside.
#[derive(Debug, Clone, Copy)]
pub struct SustainabilityBoundary {
    /// Upper end of the feasible interval `[0, p_bound)`; `None` when no
    /// proportion is feasible.
    pub p_bound: Option<f64>,
    /// Optimal proportion, when defined.
    pub p_opt: Option<f64>,
    /// The optimum satisfies the sustainability constraint.
    pub optimum_sustainable: bool,
}

pub fn sustainability_boundary(params: &AsymptoticParams) -> SustainabilityBoundary {
    let feasible = |p: f64| {
        let lhs = params.efficiency_product() * (1.0 - p) * params.n_r * params.h;
        lhs * lhs > params.circuit_drain()
    };
    let p_bound = if !feasible(0.0) {
        None
    } else if feasible(1.0) {
        Some(1.0)
    } else {
        // The constraint is monotone decreasing in p: bisect the crossing.
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    let p_opt = optimal_p(params);
    let optimum_sustainable = match (p_opt, p_bound) {
        (Some(p), Some(b)) => p < b,
        _ => false,
    };
    SustainabilityBoundary { p_bound, p_opt, optimum_sustainable }
}

/// Uniform-power distance: beyond it the per-element amplitude spread stays
/// within the `gamma_th` power-ratio threshold.
/// `UPD = sqrt(g / (1 - g)) * L_R / 2` with `g = gamma_th^(2/3)`.
pub fn upd(gamma_th: f64, diagonal_m: f64) -> f64 {
    let g = gamma_th.powf(2.0 / 3.0);
    (g / (1.0 - g)).sqrt() * diagonal_m / 2.0
}

/// Rayleigh distance `2 L^2 / lambda` for an aperture of diagonal `L`.
pub fn rayleigh_distance(diagonal_m: f64, lambda: f64) -> f64 {
    2.0 * diagonal_m * diagonal_m / lambda
}
