//! Benchmark transmission strategies: power splitting, time switching,
//! element splitting, a random-phase baseline, a perfect-CSI alternating
//! optimizer, and an externally powered reference. Each strategy produces a
//! full surface state plus its harvesting budget, so every outcome respects
//! the same energy-balance rules as the element-wise design.

use crate::beamforming::{run_algorithm1, AlgorithmOutput, BeamformingError, BeamformingOptions, Precoder};
use crate::channel::{apply_ce_error, build_channels, ChannelSet};
use crate::localization::sample_location_noise;
use crate::math::{wrap_2pi, Point3};
use crate::metrics::{energy_efficiency, snr, spectrum_efficiency, MetricsError};
use crate::ris::{quantize_phase, random_reflective_subset, NoiseMode};
use crate::scenario::ScenarioConfig;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Ris(#[from] crate::ris::RisError),
    #[error("factor {0} outside [0, 1]")]
    FactorOutOfRange(f64),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
}

/// Strategy identifiers. The CSI-driven optimizer comes in grid-phase and
/// continuous-phase flavors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyId {
    /// Element-wise zone selection (the distributed design).
    Ew,
    /// Element-wise selection with continuous alignment phases.
    EwContinuous,
    PowerSplitting,
    TimeSwitching,
    ElementSplitting,
    /// Element-wise split with uniformly random grid phases.
    RandomPhase,
    CsiAlternating,
    CsiAlternatingContinuous,
    /// Externally powered surface; the power budget is split evenly between
    /// the transmitter and the surface supply.
    NoEhExternal,
}

impl StrategyId {
    pub const ALL: [StrategyId; 9] = [
        StrategyId::Ew,
        StrategyId::EwContinuous,
        StrategyId::PowerSplitting,
        StrategyId::TimeSwitching,
        StrategyId::ElementSplitting,
        StrategyId::RandomPhase,
        StrategyId::CsiAlternating,
        StrategyId::CsiAlternatingContinuous,
        StrategyId::NoEhExternal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyId::Ew => "ew",
            StrategyId::EwContinuous => "ew-continuous",
            StrategyId::PowerSplitting => "ps",
            StrategyId::TimeSwitching => "ts",
            StrategyId::ElementSplitting => "es",
            StrategyId::RandomPhase => "random-phase",
            StrategyId::CsiAlternating => "csi-ao",
            StrategyId::CsiAlternatingContinuous => "csi-ao-continuous",
            StrategyId::NoEhExternal => "no-eh",
        }
    }

    /// Strategies with a tunable operating factor.
    pub fn has_factor(&self) -> bool {
        matches!(
            self,
            StrategyId::PowerSplitting | StrategyId::TimeSwitching | StrategyId::ElementSplitting
        )
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyId {
    type Err = StrategyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| StrategyError::UnknownStrategy(s.to_string()))
    }
}

impl TryFrom<String> for StrategyId {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse().map_err(|e: StrategyError| e.to_string())
    }
}

impl From<StrategyId> for String {
    fn from(id: StrategyId) -> String {
        id.as_str().to_string()
    }
}

/// One evaluated strategy realization.
#[derive(Debug, Clone)]
pub struct StrategyOutcome {
    pub strategy: StrategyId,
    pub factor: Option<f64>,
    /// Spectrum efficiency, bit/s/Hz.
    pub se: f64,
    /// Energy efficiency, bit/s/Hz per watt.
    pub ee: f64,
    /// Stored harvested power across surfaces, watts.
    pub harvested_w: f64,
    pub sustainable: bool,
    pub rho_eff: f64,
    pub n_reflective: usize,
    /// Alternating-optimizer convergence, when applicable.
    pub converged: Option<bool>,
}

/// Estimated state visible to the beamformer for one trial: noisy receiver
/// position and noisy direct-channel estimate.
pub struct EstimatedState {
    pub f_hat: Vec<Complex64>,
    pub u_hat: Point3,
}

pub fn estimate_state<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    rng: &mut R,
) -> EstimatedState {
    let noise = sample_location_noise(cfg.location_noise_std_m, rng);
    let f_hat = apply_ce_error(&channels.direct, cfg.ce_error_std, rng);
    EstimatedState { f_hat, u_hat: cfg.ue_position + noise }
}

/// Estimated cascade phase of each element of surface `k`: the phase of
/// `sum_nt exp(j*(psi_nt + 2*pi*(d_TR + d_RU)/lambda))` computed from the
/// estimated receiver position. Negating it aligns the element's reflected
/// contribution with the direct link.
fn estimated_cascade_phases(
    cfg: &ScenarioConfig,
    k: usize,
    precoder: &Precoder,
    u_hat: Point3,
) -> Vec<f64> {
    let elements = cfg.ris[k].element_positions();
    elements
        .iter()
        .map(|r| {
            let d_ru = r.distance(u_hat);
            let acc: Complex64 = cfg
                .bs_antennas
                .iter()
                .zip(&precoder.phases)
                .map(|(t, psi)| Complex64::from_polar(1.0, psi + TAU * (t.distance(*r) + d_ru) / cfg.wavelength))
                .sum();
            acc.arg()
        })
        .collect()
}

/// Alignment phases (negated cascade phases), optionally quantized to the
/// configured grid.
fn alignment_phases(cfg: &ScenarioConfig, k: usize, precoder: &Precoder, u_hat: Point3, quantized: bool) -> Vec<f64> {
    estimated_cascade_phases(cfg, k, precoder, u_hat)
        .into_iter()
        .map(|phi| {
            let theta = wrap_2pi(-phi);
            if quantized {
                quantize_phase(theta, cfg.phase_resolution_bits)
            } else {
                theta
            }
        })
        .collect()
}

fn total_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[allow(clippy::too_many_arguments)]
fn finish_outcome(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    precoder: &Precoder,
    reflective: Vec<Vec<Complex64>>,
    strategy: StrategyId,
    factor: Option<f64>,
    harvested: f64,
    sustainable: bool,
    rho_eff: f64,
    n_reflective: usize,
    rate_factor: f64,
    transmit_power_w: f64,
    external_power_w: f64,
    converged: Option<bool>,
) -> Result<StrategyOutcome, StrategyError> {
    let gamma = snr(
        channels,
        &precoder.weights,
        &reflective,
        transmit_power_w,
        cfg.ue_noise_w,
        cfg.ris_noise_w,
    )?;
    let se = rate_factor * spectrum_efficiency(gamma);
    let ee = energy_efficiency(se, transmit_power_w + external_power_w, 0.0)?;
    Ok(StrategyOutcome {
        strategy,
        factor,
        se,
        ee,
        harvested_w: harvested,
        sustainable,
        rho_eff,
        n_reflective,
        converged,
    })
}

/// Element-wise design (the distributed beamformer), with grid or
/// continuous phase assignment.
pub fn evaluate_ew(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    state: &EstimatedState,
    continuous: bool,
) -> Result<StrategyOutcome, StrategyError> {
    let (precoder, outputs) = run_algorithm1(
        cfg,
        channels,
        &state.f_hat,
        state.u_hat,
        &BeamformingOptions {
            chi: cfg.chi_override,
            ..Default::default()
        },
    )?;
    let mut reflective = Vec::with_capacity(outputs.len());
    for (k, out) in outputs.iter().enumerate() {
        if continuous {
            let phases = alignment_phases(cfg, k, &precoder, state.u_hat, false);
            reflective.push(continuous_diagonal(out, &phases));
        } else {
            reflective.push(out.config.reflective_diagonal());
        }
    }
    let harvested: f64 = outputs.iter().map(|o| o.harvested_w).sum();
    let sustainable = outputs.iter().all(|o| o.sustainable);
    let rho_eff = outputs.iter().map(|o| o.rho_eff).fold(0.0, f64::max).max(1.0);
    let n_reflective = outputs.iter().map(|o| o.config.n_reflective()).sum();
    let strategy = if continuous { StrategyId::EwContinuous } else { StrategyId::Ew };
    finish_outcome(
        cfg,
        channels,
        &precoder,
        reflective,
        strategy,
        None,
        harvested,
        sustainable,
        rho_eff,
        n_reflective,
        1.0,
        cfg.transmit_power_w,
        0.0,
        None,
    )
}

fn continuous_diagonal(out: &AlgorithmOutput, phases: &[f64]) -> Vec<Complex64> {
    out.config
        .modes()
        .iter()
        .zip(phases)
        .map(|(m, theta)| match m {
            crate::ris::ElementMode::Reflective { .. } => Complex64::from_polar(out.rho_eff, *theta),
            crate::ris::ElementMode::Absorptive => Complex64::new(0.0, 0.0),
        })
        .collect()
}

/// Element-wise split with uniformly random grid phases on the reflective
/// set (budget and selection identical to the element-wise design).
pub fn evaluate_random_phase<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    state: &EstimatedState,
    rng: &mut R,
) -> Result<StrategyOutcome, StrategyError> {
    let (precoder, outputs) = run_algorithm1(
        cfg,
        channels,
        &state.f_hat,
        state.u_hat,
        &BeamformingOptions {
            chi: cfg.chi_override,
            ..Default::default()
        },
    )?;
    let levels = 1u64 << cfg.phase_resolution_bits;
    let mut reflective = Vec::with_capacity(outputs.len());
    for out in &outputs {
        let diag: Vec<Complex64> = out
            .config
            .modes()
            .iter()
            .map(|m| match m {
                crate::ris::ElementMode::Reflective { .. } => {
                    let idx = rng.random_range(0..levels);
                    Complex64::from_polar(out.rho_eff, TAU * idx as f64 / levels as f64)
                }
                crate::ris::ElementMode::Absorptive => Complex64::new(0.0, 0.0),
            })
            .collect();
        reflective.push(diag);
    }
    let harvested: f64 = outputs.iter().map(|o| o.harvested_w).sum();
    let sustainable = outputs.iter().all(|o| o.sustainable);
    let rho_eff = outputs.iter().map(|o| o.rho_eff).fold(0.0, f64::max).max(1.0);
    let n_reflective = outputs.iter().map(|o| o.config.n_reflective()).sum();
    finish_outcome(
        cfg,
        channels,
        &precoder,
        reflective,
        StrategyId::RandomPhase,
        None,
        harvested,
        sustainable,
        rho_eff,
        n_reflective,
        1.0,
        cfg.transmit_power_w,
        0.0,
        None,
    )
}

/// Power splitting: every element harvests the fraction `epsilon` of its own
/// incident power (per-element rectification) and reflects the rest with
/// quantized alignment phases; amplification comes from the epsilon-budget.
pub fn evaluate_ps(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    state: &EstimatedState,
    epsilon: f64,
) -> Result<StrategyOutcome, StrategyError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(StrategyError::FactorOutOfRange(epsilon));
    }
    let precoder = crate::beamforming::mrt_precoder(&state.f_hat)?;
    let pm = &cfg.power_model;
    let rho_a2 = pm.absorb_efficiency * pm.absorb_efficiency;
    let mut reflective = Vec::new();
    let mut harvested_total = 0.0;
    let mut sustainable = true;
    let mut rho_all: f64 = 1.0;
    let mut n_reflective = 0;
    for k in 0..cfg.ris.len() {
        let incident = channels.incident_field(k, &precoder.weights);
        let inc_power: f64 = incident.iter().map(|x| x.norm_sqr() * cfg.transmit_power_w).sum();
        let n_r = incident.len();
        let harvested = pm.eta_charge * (epsilon * rho_a2 * inc_power + cfg.ris_noise_w);
        let available = crate::ris::available_power(harvested, pm, cfg.phase_resolution_bits, n_r);
        let ok = crate::ris::sustainability_check(available);
        let split_amp = (1.0 - epsilon).sqrt();
        let rho_eff = if ok && n_r > 0 && split_amp > 0.0 {
            let h_rms = (inc_power * (1.0 - epsilon) / n_r as f64).sqrt();
            crate::ris::feasible_amplification(available, n_r, h_rms, pm.rho_max)?
        } else {
            1.0
        };
        let phases = alignment_phases(cfg, k, &precoder, state.u_hat, true);
        reflective.push(
            phases
                .iter()
                .map(|theta| Complex64::from_polar(split_amp * rho_eff, *theta))
                .collect(),
        );
        harvested_total += harvested;
        sustainable &= ok;
        rho_all = rho_all.max(rho_eff);
        n_reflective += n_r;
    }
    finish_outcome(
        cfg,
        channels,
        &precoder,
        reflective,
        StrategyId::PowerSplitting,
        Some(epsilon),
        harvested_total,
        sustainable,
        rho_all,
        n_reflective,
        1.0,
        cfg.transmit_power_w,
        0.0,
        None,
    )
}

/// Time switching: the fraction `kappa` of the slot harvests with the full
/// absorptive array (switch-aligned composite stream); the remainder
/// reflects with all elements, powered by the banked energy. The rate is
/// scaled by `1 - kappa`.
pub fn evaluate_ts(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    state: &EstimatedState,
    kappa: f64,
) -> Result<StrategyOutcome, StrategyError> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(StrategyError::FactorOutOfRange(kappa));
    }
    let precoder = crate::beamforming::mrt_precoder(&state.f_hat)?;
    let pm = &cfg.power_model;
    let mut reflective = Vec::new();
    let mut harvested_total = 0.0;
    let mut sustainable = true;
    let mut rho_all: f64 = 1.0;
    let mut n_reflective = 0;
    for (k, panel) in cfg.ris.iter().enumerate() {
        let incident = channels.incident_field(k, &precoder.weights);
        let n_r = incident.len();
        let elements = panel.element_positions();
        let dist: Vec<Vec<f64>> = cfg
            .bs_antennas
            .iter()
            .map(|t| elements.iter().map(|r| t.distance(*r)).collect())
            .collect();
        let flips = crate::beamforming::eh_switch_design(&dist, &precoder.phases, cfg.wavelength);
        let switch: Vec<Complex64> = flips
            .iter()
            .map(|f| if *f { Complex64::new(-1.0, 0.0) } else { Complex64::new(1.0, 0.0) })
            .collect();
        let absorb = vec![pm.absorb_efficiency; n_r];
        let harvest_rate = crate::ris::harvested_power(
            &switch,
            &absorb,
            &incident,
            cfg.transmit_power_w,
            cfg.ris_noise_w,
            pm.eta_charge,
            NoiseMode::Expectation,
        )?;
        // Energy per unit slot: harvest over kappa, drains over the slot.
        let banked = kappa * harvest_rate;
        let available = crate::ris::available_power(banked, pm, cfg.phase_resolution_bits, n_r);
        let ok = crate::ris::sustainability_check(available);
        let reflect_time = 1.0 - kappa;
        let inc_power: f64 = incident.iter().map(|x| x.norm_sqr() * cfg.transmit_power_w).sum();
        let rho_eff = if ok && reflect_time > 0.0 && n_r > 0 {
            let h_rms = (inc_power * reflect_time / n_r as f64).sqrt();
            crate::ris::feasible_amplification(available, n_r, h_rms, pm.rho_max)?
        } else {
            1.0
        };
        let phases = alignment_phases(cfg, k, &precoder, state.u_hat, true);
        reflective.push(
            phases
                .iter()
                .map(|theta| Complex64::from_polar(rho_eff, *theta))
                .collect(),
        );
        harvested_total += banked;
        sustainable &= ok;
        rho_all = rho_all.max(rho_eff);
        n_reflective += n_r;
    }
    finish_outcome(
        cfg,
        channels,
        &precoder,
        reflective,
        StrategyId::TimeSwitching,
        Some(kappa),
        harvested_total,
        sustainable,
        rho_all,
        n_reflective,
        1.0 - kappa,
        cfg.transmit_power_w,
        0.0,
        None,
    )
}

/// Element splitting: a uniformly random fraction of elements reflects with
/// quantized alignment phases; the complement harvests through the aligned
/// composite stream.
pub fn evaluate_es<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    state: &EstimatedState,
    p_es: f64,
    rng: &mut R,
) -> Result<StrategyOutcome, StrategyError> {
    if !(0.0..=1.0).contains(&p_es) {
        return Err(StrategyError::FactorOutOfRange(p_es));
    }
    let precoder = crate::beamforming::mrt_precoder(&state.f_hat)?;
    let pm = &cfg.power_model;
    let mut reflective = Vec::new();
    let mut harvested_total = 0.0;
    let mut sustainable = true;
    let mut rho_all: f64 = 1.0;
    let mut n_reflective = 0;
    for (k, panel) in cfg.ris.iter().enumerate() {
        let incident = channels.incident_field(k, &precoder.weights);
        let n_r = incident.len();
        let count = (p_es * n_r as f64).floor() as usize;
        let mask = random_reflective_subset(n_r, count, rng);
        let elements = panel.element_positions();
        let dist: Vec<Vec<f64>> = cfg
            .bs_antennas
            .iter()
            .map(|t| elements.iter().map(|r| t.distance(*r)).collect())
            .collect();
        let flips = crate::beamforming::eh_switch_design(&dist, &precoder.phases, cfg.wavelength);
        let switch: Vec<Complex64> = flips
            .iter()
            .map(|f| if *f { Complex64::new(-1.0, 0.0) } else { Complex64::new(1.0, 0.0) })
            .collect();
        let absorb: Vec<f64> = mask
            .iter()
            .map(|refl| if *refl { 0.0 } else { pm.absorb_efficiency })
            .collect();
        let harvested = crate::ris::harvested_power(
            &switch,
            &absorb,
            &incident,
            cfg.transmit_power_w,
            cfg.ris_noise_w,
            pm.eta_charge,
            NoiseMode::Expectation,
        )?;
        let available = crate::ris::available_power(harvested, pm, cfg.phase_resolution_bits, n_r);
        let ok = crate::ris::sustainability_check(available);
        let refl_power: f64 = incident
            .iter()
            .zip(&mask)
            .filter(|(_, m)| **m)
            .map(|(x, _)| x.norm_sqr() * cfg.transmit_power_w)
            .sum();
        let rho_eff = if ok && count > 0 {
            let h_rms = (refl_power / count as f64).sqrt();
            crate::ris::feasible_amplification(available, count, h_rms, pm.rho_max)?
        } else {
            1.0
        };
        let phases = alignment_phases(cfg, k, &precoder, state.u_hat, true);
        reflective.push(
            mask.iter()
                .zip(&phases)
                .map(|(refl, theta)| {
                    if *refl {
                        Complex64::from_polar(rho_eff, *theta)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect(),
        );
        harvested_total += harvested;
        sustainable &= ok;
        rho_all = rho_all.max(rho_eff);
        n_reflective += count;
    }
    finish_outcome(
        cfg,
        channels,
        &precoder,
        reflective,
        StrategyId::ElementSplitting,
        Some(p_es),
        harvested_total,
        sustainable,
        rho_all,
        n_reflective,
        1.0,
        cfg.transmit_power_w,
        0.0,
        None,
    )
}

/// Perfect-CSI alternating optimizer. Starts from the element-wise
/// configuration (same reflective split and budget), then alternates
/// per-element phase ascent against the true composite channel with MRT
/// refits, so its spectrum efficiency can only improve on the starting
/// point.
pub fn evaluate_csi_ao(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    state: &EstimatedState,
    continuous: bool,
    max_iters: usize,
    tol: f64,
) -> Result<StrategyOutcome, StrategyError> {
    let (precoder0, outputs) = run_algorithm1(
        cfg,
        channels,
        &channels.direct, // perfect CSI
        state.u_hat,
        &BeamformingOptions {
            chi: cfg.chi_override,
            ..Default::default()
        },
    )?;
    let levels = 1u64 << cfg.phase_resolution_bits;
    let mut weights = precoder0.weights.clone();
    let mut phases: Vec<Vec<f64>> = outputs
        .iter()
        .map(|o| {
            (0..o.config.len())
                .map(|i| o.config.reflective_phase(i).unwrap_or(0.0))
                .collect()
        })
        .collect();
    let masks: Vec<Vec<bool>> = outputs
        .iter()
        .map(|o| (0..o.config.len()).map(|i| o.config.is_reflective(i)).collect())
        .collect();
    let rho: Vec<f64> = outputs.iter().map(|o| o.rho_eff).collect();

    let build_diagonals = |phases: &[Vec<f64>]| -> Vec<Vec<Complex64>> {
        masks
            .iter()
            .zip(phases)
            .zip(&rho)
            .map(|((mask, ph), r)| {
                mask.iter()
                    .zip(ph)
                    .map(|(m, theta)| {
                        if *m {
                            Complex64::from_polar(*r, *theta)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect()
            })
            .collect()
    };

    let se_of = |weights: &[Complex64], phases: &[Vec<f64>]| -> Result<f64, StrategyError> {
        let gamma = snr(
            channels,
            weights,
            &build_diagonals(phases),
            cfg.transmit_power_w,
            cfg.ue_noise_w,
            cfg.ris_noise_w,
        )?;
        Ok(spectrum_efficiency(gamma))
    };

    let mut best_se = se_of(&weights, &phases)?;
    let mut converged = false;
    for _ in 0..max_iters {
        // (i) per-element phase ascent against the composite signal.
        let mut total: Complex64 = channels
            .direct
            .iter()
            .zip(&weights)
            .map(|(f, w)| f.conj() * w)
            .sum();
        let incidents: Vec<Vec<Complex64>> = (0..channels.bs_ris.len())
            .map(|k| channels.incident_field(k, &weights))
            .collect();
        for k in 0..channels.bs_ris.len() {
            for n in 0..channels.n_r {
                if masks[k][n] {
                    total += channels.ris_ue[k][n].conj()
                        * Complex64::from_polar(rho[k], phases[k][n])
                        * incidents[k][n];
                }
            }
        }
        for k in 0..channels.bs_ris.len() {
            for n in 0..channels.n_r {
                if !masks[k][n] {
                    continue;
                }
                let v = channels.ris_ue[k][n].conj() * incidents[k][n] * rho[k];
                let rest = total - Complex64::from_polar(1.0, phases[k][n]) * v;
                let new_phase = if continuous {
                    // Align the element term with the rest of the sum.
                    wrap_2pi(rest.arg() - v.arg())
                } else {
                    // Exact argmax over the grid.
                    (0..levels)
                        .map(|m| TAU * m as f64 / levels as f64)
                        .max_by(|a, b| {
                            let sa = (rest + Complex64::from_polar(1.0, *a) * v).norm_sqr();
                            let sb = (rest + Complex64::from_polar(1.0, *b) * v).norm_sqr();
                            sa.partial_cmp(&sb).unwrap()
                        })
                        .unwrap()
                };
                total = rest + Complex64::from_polar(1.0, new_phase) * v;
                phases[k][n] = new_phase;
            }
        }
        // (ii) MRT on the composite channel.
        let diags = build_diagonals(&phases);
        let mut m = vec![Complex64::new(0.0, 0.0); channels.n_t];
        for (t, slot) in m.iter_mut().enumerate() {
            let mut acc = channels.direct[t].conj();
            for k in 0..channels.bs_ris.len() {
                for n in 0..channels.n_r {
                    if diags[k][n].norm_sqr() > 0.0 {
                        acc += channels.ris_ue[k][n].conj()
                            * diags[k][n]
                            * channels.bs_ris_entry(k, t, n).conj();
                    }
                }
            }
            *slot = acc;
        }
        let norm = total_norm(&m);
        if norm > 0.0 {
            weights = m.iter().map(|x| x.conj() / norm).collect();
        }
        let se = se_of(&weights, &phases)?;
        if se - best_se < tol {
            best_se = best_se.max(se);
            converged = true;
            break;
        }
        best_se = se;
    }

    let harvested: f64 = outputs.iter().map(|o| o.harvested_w).sum();
    let sustainable = outputs.iter().all(|o| o.sustainable);
    let n_reflective = outputs.iter().map(|o| o.config.n_reflective()).sum();
    let se = se_of(&weights, &phases)?.max(best_se);
    let ee = energy_efficiency(se, cfg.transmit_power_w, 0.0)?;
    Ok(StrategyOutcome {
        strategy: if continuous {
            StrategyId::CsiAlternatingContinuous
        } else {
            StrategyId::CsiAlternating
        },
        factor: None,
        se,
        ee,
        harvested_w: harvested,
        sustainable,
        rho_eff: rho.iter().fold(1.0f64, |a, b| a.max(*b)),
        n_reflective,
        converged: Some(converged),
    })
}

/// Externally powered reference: the power budget `P_t` splits evenly
/// between transmission and the surface supply; all elements reflect with
/// quantized alignment phases and the supply covers the amplifiers.
pub fn evaluate_no_eh(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    state: &EstimatedState,
) -> Result<StrategyOutcome, StrategyError> {
    let precoder = crate::beamforming::mrt_precoder(&state.f_hat)?;
    let pm = &cfg.power_model;
    let tx_power = cfg.transmit_power_w / 2.0;
    let supply = cfg.transmit_power_w / 2.0;
    let mut reflective = Vec::new();
    let mut rho_all: f64 = 1.0;
    let mut n_reflective = 0;
    let per_surface_supply = supply / cfg.ris.len() as f64;
    for k in 0..cfg.ris.len() {
        let incident = channels.incident_field(k, &precoder.weights);
        let n_r = incident.len();
        let available = per_surface_supply - pm.circuit_drain(cfg.phase_resolution_bits, n_r);
        let inc_power: f64 = incident.iter().map(|x| x.norm_sqr() * tx_power).sum();
        let rho_eff = if available > 0.0 && n_r > 0 {
            let h_rms = (inc_power / n_r as f64).sqrt();
            crate::ris::feasible_amplification(available, n_r, h_rms, pm.rho_max)?
        } else {
            1.0
        };
        let phases = alignment_phases(cfg, k, &precoder, state.u_hat, true);
        reflective.push(
            phases
                .iter()
                .map(|theta| Complex64::from_polar(rho_eff, *theta))
                .collect(),
        );
        rho_all = rho_all.max(rho_eff);
        n_reflective += n_r;
    }
    finish_outcome(
        cfg,
        channels,
        &precoder,
        reflective,
        StrategyId::NoEhExternal,
        None,
        0.0,
        true,
        rho_all,
        n_reflective,
        1.0,
        tx_power,
        supply,
        None,
    )
}

/// Evaluate one strategy at a given factor with the supplied randomness.
pub fn evaluate_strategy<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    strategy: StrategyId,
    factor: Option<f64>,
    rng: &mut R,
) -> Result<StrategyOutcome, StrategyError> {
    let state = estimate_state(cfg, channels, rng);
    match strategy {
        StrategyId::Ew => evaluate_ew(cfg, channels, &state, false),
        StrategyId::EwContinuous => evaluate_ew(cfg, channels, &state, true),
        StrategyId::PowerSplitting => evaluate_ps(cfg, channels, &state, factor.unwrap_or(0.5)),
        StrategyId::TimeSwitching => evaluate_ts(cfg, channels, &state, factor.unwrap_or(0.5)),
        StrategyId::ElementSplitting => evaluate_es(cfg, channels, &state, factor.unwrap_or(0.5), rng),
        StrategyId::RandomPhase => evaluate_random_phase(cfg, channels, &state, rng),
        StrategyId::CsiAlternating => evaluate_csi_ao(cfg, channels, &state, false, 20, 1e-6),
        StrategyId::CsiAlternatingContinuous => evaluate_csi_ao(cfg, channels, &state, true, 20, 1e-6),
        StrategyId::NoEhExternal => evaluate_no_eh(cfg, channels, &state),
    }
}

/// Exhaustive grid search over `[0, 1]` in steps of `step`, maximizing the
/// score subject to the feasibility flag; ties break to the smaller factor.
pub fn grid_search_factor<F>(step: f64, mut eval: F) -> (f64, f64, bool)
where
    F: FnMut(f64) -> (f64, bool),
{
    let mut best: Option<(f64, f64, bool)> = None;
    let n = (1.0 / step).round() as usize;
    for i in 0..=n {
        let factor = (i as f64 * step).min(1.0);
        let (score, feasible) = eval(factor);
        let candidate = (factor, score, feasible);
        best = Some(match best {
            None => candidate,
            Some(cur) => {
                // Feasible beats infeasible; then a strictly larger score wins.
                if (feasible && !cur.2) || ((feasible == cur.2) && score > cur.1) {
                    candidate
                } else {
                    cur
                }
            }
        });
    }
    best.unwrap()
}

/// Grid-search the strategy's operating factor, maximizing spectrum
/// efficiency subject to sustainability. The search uses its own
/// deterministic randomness so the chosen factor depends only on the
/// configuration and the search seed.
pub fn optimize_factor(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    strategy: StrategyId,
    step: f64,
    search_seed: u64,
) -> Result<StrategyOutcome, StrategyError> {
    if !strategy.has_factor() {
        let mut rng = crate::rng::rng_from_seed(search_seed);
        return evaluate_strategy(cfg, channels, strategy, None, &mut rng);
    }
    let step = step.clamp(1e-4, 0.5);
    let (factor, _, _) = grid_search_factor(step, |f| {
        let mut rng = crate::rng::rng_from_seed(search_seed);
        match evaluate_strategy(cfg, channels, strategy, Some(f), &mut rng) {
            Ok(out) => (out.se, out.sustainable),
            Err(_) => (f64::NEG_INFINITY, false),
        }
    });
    let mut rng = crate::rng::rng_from_seed(search_seed);
    evaluate_strategy(cfg, channels, strategy, Some(factor), &mut rng)
}

/// Build channels for one trial (the diffuse component redraws per trial
/// when enabled).
pub fn trial_channels<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<ChannelSet, StrategyError> {
    Ok(build_channels(cfg, rng)?)
}
