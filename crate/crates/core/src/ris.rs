//! Element-wise surface state (reflective / absorptive / switch matrices,
//! discrete phase grid) and the energy-harvesting power budget.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RisError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("element {index}: reflective amplitude {found} does not match the shared gain {expected}")]
    AmplitudeMismatch { index: usize, found: f64, expected: f64 },
    #[error("element {index}: reflective phase {phase} is not on the {levels}-point grid")]
    PhaseOffGrid { index: usize, phase: f64, levels: usize },
    #[error("element {index}: absorptive value {found} must be 0 or {expected}")]
    BadAbsorptive { index: usize, found: f64, expected: f64 },
    #[error("element {index}: reflective and absorptive supports overlap")]
    OverlappingSupport { index: usize },
    #[error("element {index}: switch phase {found} must be 0 or pi")]
    BadSwitchPhase { index: usize, found: f64 },
    #[error("no reflective elements; amplification is undefined")]
    NoReflectiveElements,
    #[error("power model: {0}")]
    BadPowerModel(String),
}

/// Phase-shifter fabrication technology; drives the per-element power draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementTech {
    /// Per-element draw grows linearly with the resolution.
    Pin,
    /// Per-element draw independent of the resolution.
    Varactor,
}

/// Typical per-bit draw of a PIN-diode element, watts per bit.
pub const PIN_W_PER_BIT: f64 = 0.33e-3;
/// Typical fixed draw of a varactor element, watts.
pub const VARACTOR_W: f64 = 1.0e-3;

/// Conversion efficiencies and consumption terms of the harvesting budget.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerModel {
    /// Charging efficiency of the harvest path.
    pub eta_charge: f64,
    /// Discharging efficiency of the storage.
    pub eta_discharge: f64,
    /// Absorptive element efficiency.
    pub absorb_efficiency: f64,
    /// Controller power, watts.
    pub p_controller_w: f64,
    /// DC biasing power of the active circuits, watts.
    pub p_dc_w: f64,
    pub tech: ElementTech,
    /// PIN technology: watts per resolution bit per element.
    pub pin_w_per_bit: f64,
    /// Varactor technology: fixed watts per element.
    pub varactor_w: f64,
    /// Amplification cap (amplitude ratio).
    pub rho_max: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel::lossless_defaults()
    }
}

impl PowerModel {
    /// Reference-setup model: efficiencies 0.9, amplification cap 10, and no
    /// circuit draw (the published comparisons budget harvested power against
    /// amplification only; circuit coefficients matter for the
    /// reflective-proportion analysis and are set explicitly there).
    pub fn lossless_defaults() -> Self {
        PowerModel {
            eta_charge: 0.9,
            eta_discharge: 0.9,
            absorb_efficiency: 0.9,
            p_controller_w: 0.0,
            p_dc_w: 0.0,
            tech: ElementTech::Pin,
            pin_w_per_bit: 0.0,
            varactor_w: 0.0,
            rho_max: 10.0,
        }
    }

    /// Same efficiencies with the typical circuit-draw coefficients enabled.
    pub fn with_circuit_draw(tech: ElementTech) -> Self {
        PowerModel {
            tech,
            pin_w_per_bit: PIN_W_PER_BIT,
            varactor_w: VARACTOR_W,
            p_controller_w: 0.0,
            p_dc_w: 0.0,
            ..PowerModel::lossless_defaults()
        }
    }

    /// Per-element power draw at resolution `d_bits`.
    pub fn f_d(&self, d_bits: u32) -> f64 {
        match self.tech {
            ElementTech::Pin => self.pin_w_per_bit * d_bits as f64,
            ElementTech::Varactor => self.varactor_w,
        }
    }

    /// Total non-amplification drain for `n_r` elements at resolution `d_bits`.
    pub fn circuit_drain(&self, d_bits: u32, n_r: usize) -> f64 {
        self.p_controller_w + self.p_dc_w + self.f_d(d_bits) * n_r as f64
    }

    pub fn validate(&self) -> Result<(), RisError> {
        for (name, v, lo, hi) in [
            ("eta_charge", self.eta_charge, 0.0, 1.0),
            ("eta_discharge", self.eta_discharge, 0.0, 1.0),
            ("absorb_efficiency", self.absorb_efficiency, 0.0, 1.0),
        ] {
            if !(v > lo && v <= hi) {
                return Err(RisError::BadPowerModel(format!("{name} must be in ({lo}, {hi}], got {v}")));
            }
        }
        for (name, v) in [
            ("p_controller_w", self.p_controller_w),
            ("p_dc_w", self.p_dc_w),
            ("pin_w_per_bit", self.pin_w_per_bit),
            ("varactor_w", self.varactor_w),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(RisError::BadPowerModel(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.rho_max < 1.0 {
            return Err(RisError::BadPowerModel(format!("rho_max must be >= 1, got {}", self.rho_max)));
        }
        Ok(())
    }
}

/// The discrete phase grid `{2*pi*m / 2^D : m = 0..2^D-1}`.
pub fn discrete_phase_set(d_bits: u32) -> Vec<f64> {
    let levels = 1usize << d_bits;
    (0..levels).map(|m| TAU * m as f64 / levels as f64).collect()
}

/// Index of the grid point nearest to `theta` (mod 2*pi), ties rounding up.
pub fn quantize_phase_index(theta: f64, d_bits: u32) -> usize {
    let levels = 1u64 << d_bits;
    let x = theta.rem_euclid(TAU) / TAU * levels as f64;
    // `round` resolves exact half steps away from zero, i.e. toward the
    // larger grid index for non-negative x.
    (x.round() as u64 % levels) as usize
}

/// Nearest grid phase to `theta` (mod 2*pi); deviation at most `pi / 2^D`.
pub fn quantize_phase(theta: f64, d_bits: u32) -> f64 {
    let levels = 1u64 << d_bits;
    TAU * quantize_phase_index(theta, d_bits) as f64 / levels as f64
}

/// Per-element operating mode. Reflective phases are stored as grid indices
/// so grid membership holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementMode {
    Reflective { phase_index: u32 },
    Absorptive,
}

/// Validated element-wise configuration of one surface: disjoint
/// reflective/absorptive supports, a shared reflective amplitude, phases on
/// the discrete grid, and a binary (0 / pi) switch state per element.
#[derive(Debug, Clone)]
pub struct RisConfiguration {
    modes: Vec<ElementMode>,
    /// Switch state per element: `false` = 0, `true` = pi.
    switch_flip: Vec<bool>,
    resolution_bits: u32,
    /// Shared amplitude of active reflective elements.
    reflect_gain: f64,
    /// Absorptive efficiency applied on harvesting elements.
    absorb_efficiency: f64,
}

impl RisConfiguration {
    pub fn new(
        modes: Vec<ElementMode>,
        switch_flip: Vec<bool>,
        resolution_bits: u32,
        reflect_gain: f64,
        absorb_efficiency: f64,
    ) -> Result<Self, RisError> {
        if modes.len() != switch_flip.len() {
            return Err(RisError::DimensionMismatch(format!(
                "{} modes vs {} switch states",
                modes.len(),
                switch_flip.len()
            )));
        }
        let levels = 1u32 << resolution_bits;
        for (i, m) in modes.iter().enumerate() {
            if let ElementMode::Reflective { phase_index } = m {
                if *phase_index >= levels {
                    return Err(RisError::PhaseOffGrid {
                        index: i,
                        phase: TAU * *phase_index as f64 / levels as f64,
                        levels: levels as usize,
                    });
                }
            }
        }
        if !(reflect_gain >= 0.0 && reflect_gain.is_finite()) {
            return Err(RisError::BadPowerModel(format!("reflect gain must be >= 0, got {reflect_gain}")));
        }
        if !(absorb_efficiency > 0.0 && absorb_efficiency <= 1.0) {
            return Err(RisError::BadPowerModel(format!(
                "absorb efficiency must be in (0, 1], got {absorb_efficiency}"
            )));
        }
        Ok(RisConfiguration {
            modes,
            switch_flip,
            resolution_bits,
            reflect_gain,
            absorb_efficiency,
        })
    }

    /// Build from raw diagonals, validating every structural invariant:
    /// shared amplitude, on-grid phases, value-restricted absorptive entries,
    /// disjoint supports, and binary switch phases.
    pub fn from_diagonals(
        reflective: &[Complex64],
        absorptive: &[f64],
        switch_phases: &[f64],
        resolution_bits: u32,
        reflect_gain: f64,
        absorb_efficiency: f64,
    ) -> Result<Self, RisError> {
        if reflective.len() != absorptive.len() || reflective.len() != switch_phases.len() {
            return Err(RisError::DimensionMismatch(format!(
                "{} reflective vs {} absorptive vs {} switch entries",
                reflective.len(),
                absorptive.len(),
                switch_phases.len()
            )));
        }
        let levels = 1u64 << resolution_bits;
        let mut modes = Vec::with_capacity(reflective.len());
        let mut flips = Vec::with_capacity(reflective.len());
        for (i, (r, (a, s))) in reflective
            .iter()
            .zip(absorptive.iter().zip(switch_phases))
            .enumerate()
        {
            let reflecting = r.norm() > 0.0;
            if reflecting {
                if (r.norm() - reflect_gain).abs() > 1e-9 * reflect_gain.max(1.0) {
                    return Err(RisError::AmplitudeMismatch {
                        index: i,
                        found: r.norm(),
                        expected: reflect_gain,
                    });
                }
                let phase = r.arg().rem_euclid(TAU);
                let slot = phase / TAU * levels as f64;
                let idx = slot.round() as u64 % levels;
                if (slot - slot.round()).abs() > 1e-6 {
                    return Err(RisError::PhaseOffGrid { index: i, phase, levels: levels as usize });
                }
                if *a != 0.0 {
                    return Err(RisError::OverlappingSupport { index: i });
                }
                modes.push(ElementMode::Reflective { phase_index: idx as u32 });
            } else {
                if *a != 0.0 && (*a - absorb_efficiency).abs() > 1e-12 {
                    return Err(RisError::BadAbsorptive { index: i, found: *a, expected: absorb_efficiency });
                }
                modes.push(ElementMode::Absorptive);
            }
            if (s - 0.0).abs() < 1e-12 {
                flips.push(false);
            } else if (s - PI).abs() < 1e-12 {
                flips.push(true);
            } else {
                return Err(RisError::BadSwitchPhase { index: i, found: *s });
            }
        }
        RisConfiguration::new(modes, flips, resolution_bits, reflect_gain, absorb_efficiency)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn resolution_bits(&self) -> u32 {
        self.resolution_bits
    }

    pub fn reflect_gain(&self) -> f64 {
        self.reflect_gain
    }

    pub fn absorb_efficiency(&self) -> f64 {
        self.absorb_efficiency
    }

    pub fn modes(&self) -> &[ElementMode] {
        &self.modes
    }

    pub fn is_reflective(&self, i: usize) -> bool {
        matches!(self.modes[i], ElementMode::Reflective { .. })
    }

    pub fn n_reflective(&self) -> usize {
        self.modes.iter().filter(|m| matches!(m, ElementMode::Reflective { .. })).count()
    }

    pub fn reflective_phase(&self, i: usize) -> Option<f64> {
        match self.modes[i] {
            ElementMode::Reflective { phase_index } => {
                Some(TAU * phase_index as f64 / (1u64 << self.resolution_bits) as f64)
            }
            ElementMode::Absorptive => None,
        }
    }

    /// Reflective diagonal: `rho * exp(j*theta)` on active elements, zero on
    /// absorptive ones.
    pub fn reflective_diagonal(&self) -> Vec<Complex64> {
        self.modes
            .iter()
            .map(|m| match m {
                ElementMode::Reflective { phase_index } => Complex64::from_polar(
                    self.reflect_gain,
                    TAU * *phase_index as f64 / (1u64 << self.resolution_bits) as f64,
                ),
                ElementMode::Absorptive => Complex64::new(0.0, 0.0),
            })
            .collect()
    }

    /// Absorptive diagonal: the efficiency on harvesting elements, zero on
    /// reflective ones.
    pub fn absorptive_diagonal(&self) -> Vec<f64> {
        self.modes
            .iter()
            .map(|m| match m {
                ElementMode::Reflective { .. } => 0.0,
                ElementMode::Absorptive => self.absorb_efficiency,
            })
            .collect()
    }

    /// Switch diagonal as unit phasors (+1 or -1).
    pub fn switch_diagonal(&self) -> Vec<Complex64> {
        self.switch_flip
            .iter()
            .map(|f| if *f { Complex64::new(-1.0, 0.0) } else { Complex64::new(1.0, 0.0) })
            .collect()
    }

    pub fn switch_phases(&self) -> Vec<f64> {
        self.switch_flip.iter().map(|f| if *f { PI } else { 0.0 }).collect()
    }

    /// Replace the shared reflective amplitude (budget clamping).
    pub fn set_reflect_gain(&mut self, gain: f64) {
        self.reflect_gain = gain;
    }

    /// Demote every element to absorptive (budget shortfall fallback).
    pub fn revert_all_absorptive(&mut self) {
        for m in &mut self.modes {
            *m = ElementMode::Absorptive;
        }
    }
}

/// How the surface noise enters the harvested-power evaluation.
#[derive(Debug, Clone, Copy)]
pub enum NoiseMode {
    /// Add the expected noise power deterministically.
    Expectation,
    /// Sample one complex-Gaussian noise realization (seeded by the caller).
    MonteCarlo(u64),
}

/// Stored power harvested from the composite absorptive stream:
/// `P = eta1 * | sum_n switch_n * absorb_n * incident_n * sqrt(P_t) + n |^2`,
/// with the noise term added in expectation or sampled.
///
/// `incident` is the per-element field for the active precoder at unit
/// transmit power (`h_k^H w`).
pub fn harvested_power(
    switch: &[Complex64],
    absorptive: &[f64],
    incident: &[Complex64],
    transmit_power_w: f64,
    ris_noise_w: f64,
    eta_charge: f64,
    mode: NoiseMode,
) -> Result<f64, RisError> {
    if switch.len() != absorptive.len() || switch.len() != incident.len() {
        return Err(RisError::DimensionMismatch(format!(
            "{} switch vs {} absorptive vs {} incident entries",
            switch.len(),
            absorptive.len(),
            incident.len()
        )));
    }
    let mut s = Complex64::new(0.0, 0.0);
    for ((lam, a), inc) in switch.iter().zip(absorptive).zip(incident) {
        s += lam * a * inc;
    }
    s *= transmit_power_w.sqrt();
    let p = match mode {
        NoiseMode::Expectation => s.norm_sqr() + ris_noise_w,
        NoiseMode::MonteCarlo(seed) => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, (ris_noise_w / 2.0).sqrt()).unwrap();
            let n = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
            (s + n).norm_sqr()
        }
    };
    Ok(eta_charge * p)
}

/// Power left for the amplifying circuits after the fixed drains:
/// `eta2 * P_k - P_c - P_DC - f(D) * N_R`. May be negative.
pub fn available_power(p_harvested: f64, model: &PowerModel, d_bits: u32, n_r: usize) -> f64 {
    model.eta_discharge * p_harvested - model.circuit_drain(d_bits, n_r)
}

/// Self-sustainability requires a strictly positive surplus.
pub fn sustainability_check(p_available: f64) -> bool {
    p_available > 0.0
}

/// Largest amplification ratio the budget supports:
/// `rho = min(rho_max, sqrt(1 + P_a / (n_reflective * h_inc^2)))`, floored at
/// the passive ratio 1 when the budget is empty.
///
/// `h_inc` is the RMS per-element incident amplitude (sqrt-watts), so
/// `n_reflective * h_inc^2` is the total incident power on the reflective
/// set and `(rho^2 - 1)` times it is the amplifier drain.
pub fn feasible_amplification(
    p_available: f64,
    n_reflective: usize,
    h_inc: f64,
    rho_max: f64,
) -> Result<f64, RisError> {
    if n_reflective == 0 {
        return Err(RisError::NoReflectiveElements);
    }
    if p_available <= 0.0 {
        return Ok(1.0);
    }
    let denom = n_reflective as f64 * h_inc * h_inc;
    if denom <= 0.0 {
        return Ok(rho_max);
    }
    Ok((1.0 + p_available / denom).sqrt().min(rho_max))
}

/// Uniform random reflective subset of the requested size (used by the
/// element-splitting baseline and randomized tests).
pub fn random_reflective_subset<R: Rng + ?Sized>(n_r: usize, count: usize, rng: &mut R) -> Vec<bool> {
    let mut mask = vec![false; n_r];
    let count = count.min(n_r);
    // Partial Fisher-Yates over the index set.
    let mut indices: Vec<usize> = (0..n_r).collect();
    for i in 0..count {
        let j = rng.random_range(i..n_r);
        indices.swap(i, j);
        mask[indices[i]] = true;
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn phase_set_values() {
        assert_eq!(discrete_phase_set(1), vec![0.0, PI]);
        let s2 = discrete_phase_set(2);
        assert_eq!(s2.len(), 4);
        for (i, expect) in [0.0, PI / 2.0, PI, 3.0 * PI / 2.0].iter().enumerate() {
            assert!((s2[i] - expect).abs() < 1e-15);
        }
        for d in 1..=6u32 {
            let s = discrete_phase_set(d);
            assert_eq!(s.len(), 1 << d);
            for w in s.windows(2) {
                assert!((w[1] - w[0] - TAU / (1 << d) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quantize_on_grid_is_identity() {
        for d in 1..=4u32 {
            for phase in discrete_phase_set(d) {
                assert!((quantize_phase(phase, d) - phase).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quantize_ties_round_up() {
        // Exactly halfway between 0 and pi at D = 1 goes to pi.
        assert_eq!(quantize_phase(PI / 2.0, 1), PI);
        // Just past the tie still rounds up.
        assert_eq!(quantize_phase(PI / 2.0 + 1e-9, 1), PI);
        assert_eq!(quantize_phase(PI / 4.0, 2), PI / 2.0);
    }

    #[test]
    fn quantize_deviation_bounded() {
        let mut rng = ChaCha12Rng::seed_from_u64(100);
        for d in 1..=3u32 {
            let bound = PI / (1 << d) as f64;
            let mut worst: f64 = 0.0;
            for _ in 0..100_000 {
                let theta: f64 = rng.random_range(0.0..TAU);
                let q = quantize_phase(theta, d);
                let dev = (theta - q).rem_euclid(TAU).min((q - theta).rem_euclid(TAU));
                worst = worst.max(dev);
                assert!(dev <= bound + 1e-12);
            }
            // Dense random coverage approaches the bound...
            assert!(worst > bound - 1e-3);
            // ...and the exact boundary attains it.
            let q = quantize_phase(bound, d);
            let dev = (bound - q).rem_euclid(TAU).min((q - bound).rem_euclid(TAU));
            assert!((dev - bound).abs() < 1e-12);
        }
    }

    #[test]
    fn harvested_power_all_reflective_leaves_noise_floor() {
        let switch = vec![Complex64::new(1.0, 0.0); 4];
        let absorb = vec![0.0; 4];
        let incident = vec![Complex64::new(1e-4, 0.0); 4];
        let p = harvested_power(&switch, &absorb, &incident, 1.0, 1e-12, 0.9, NoiseMode::Expectation).unwrap();
        assert!((p - 0.9e-12).abs() < 1e-24);
    }

    #[test]
    fn harvested_power_single_element() {
        let p = harvested_power(
            &[Complex64::new(1.0, 0.0)],
            &[0.9],
            &[Complex64::new(1.0, 0.0)],
            2.0,
            1e-12,
            0.8,
            NoiseMode::Expectation,
        )
        .unwrap();
        // eta1 * ((rho_a)^2 * P_t + sigma_r^2)
        assert!((p - 0.8 * (0.81 * 2.0 + 1e-12)).abs() < 1e-12);
    }

    #[test]
    fn harvested_power_coherent_pair_quadruples() {
        // Two elements with opposite incident phases; the switch flips the
        // second so the pair adds coherently.
        let incident = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let flipped = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let absorb = vec![1.0, 1.0];
        let aligned = harvested_power(&flipped, &absorb, &incident, 1.0, 0.0, 1.0, NoiseMode::Expectation).unwrap();
        let single = harvested_power(
            &[Complex64::new(1.0, 0.0)],
            &[1.0],
            &[Complex64::new(1.0, 0.0)],
            1.0,
            0.0,
            1.0,
            NoiseMode::Expectation,
        )
        .unwrap();
        assert!((aligned - 4.0 * single).abs() < 1e-12);
        // Independent phasor-addition check.
        let brute = {
            let s = 1.0 * 1.0 + (-1.0) * (-1.0);
            (s as f64).powi(2)
        };
        assert!((aligned - brute).abs() < 1e-12);
    }

    #[test]
    fn harvested_power_monte_carlo_seeded() {
        let switch = vec![Complex64::new(1.0, 0.0)];
        let absorb = vec![0.9];
        let incident = vec![Complex64::new(1e-5, 2e-5)];
        let a = harvested_power(&switch, &absorb, &incident, 1.0, 1e-12, 0.9, NoiseMode::MonteCarlo(7)).unwrap();
        let b = harvested_power(&switch, &absorb, &incident, 1.0, 1e-12, 0.9, NoiseMode::MonteCarlo(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn available_power_cases() {
        let mut model = PowerModel::lossless_defaults();
        assert!((available_power(1e-3, &model, 1, 100) - 0.9e-3).abs() < 1e-18);
        model.p_controller_w = 0.5e-3;
        model.p_dc_w = 0.25e-3;
        model.pin_w_per_bit = 1e-6;
        let p = available_power(0.0, &model, 2, 100);
        assert!((p + (0.5e-3 + 0.25e-3 + 2e-6 * 100.0)).abs() < 1e-18);
    }

    #[test]
    fn budget_conservation() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let mut model = PowerModel::lossless_defaults();
            model.p_controller_w = rng.random_range(0.0..1e-3);
            model.p_dc_w = rng.random_range(0.0..1e-3);
            model.pin_w_per_bit = rng.random_range(0.0..1e-5);
            let d = rng.random_range(1..5u32);
            let n_r = rng.random_range(1..5000usize);
            let p_k: f64 = rng.random_range(0.0..1.0);
            let avail = available_power(p_k, &model, d, n_r);
            let drain = model.circuit_drain(d, n_r);
            let lhs = avail + drain;
            let rhs = model.eta_discharge * p_k;
            // Equality up to rounding at the scale of the largest term.
            let scale = avail.abs().max(drain).max(rhs.abs()).max(1e-300);
            assert!((lhs - rhs).abs() <= 8.0 * f64::EPSILON * scale);
        }
    }

    #[test]
    fn sustainability_is_strict() {
        assert!(sustainability_check(1e-6));
        assert!(!sustainability_check(0.0));
        assert!(!sustainability_check(-1.0));
    }

    #[test]
    fn feasible_amplification_cases() {
        assert_eq!(feasible_amplification(0.0, 10, 1e-3, 10.0).unwrap(), 1.0);
        assert_eq!(feasible_amplification(1e9, 10, 1e-3, 10.0).unwrap(), 10.0);
        // P_a = 3 * n * h^2 inverts rho^2 - 1 = 3.
        let n = 7;
        let h = 2e-3;
        let rho = feasible_amplification(3.0 * n as f64 * h * h, n, h, 10.0).unwrap();
        assert!((rho - 2.0).abs() < 1e-12);
        assert_eq!(
            feasible_amplification(1.0, 0, 1e-3, 10.0).unwrap_err(),
            RisError::NoReflectiveElements
        );
    }

    #[test]
    fn feasible_amplification_monotone_and_capped() {
        let mut prev = 0.0;
        for k in 0..100 {
            let p = k as f64 * 1e-4;
            let rho = feasible_amplification(p, 16, 1e-3, 8.0).unwrap();
            assert!(rho >= prev);
            assert!(rho <= 8.0);
            prev = rho;
        }
    }

    #[test]
    fn configuration_invariants_enforced() {
        let rho = 10.0;
        let rho_a = 0.9;
        let ok = RisConfiguration::from_diagonals(
            &[Complex64::from_polar(rho, PI), Complex64::new(0.0, 0.0)],
            &[0.0, rho_a],
            &[0.0, PI],
            1,
            rho,
            rho_a,
        );
        assert!(ok.is_ok());
        let cfg = ok.unwrap();
        assert_eq!(cfg.n_reflective(), 1);
        assert_eq!(cfg.reflective_phase(0), Some(PI));
        assert_eq!(cfg.reflective_phase(1), None);

        // Wrong amplitude.
        assert!(matches!(
            RisConfiguration::from_diagonals(
                &[Complex64::from_polar(rho * 0.5, PI)],
                &[0.0],
                &[0.0],
                1,
                rho,
                rho_a,
            )
            .unwrap_err(),
            RisError::AmplitudeMismatch { .. }
        ));

        // Off-grid phase at D = 1.
        assert!(matches!(
            RisConfiguration::from_diagonals(
                &[Complex64::from_polar(rho, PI / 3.0)],
                &[0.0],
                &[0.0],
                1,
                rho,
                rho_a,
            )
            .unwrap_err(),
            RisError::PhaseOffGrid { .. }
        ));

        // Overlapping supports.
        assert!(matches!(
            RisConfiguration::from_diagonals(
                &[Complex64::from_polar(rho, 0.0)],
                &[rho_a],
                &[0.0],
                1,
                rho,
                rho_a,
            )
            .unwrap_err(),
            RisError::OverlappingSupport { .. }
        ));

        // Bad absorptive value.
        assert!(matches!(
            RisConfiguration::from_diagonals(
                &[Complex64::new(0.0, 0.0)],
                &[0.5],
                &[0.0],
                1,
                rho,
                rho_a,
            )
            .unwrap_err(),
            RisError::BadAbsorptive { .. }
        ));

        // Switch phase outside {0, pi}.
        assert!(matches!(
            RisConfiguration::from_diagonals(
                &[Complex64::new(0.0, 0.0)],
                &[rho_a],
                &[PI / 2.0],
                1,
                rho,
                rho_a,
            )
            .unwrap_err(),
            RisError::BadSwitchPhase { .. }
        ));
    }

    #[test]
    fn diagonals_round_trip() {
        let modes = vec![
            ElementMode::Reflective { phase_index: 3 },
            ElementMode::Absorptive,
            ElementMode::Reflective { phase_index: 0 },
        ];
        let cfg = RisConfiguration::new(modes, vec![false, true, false], 2, 10.0, 0.9).unwrap();
        let r = cfg.reflective_diagonal();
        let a = cfg.absorptive_diagonal();
        let s = cfg.switch_phases();
        let back = RisConfiguration::from_diagonals(&r, &a, &s, 2, 10.0, 0.9).unwrap();
        assert_eq!(back.modes(), cfg.modes());
    }

    #[test]
    fn random_subset_has_requested_size() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let mask = random_reflective_subset(100, 37, &mut rng);
        assert_eq!(mask.iter().filter(|x| **x).count(), 37);
        let again = random_reflective_subset(100, 37, &mut ChaCha12Rng::seed_from_u64(17));
        assert_eq!(mask, again);
    }
}
