//! Scenario description: geometry, powers, patterns, and reference defaults.
//!
//! The default scenario is the reference evaluation setup: a 30 GHz carrier
//! (wavelength 1 cm), a two-antenna transmitter at (0, 0, 15) with
//! half-wavelength spacing, a single-antenna receiver at (5, 5, 1.5), and a
//! 50x50 half-wavelength-pitch reflecting surface in the z = 0 plane centered
//! at the origin. Transmit power 30 dBm, noise power -90 dBm, conversion and
//! absorption efficiencies 0.9, amplification cap 10, transmitter gain
//! 15 dBi, receiver gain 0 dBi.

use crate::channel::AntennaPattern;
use crate::math::Point3;
use crate::ris::PowerModel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
}

fn invalid(field: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field, message: message.into() }
}

/// One rectangular reflecting surface: a `rows x cols` element grid with
/// pitch `spacing`, centered at `center`, lying in the plane with unit
/// normal `normal`. `axis_u` picks the in-plane row direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RisPanel {
    pub center: Point3,
    pub normal: Point3,
    pub axis_u: Point3,
    pub rows: usize,
    pub cols: usize,
    /// Element pitch in meters.
    pub spacing: f64,
}

impl RisPanel {
    pub fn n_elements(&self) -> usize {
        self.rows * self.cols
    }

    pub fn axis_v(&self) -> Point3 {
        self.normal
            .normalized()
            .unwrap_or(Point3::new(0.0, 0.0, 1.0))
            .cross(self.axis_u.normalized().unwrap_or(Point3::new(1.0, 0.0, 0.0)))
    }

    /// Element centers, row-major. Element (i, j) sits at
    /// `center + (i - (rows-1)/2)*spacing*u + (j - (cols-1)/2)*spacing*v`.
    pub fn element_positions(&self) -> Vec<Point3> {
        let u = self.axis_u.normalized().unwrap_or(Point3::new(1.0, 0.0, 0.0));
        let v = self.axis_v();
        let mut out = Vec::with_capacity(self.rows * self.cols);
        let ci = (self.rows as f64 - 1.0) / 2.0;
        let cj = (self.cols as f64 - 1.0) / 2.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let p = self.center
                    + u * ((i as f64 - ci) * self.spacing)
                    + v * ((j as f64 - cj) * self.spacing);
                out.push(p);
            }
        }
        out
    }

    /// Diagonal dimension of the aperture, counting a full pitch per element.
    pub fn diagonal_length(&self) -> f64 {
        let w = self.rows as f64 * self.spacing;
        let h = self.cols as f64 * self.spacing;
        w.hypot(h)
    }
}

/// Complete physical description of one simulation scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    pub bs_antennas: Vec<Point3>,
    pub bs_boresight: Point3,
    pub bs_pattern: AntennaPattern,
    pub ue_position: Point3,
    pub ue_boresight: Point3,
    pub ue_pattern: AntennaPattern,
    pub ris: Vec<RisPanel>,
    pub ris_pattern: AntennaPattern,
    /// Transmit power in watts.
    pub transmit_power_w: f64,
    /// Receiver noise power in watts.
    pub ue_noise_w: f64,
    /// Per-element surface noise power in watts.
    pub ris_noise_w: f64,
    /// Localization noise standard deviation per axis, meters.
    pub location_noise_std_m: f64,
    /// Relative channel-estimation error standard deviation.
    pub ce_error_std: f64,
    /// Rician factor for the diffuse component of the direct link, in dB;
    /// `None` keeps the link line-of-sight only.
    pub rician_factor_db: Option<f64>,
    /// Phase shifter resolution in bits.
    pub phase_resolution_bits: u32,
    pub power_model: PowerModel,
    /// Optional override for the reflect-region half angle chi (radians).
    /// Defaults to `pi / 2^(D+1)` when unset.
    pub chi_override: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::paper_defaults()
    }
}

impl ScenarioConfig {
    /// The reference evaluation setup (see module docs).
    pub fn paper_defaults() -> Self {
        let lambda = 0.01;
        ScenarioConfig {
            wavelength: lambda,
            bs_antennas: vec![
                Point3::new(-lambda / 4.0, 0.0, 15.0),
                Point3::new(lambda / 4.0, 0.0, 15.0),
            ],
            bs_boresight: Point3::new(0.0, 0.0, -1.0),
            bs_pattern: AntennaPattern { boresight_gain_dbi: 15.0, exponent_q: 0.0, omni: false },
            ue_position: Point3::new(5.0, 5.0, 1.5),
            ue_boresight: Point3::new(0.0, 0.0, 1.0),
            ue_pattern: AntennaPattern { boresight_gain_dbi: 0.0, exponent_q: 0.0, omni: true },
            ris: vec![RisPanel {
                center: Point3::ZERO,
                normal: Point3::new(0.0, 0.0, 1.0),
                axis_u: Point3::new(1.0, 0.0, 0.0),
                rows: 50,
                cols: 50,
                spacing: lambda / 2.0,
            }],
            ris_pattern: AntennaPattern { boresight_gain_dbi: 0.0, exponent_q: 0.0, omni: false },
            transmit_power_w: 1.0, // 30 dBm
            ue_noise_w: 1e-12,     // -90 dBm
            ris_noise_w: 1e-12,    // -90 dBm
            location_noise_std_m: 0.0,
            ce_error_std: 0.0,
            rician_factor_db: None,
            phase_resolution_bits: 1,
            power_model: PowerModel::lossless_defaults(),
            chi_override: None,
        }
    }

    /// Minimal collinear one-antenna / one-element scenario used by tests.
    pub fn single_link_test() -> Self {
        let mut cfg = ScenarioConfig::paper_defaults();
        cfg.bs_antennas = vec![Point3::new(0.0, 0.0, 2.0)];
        cfg.bs_pattern = AntennaPattern { boresight_gain_dbi: 0.0, exponent_q: 0.0, omni: false };
        cfg.ue_position = Point3::new(0.0, 0.0, 1.0);
        cfg.ris = vec![RisPanel {
            center: Point3::ZERO,
            normal: Point3::new(0.0, 0.0, 1.0),
            axis_u: Point3::new(1.0, 0.0, 0.0),
            rows: 1,
            cols: 1,
            spacing: 0.005,
        }];
        cfg
    }

    pub fn n_t(&self) -> usize {
        self.bs_antennas.len()
    }

    pub fn n_r(&self) -> usize {
        self.ris.first().map(|p| p.n_elements()).unwrap_or(0)
    }

    pub fn n_ris(&self) -> usize {
        self.ris.len()
    }

    /// Validate the configuration. Returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, ScenarioError> {
        let mut warnings = Vec::new();
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(invalid("wavelength", format!("must be positive, got {}", self.wavelength)));
        }
        if self.bs_antennas.is_empty() {
            return Err(invalid("bs_antennas", "at least one transmit antenna required"));
        }
        if self.ris.is_empty() {
            return Err(invalid("ris", "at least one surface required"));
        }
        for (k, panel) in self.ris.iter().enumerate() {
            if panel.rows == 0 || panel.cols == 0 {
                return Err(invalid("ris", format!("panel {k} has no elements")));
            }
            if panel.spacing <= 0.0 {
                return Err(invalid("ris", format!("panel {k} spacing must be positive")));
            }
            if panel.normal.norm() < 1e-12 {
                return Err(invalid("ris", format!("panel {k} normal is degenerate")));
            }
            if panel.axis_u.norm() < 1e-12 {
                return Err(invalid("ris", format!("panel {k} axis_u is degenerate")));
            }
            if panel.axis_u.normalized().unwrap().dot(panel.normal.normalized().unwrap()).abs() > 1e-9 {
                return Err(invalid("ris", format!("panel {k} axis_u must lie in the panel plane")));
            }
            let lo = self.wavelength / 10.0;
            let hi = self.wavelength / 2.0;
            if panel.spacing < lo - 1e-15 || panel.spacing > hi + 1e-15 {
                warnings.push(format!(
                    "panel {k}: element spacing {} m outside the typical range [{lo}, {hi}] m",
                    panel.spacing
                ));
            }
            // All generated element positions are coplanar; verify to guard
            // against hand-edited axis fields.
            let n = panel.normal.normalized().unwrap();
            for p in panel.element_positions() {
                if (p - panel.center).dot(n).abs() > 1e-9 {
                    return Err(invalid("ris", format!("panel {k} elements are not coplanar")));
                }
            }
        }
        for (name, v) in [
            ("transmit_power_w", self.transmit_power_w),
            ("ue_noise_w", self.ue_noise_w),
            ("ris_noise_w", self.ris_noise_w),
            ("location_noise_std_m", self.location_noise_std_m),
            ("ce_error_std", self.ce_error_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid("powers", format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.phase_resolution_bits == 0 {
            return Err(invalid("phase_resolution_bits", "must be at least 1"));
        }
        if self.phase_resolution_bits > 16 {
            return Err(invalid("phase_resolution_bits", "resolutions above 16 bits are not supported"));
        }
        self.power_model.validate().map_err(|e| invalid("power_model", e.to_string()))?;
        if let Some(chi) = self.chi_override {
            let max = std::f64::consts::PI / 2f64.powi(self.phase_resolution_bits as i32);
            if !(0.0..=max + 1e-12).contains(&chi) {
                return Err(invalid("chi_override", format!("chi must lie in [0, {max}], got {chi}")));
            }
        }
        if !self.ue_position.is_finite() {
            return Err(invalid("ue_position", "components must be finite"));
        }
        Ok(warnings)
    }
}

/// Load a scenario from a JSON file. An empty (or whitespace-only) file
/// yields the full default scenario; fields omitted from the JSON document
/// take their default values.
pub fn load_scenario(path: &std::path::Path) -> Result<(ScenarioConfig, Vec<String>), ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let cfg: ScenarioConfig = if text.trim().is_empty() {
        ScenarioConfig::paper_defaults()
    } else {
        serde_json::from_str(&text)?
    };
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}
