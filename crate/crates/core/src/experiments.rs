//! Config-driven sweeps: seeded, reproducible parameter scans over the
//! benchmark strategies, figure presets, and CSV emission.
//!
//! Every (point, trial, strategy) task derives its own random stream from a
//! master seed (see [`crate::rng`]), so results are bit-identical across
//! runs and across serial/parallel execution.

use crate::beamforming::{run_algorithm1, BeamformingOptions};
use crate::channel::build_channels;
use crate::metrics::{chi_for_proportion, optimal_p, sustainability_boundary, AsymptoticParams};
use crate::ris::ElementTech;
use crate::rng::{rng_from_seed, substream_seed};
use crate::scenario::ScenarioConfig;
use crate::strategies::{evaluate_strategy, optimize_factor, StrategyError, StrategyId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentsError {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("sweep has no values")]
    EmptyValues,
    #[error("sweep has no strategies")]
    EmptyStrategies,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Parameter axis of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    TransmitPowerDbm,
    NR,
    DBits,
    LocationErrorM,
    CeError,
    PFraction,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::TransmitPowerDbm => "transmit_power_dBm",
            SweepAxis::NR => "N_R",
            SweepAxis::DBits => "D",
            SweepAxis::LocationErrorM => "location_error_m",
            SweepAxis::CeError => "ce_error",
            SweepAxis::PFraction => "p_fraction",
        }
    }
}

/// Declarative sweep description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepAxis,
    pub values: Vec<f64>,
    pub strategies: Vec<StrategyId>,
    pub trials: u32,
    pub master_seed: u64,
    /// Grid step for the per-point factor optimization.
    #[serde(default = "default_factor_step")]
    pub factor_step: f64,
}

fn default_factor_step() -> f64 {
    0.01
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentsError> {
        if self.values.is_empty() {
            return Err(ExperimentsError::EmptyValues);
        }
        if self.strategies.is_empty() {
            return Err(ExperimentsError::EmptyStrategies);
        }
        if self.trials == 0 {
            return Err(ExperimentsError::NoTrials);
        }
        Ok(())
    }
}

/// One aggregated table row.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub parameter_value: f64,
    pub strategy: StrategyId,
    pub mean_se: f64,
    pub std_se: f64,
    pub mean_ee: f64,
    pub harvested_w: f64,
    pub sustain_rate: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub parameter: SweepAxis,
    pub rows: Vec<SweepRow>,
}

/// Apply one axis value to a scenario.
pub fn apply_axis(cfg: &ScenarioConfig, axis: SweepAxis, value: f64) -> ScenarioConfig {
    let mut out = cfg.clone();
    match axis {
        SweepAxis::TransmitPowerDbm => {
            out.transmit_power_w = 10f64.powf(value / 10.0) / 1000.0;
        }
        SweepAxis::NR => {
            // Near-square grid with the requested element count.
            let side = (value.max(1.0)).sqrt().floor().max(1.0) as usize;
            let rows = side;
            let cols = ((value / side as f64).round() as usize).max(1);
            for panel in &mut out.ris {
                panel.rows = rows;
                panel.cols = cols;
            }
        }
        SweepAxis::DBits => {
            out.phase_resolution_bits = value.round().max(1.0) as u32;
        }
        SweepAxis::LocationErrorM => {
            out.location_noise_std_m = value.max(0.0);
        }
        SweepAxis::CeError => {
            out.ce_error_std = value.max(0.0);
        }
        SweepAxis::PFraction => {
            out.chi_override = Some(chi_for_proportion(
                value.clamp(0.0, 1.0),
                cfg.phase_resolution_bits,
            ));
        }
    }
    out
}

/// Strategy-index used in the substream derivation (stable across versions).
fn strategy_stream_index(id: StrategyId) -> u64 {
    StrategyId::ALL.iter().position(|x| *x == id).unwrap() as u64
}

/// Run the sweep. `parallel` switches between a serial and a rayon-driven
/// evaluation; the output is bit-identical either way.
pub fn run_sweep(
    spec: &SweepSpec,
    base_cfg: &ScenarioConfig,
    parallel: bool,
) -> Result<SweepResult, ExperimentsError> {
    spec.validate()?;
    let tasks: Vec<(usize, f64, StrategyId)> = spec
        .values
        .iter()
        .enumerate()
        .flat_map(|(pi, v)| spec.strategies.iter().map(move |s| (pi, *v, *s)))
        .collect();

    let eval_task = |(point_idx, value, strategy): &(usize, f64, StrategyId)| -> Result<SweepRow, ExperimentsError> {
        let cfg = apply_axis(base_cfg, spec.parameter, *value);
        let stream = strategy_stream_index(*strategy);
        // Reference channels for the factor search (trial stream u32::MAX).
        let search_seed = substream_seed(spec.master_seed, *point_idx as u64, u32::MAX as u64, stream);
        let search_channels = build_channels(&cfg, &mut rng_from_seed(search_seed)).map_err(StrategyError::from)?;
        let factor = if strategy.has_factor() {
            optimize_factor(&cfg, &search_channels, *strategy, spec.factor_step, search_seed)?.factor
        } else {
            None
        };
        let mut se_acc = Vec::with_capacity(spec.trials as usize);
        let mut ee_acc = 0.0;
        let mut harv_acc = 0.0;
        let mut sustain_acc = 0.0;
        for trial in 0..spec.trials {
            let seed = substream_seed(spec.master_seed, *point_idx as u64, trial as u64, stream);
            let mut rng = rng_from_seed(seed);
            let channels = build_channels(&cfg, &mut rng).map_err(StrategyError::from)?;
            let out = evaluate_strategy(&cfg, &channels, *strategy, factor, &mut rng)?;
            se_acc.push(out.se);
            ee_acc += out.ee;
            harv_acc += out.harvested_w;
            sustain_acc += if out.sustainable { 1.0 } else { 0.0 };
        }
        let n = spec.trials as f64;
        let mean = se_acc.iter().sum::<f64>() / n;
        let var = se_acc.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Ok(SweepRow {
            parameter_value: *value,
            strategy: *strategy,
            mean_se: mean,
            std_se: var.sqrt(),
            mean_ee: ee_acc / n,
            harvested_w: harv_acc / n,
            sustain_rate: sustain_acc / n,
        })
    };

    let rows: Result<Vec<SweepRow>, ExperimentsError> = if parallel {
        tasks.par_iter().map(eval_task).collect()
    } else {
        tasks.iter().map(eval_task).collect()
    };
    Ok(SweepResult { parameter: spec.parameter, rows: rows? })
}

/// Twelve-significant-digit decimal formatting used by every CSV emitter.
fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// Write a sweep result as CSV: UTF-8, header row, fixed column order,
/// decimal points, line-feed endings.
pub fn emit_csv<W: Write>(result: &SweepResult, mut out: W) -> Result<(), ExperimentsError> {
    writeln!(out, "parameter,strategy,mean_se,std_se,mean_ee,harvested_w,sustain_rate")?;
    for row in &result.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_num(row.parameter_value),
            row.strategy,
            fmt_num(row.mean_se),
            fmt_num(row.std_se),
            fmt_num(row.mean_ee),
            fmt_num(row.harvested_w),
            fmt_num(row.sustain_rate),
        )?;
    }
    Ok(())
}

/// Per-element configuration map (the surface-pattern figures): local
/// in-plane coordinates, element mode, and the reflective phase.
pub fn emit_element_map<W: Write>(
    cfg: &ScenarioConfig,
    seed: u64,
    mut out: W,
) -> Result<(), ExperimentsError> {
    let mut rng = rng_from_seed(seed);
    let channels = build_channels(cfg, &mut rng).map_err(StrategyError::from)?;
    let state = crate::strategies::estimate_state(cfg, &channels, &mut rng);
    let (_, outputs) = run_algorithm1(
        cfg,
        &channels,
        &state.f_hat,
        state.u_hat,
        &BeamformingOptions {
            chi: cfg.chi_override,
            ..Default::default()
        },
    )
    .map_err(StrategyError::from)?;
    writeln!(out, "x,z,mode,phase")?;
    for (panel, output) in cfg.ris.iter().zip(&outputs) {
        let u = panel.axis_u.normalized().unwrap_or(crate::math::Point3::new(1.0, 0.0, 0.0));
        let v = panel.axis_v();
        for (i, pos) in panel.element_positions().iter().enumerate() {
            let rel = *pos - panel.center;
            let x = rel.dot(u);
            let z = rel.dot(v);
            match output.config.reflective_phase(i) {
                Some(phase) => {
                    writeln!(out, "{},{},reflective,{}", fmt_num(x), fmt_num(z), fmt_num(phase))?
                }
                None => writeln!(out, "{},{},absorptive,", fmt_num(x), fmt_num(z))?,
            }
        }
    }
    Ok(())
}

/// Reflective-proportion analysis across surface sizes and technologies.
pub fn emit_proportion_analysis<W: Write>(
    cfg: &ScenarioConfig,
    n_r_values: &[f64],
    techs: &[ElementTech],
    d_bits_values: &[u32],
    mut out: W,
) -> Result<(), ExperimentsError> {
    writeln!(out, "n_r,tech,d_bits,p_opt,p_bound,optimum_sustainable")?;
    // Uniform per-element incident amplitude from the scenario geometry at
    // the surface center.
    let h = reference_element_amplitude(cfg);
    for &n_r in n_r_values {
        for tech in techs {
            for &d_bits in d_bits_values {
                let model = crate::ris::PowerModel::with_circuit_draw(*tech);
                let params = AsymptoticParams {
                    absorb_efficiency: cfg.power_model.absorb_efficiency,
                    eta_charge: cfg.power_model.eta_charge,
                    eta_discharge: cfg.power_model.eta_discharge,
                    n_r,
                    h,
                    p_controller_w: model.p_controller_w,
                    p_dc_w: model.p_dc_w,
                    f_d_w: model.f_d(d_bits),
                    rho: cfg.power_model.rho_max,
                };
                let b = sustainability_boundary(&params);
                let p_opt = optimal_p(&params);
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    fmt_num(n_r),
                    match tech {
                        ElementTech::Pin => "pin",
                        ElementTech::Varactor => "varactor",
                    },
                    d_bits,
                    p_opt.map(fmt_num).unwrap_or_default(),
                    b.p_bound.map(fmt_num).unwrap_or_default(),
                    b.optimum_sustainable,
                )?;
            }
        }
    }
    Ok(())
}

/// Per-element incident amplitude at the first surface's center under the
/// scenario's transmit power, sqrt-watts.
pub fn reference_element_amplitude(cfg: &ScenarioConfig) -> f64 {
    let panel = &cfg.ris[0];
    let t = cfg.bs_antennas[0];
    let g_t = cfg.bs_pattern.gain_towards(t, cfg.bs_boresight, panel.center);
    let g_r = cfg.ris_pattern.gain_towards(panel.center, panel.normal, t);
    let d = t.distance(panel.center);
    (g_t * g_r).sqrt() * cfg.wavelength / (4.0 * std::f64::consts::PI * d)
        * cfg.transmit_power_w.sqrt()
}

/// What a named preset produces.
#[derive(Debug, Clone)]
pub enum PresetOutput {
    Sweep(SweepSpec),
    /// Per-element configuration map at the given resolution (the surface
    /// uses a single transmit antenna so the bands follow one zone family).
    ElementMap { d_bits: u32 },
    /// Reflective-proportion analysis over surface sizes.
    ProportionAnalysis { n_r_values: Vec<f64>, techs: Vec<ElementTech>, d_bits_values: Vec<u32> },
}

/// Figure presets. Axes and strategy sets follow the published experiment
/// shapes; trials stay modest so a full preset runs in seconds.
pub fn preset(name: &str) -> Result<PresetOutput, ExperimentsError> {
    let power_axis: Vec<f64> = vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];
    let out = match name {
        "fig4" => PresetOutput::ElementMap { d_bits: 1 },
        "fig4b" => PresetOutput::ElementMap { d_bits: 2 },
        "fig5" => PresetOutput::Sweep(SweepSpec {
            parameter: SweepAxis::TransmitPowerDbm,
            values: power_axis,
            strategies: vec![
                StrategyId::Ew,
                StrategyId::PowerSplitting,
                StrategyId::TimeSwitching,
                StrategyId::ElementSplitting,
            ],
            trials: 10,
            master_seed: 1,
            factor_step: 0.01,
        }),
        "fig6" => PresetOutput::Sweep(SweepSpec {
            parameter: SweepAxis::NR,
            values: vec![400.0, 900.0, 1600.0, 2500.0, 3600.0],
            strategies: vec![
                StrategyId::Ew,
                StrategyId::PowerSplitting,
                StrategyId::TimeSwitching,
                StrategyId::ElementSplitting,
            ],
            trials: 10,
            master_seed: 1,
            factor_step: 0.01,
        }),
        "fig7" => PresetOutput::Sweep(SweepSpec {
            parameter: SweepAxis::DBits,
            values: vec![1.0, 2.0, 3.0, 4.0],
            strategies: vec![
                StrategyId::Ew,
                StrategyId::PowerSplitting,
                StrategyId::TimeSwitching,
                StrategyId::ElementSplitting,
                StrategyId::EwContinuous,
            ],
            trials: 10,
            master_seed: 1,
            factor_step: 0.01,
        }),
        "fig9" => PresetOutput::Sweep(SweepSpec {
            parameter: SweepAxis::TransmitPowerDbm,
            values: power_axis,
            strategies: vec![
                StrategyId::Ew,
                StrategyId::PowerSplitting,
                StrategyId::TimeSwitching,
                StrategyId::ElementSplitting,
                StrategyId::NoEhExternal,
            ],
            trials: 10,
            master_seed: 1,
            factor_step: 0.01,
        }),
        "fig10" => PresetOutput::ProportionAnalysis {
            n_r_values: vec![1e2, 3e2, 1e3, 3e3, 1e4, 3e4, 1e5, 3e5, 1e6],
            techs: vec![ElementTech::Pin, ElementTech::Varactor],
            d_bits_values: vec![1, 2, 3],
        },
        "fig11" => PresetOutput::Sweep(SweepSpec {
            parameter: SweepAxis::LocationErrorM,
            values: vec![0.0, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8],
            strategies: vec![StrategyId::Ew, StrategyId::RandomPhase],
            trials: 30,
            master_seed: 1,
            factor_step: 0.01,
        }),
        "fig12" => PresetOutput::Sweep(SweepSpec {
            parameter: SweepAxis::TransmitPowerDbm,
            values: power_axis,
            strategies: vec![
                StrategyId::Ew,
                StrategyId::CsiAlternating,
                StrategyId::CsiAlternatingContinuous,
            ],
            trials: 5,
            master_seed: 1,
            factor_step: 0.01,
        }),
        "fig13" => PresetOutput::Sweep(SweepSpec {
            parameter: SweepAxis::CeError,
            values: vec![0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6],
            strategies: vec![StrategyId::Ew, StrategyId::RandomPhase],
            trials: 30,
            master_seed: 1,
            factor_step: 0.01,
        }),
        other => return Err(ExperimentsError::UnknownPreset(other.to_string())),
    };
    Ok(out)
}

/// Scenario matching a preset: the element-map presets use one transmit
/// antenna so the emitted bands follow a single zone family.
pub fn preset_scenario(name: &str, base: &ScenarioConfig) -> ScenarioConfig {
    let mut cfg = base.clone();
    match name {
        "fig4" => {
            cfg.phase_resolution_bits = 1;
            cfg.bs_antennas = vec![crate::math::Point3::new(0.0, 0.0, 15.0)];
        }
        "fig4b" => {
            cfg.phase_resolution_bits = 2;
            cfg.bs_antennas = vec![crate::math::Point3::new(0.0, 0.0, 15.0)];
        }
        "fig12" => {
            cfg.phase_resolution_bits = 1;
        }
        _ => {}
    }
    cfg
}
