//! Command-line front end: scenario-driven sweeps, figure presets,
//! reflective-proportion analysis, and a localization demo.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ewris_core::experiments::{
    emit_csv, emit_element_map, emit_proportion_analysis, preset, preset_scenario, run_sweep,
    PresetOutput, SweepSpec,
};
use ewris_core::localization::{estimate_location, search_grid};
use ewris_core::ris::ElementTech;
use ewris_core::scenario::{load_scenario, ScenarioConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ewris", about = "Element-wise reconfigurable-surface link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a preset or a sweep file and write a CSV table.
    Simulate(SimulateArgs),
    /// Closed-form analysis outputs.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCommand,
    },
    /// Grid-search localization demo on the configured scenario.
    Locate(LocateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON (an empty file selects the built-in defaults).
    #[arg(long)]
    scenario: PathBuf,
    /// Figure preset name (fig4, fig4b, fig5, fig6, fig7, fig9-fig13).
    #[arg(long)]
    preset: Option<String>,
    /// Sweep specification JSON (alternative to --preset).
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Master seed for the run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per sweep point (overrides the preset/spec value).
    #[arg(long)]
    trials: Option<u32>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Evaluate sweep points serially instead of in parallel.
    #[arg(long)]
    serial: bool,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Optimal reflective proportion and sustainability boundary.
    Popt(PoptArgs),
}

#[derive(Args)]
struct PoptArgs {
    /// Element counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    nr: Vec<f64>,
    /// Element technology.
    #[arg(long, value_parser = parse_tech, default_value = "pin")]
    tech: ElementTech,
    /// Phase resolutions to tabulate, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    d: Vec<u32>,
    /// Optional output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LocateArgs {
    /// Scenario JSON; defaults apply when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Half-extent of the search grid around the true position, meters.
    #[arg(long, default_value_t = 0.1)]
    grid_extent: f64,
    /// Grid step, meters.
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    /// Seed for the channel realization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_tech(s: &str) -> Result<ElementTech, String> {
    match s {
        "pin" => Ok(ElementTech::Pin),
        "varactor" => Ok(ElementTech::Varactor),
        other => Err(format!("unknown technology `{other}` (expected pin|varactor)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Analyze { what: AnalyzeCommand::Popt(args) } => analyze_popt(args),
        Command::Locate(args) => locate(args),
    }
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let (cfg, warnings) = load_scenario(&args.scenario)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let output = match (&args.preset, &args.sweep) {
        (Some(name), None) => {
            let cfg = preset_scenario(name, &cfg);
            match preset(name)? {
                PresetOutput::Sweep(mut spec) => {
                    spec.master_seed = args.seed;
                    if let Some(t) = args.trials {
                        spec.trials = t;
                    }
                    let result = run_sweep(&spec, &cfg, !args.serial)?;
                    let mut buf = Vec::new();
                    emit_csv(&result, &mut buf)?;
                    buf
                }
                PresetOutput::ElementMap { d_bits } => {
                    let mut cfg = cfg;
                    cfg.phase_resolution_bits = d_bits;
                    let mut buf = Vec::new();
                    emit_element_map(&cfg, args.seed, &mut buf)?;
                    buf
                }
                PresetOutput::ProportionAnalysis { n_r_values, techs, d_bits_values } => {
                    let mut buf = Vec::new();
                    emit_proportion_analysis(&cfg, &n_r_values, &techs, &d_bits_values, &mut buf)?;
                    buf
                }
            }
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading sweep {}", path.display()))?;
            let mut spec: SweepSpec = serde_json::from_str(&text).context("parsing sweep spec")?;
            spec.master_seed = args.seed;
            if let Some(t) = args.trials {
                spec.trials = t;
            }
            let result = run_sweep(&spec, &cfg, !args.serial)?;
            let mut buf = Vec::new();
            emit_csv(&result, &mut buf)?;
            buf
        }
        (Some(_), Some(_)) => bail!("--preset and --sweep are mutually exclusive"),
        (None, None) => bail!("one of --preset or --sweep is required"),
    };
    std::fs::write(&args.out, output)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn analyze_popt(args: PoptArgs) -> anyhow::Result<()> {
    let cfg = ScenarioConfig::paper_defaults();
    let mut buf = Vec::new();
    emit_proportion_analysis(&cfg, &args.nr, &[args.tech], &args.d, &mut buf)?;
    match args.out {
        Some(path) => std::fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(())
}

fn locate(args: LocateArgs) -> anyhow::Result<()> {
    let cfg = match args.scenario {
        Some(path) => {
            let (cfg, warnings) =
                load_scenario(&path).with_context(|| format!("loading scenario {}", path.display()))?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            cfg
        }
        None => ScenarioConfig::paper_defaults(),
    };
    if args.grid_step <= 0.0 || args.grid_extent <= 0.0 {
        bail!("grid extent and step must be positive");
    }
    let mut rng = ewris_core::rng::rng_from_seed(args.seed);
    let channels = ewris_core::channel::build_channels(&cfg, &mut rng)?;
    let grid = search_grid(cfg.ue_position, args.grid_extent, args.grid_step);
    let elements: Vec<Vec<ewris_core::Point3>> =
        cfg.ris.iter().map(|p| p.element_positions()).collect();
    let estimate = estimate_location(
        &elements,
        &channels.ris_ue,
        cfg.wavelength,
        cfg.power_model.absorb_efficiency,
        &grid,
    )
    .context("empty search grid")?;
    println!(
        "true position: ({:.4}, {:.4}, {:.4})",
        cfg.ue_position.x, cfg.ue_position.y, cfg.ue_position.z
    );
    println!(
        "estimate:      ({:.4}, {:.4}, {:.4})",
        estimate.position.x, estimate.position.y, estimate.position.z
    );
    println!(
        "error: {:.6} m over {} hypotheses (indicator {:.3e} W{})",
        estimate.position.distance(cfg.ue_position),
        estimate.evaluations,
        estimate.indicator_power,
        if estimate.degenerate { ", degenerate tie" } else { "" }
    );
    Ok(())
}
