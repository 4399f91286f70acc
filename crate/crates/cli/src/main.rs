use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Parser, Subcommand};
use daa_cli::config::preset_names;
use daa_cli::{cmd_reaction_time, cmd_run, RateOverrides, RunConfig, ScenarioFile};
use daa_core::metrics::DEFAULT_NMAC_THRESHOLD;
use daa_core::sensorsim::{DetectionModel, HorizonSide, IntruderProfile};
use daa_core::simkit::ControllerMode;

#[derive(Parser)]
#[command(name = "daa", version, about = "Camera-based detect-and-avoid encounter simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte-Carlo encounter batches and write logs and reports
    Run {
        /// Scenario file, or a bundled preset name (E1 to E5)
        #[arg(long)]
        scenario: String,
        /// Comma-separated controller modes: nominal, safe
        #[arg(long, value_delimiter = ',', default_value = "nominal,safe", value_parser = parse_mode)]
        modes: Vec<ControllerMode>,
        /// Episodes per scenario (and per environment factor)
        #[arg(long, default_value_t = 100)]
        episodes: u64,
        /// First seed; episodes use seed, seed+1, ...
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "DAA_OUT_DIR", default_value = "out")]
        out: PathBuf,
        /// Separation below which an episode counts as an NMAC, meters
        #[arg(long, default_value_t = DEFAULT_NMAC_THRESHOLD)]
        nmac_threshold: f64,
        /// Worker threads (default: all cores)
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        base_hz: Option<u32>,
        #[arg(long)]
        sensor_hz: Option<u32>,
        #[arg(long)]
        fusion_hz: Option<u32>,
        #[arg(long)]
        control_hz: Option<u32>,
        /// Comma-separated environment factors to sweep
        #[arg(long, value_delimiter = ',')]
        environments: Option<Vec<f64>>,
        /// Override the intruder side of the horizon: above or below
        #[arg(long, value_parser = parse_horizon)]
        horizon: Option<HorizonSide>,
    },
    /// Print the reliable detection range and time to contact
    ReactionTime {
        /// Named profile(s): hexarotor, vtol, bell407 (default: all)
        #[arg(long, value_delimiter = ',')]
        intruder: Vec<String>,
        /// Custom intruder length in meters, instead of a named profile
        #[arg(long, conflicts_with = "intruder")]
        length: Option<f64>,
        /// Comma-separated closure rates, m/s
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        closure: Vec<f64>,
        #[arg(long, default_value_t = DetectionModel::default().min_pixels)]
        min_pixels: f64,
        /// Focal length in pixels
        #[arg(long, default_value_t = DetectionModel::default().focal_px)]
        focal: f64,
    },
    /// Print a scenario file or preset in canonical form
    Normalize { scenario: String },
    /// List the bundled presets
    Presets,
}

fn parse_mode(s: &str) -> Result<ControllerMode, String> {
    ControllerMode::parse(s).ok_or_else(|| format!("unknown mode `{s}`, expected nominal or safe"))
}

fn parse_horizon(s: &str) -> Result<HorizonSide, String> {
    match s.to_ascii_lowercase().as_str() {
        "above" => Ok(HorizonSide::Above),
        "below" => Ok(HorizonSide::Below),
        _ => Err(format!("unknown horizon side `{s}`, expected above or below")),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Run {
            scenario,
            modes,
            episodes,
            seed,
            out,
            nmac_threshold,
            jobs,
            base_hz,
            sensor_hz,
            fusion_hz,
            control_hz,
            environments,
            horizon,
        } => {
            let cfg = RunConfig {
                modes,
                episodes,
                seed,
                nmac_threshold,
                jobs,
                rates: RateOverrides { base_hz, sensor_hz, fusion_hz, control_hz },
                environments,
                horizon,
                ..RunConfig::new(scenario, out.clone())
            };
            let outcome = cmd_run(&cfg)?;
            print!("{}", outcome.report.metrics.to_table());
            eprintln!("wrote {} episode logs and reports to {}", outcome.log_files.len(), out.display());
        }
        Command::ReactionTime { intruder, length, closure, min_pixels, focal } => {
            let profiles = match (length, intruder.is_empty()) {
                (Some(l), _) => vec![IntruderProfile::new("custom", l)?],
                (None, true) => vec![IntruderProfile::hexarotor(), IntruderProfile::vtol(), IntruderProfile::bell_407()],
                (None, false) => intruder
                    .iter()
                    .map(|n| IntruderProfile::by_name(n).ok_or_else(|| anyhow!("unknown intruder profile `{n}`")))
                    .collect::<Result<_>>()?,
            };
            print!("{}", cmd_reaction_time(&profiles, min_pixels, focal, &closure)?);
        }
        Command::Normalize { scenario } => {
            print!("{}", ScenarioFile::resolve(&scenario)?.to_canonical_string()?);
        }
        Command::Presets => {
            for name in preset_names() {
                let file = ScenarioFile::resolve(name)?;
                let Some(s) = file.scenarios.first() else { bail!("preset {name} is empty") };
                println!("{name}  {} {}/{} m/s, {}", s.geometry.name(), s.ownship_speed, s.intruder_speed, s.intruder);
            }
        }
    }
    Ok(())
}
