use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use daa_core::metrics::{aggregate, EpisodeSummary, MetricsReport};
use daa_core::sensorsim::HorizonSide;
use daa_core::simkit::{run_episode, ControllerMode, Scenario, SimConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RatesSpec, ScenarioFile};

/// Optional per-loop rate overrides; unset fields keep the file's values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RateOverrides {
    pub base_hz: Option<u32>,
    pub sensor_hz: Option<u32>,
    pub fusion_hz: Option<u32>,
    pub control_hz: Option<u32>,
}

impl RateOverrides {
    pub fn apply(&self, r: RatesSpec) -> RatesSpec {
        RatesSpec {
            base_hz: self.base_hz.unwrap_or(r.base_hz),
            sensor_hz: self.sensor_hz.unwrap_or(r.sensor_hz),
            fusion_hz: self.fusion_hz.unwrap_or(r.fusion_hz),
            control_hz: self.control_hz.unwrap_or(r.control_hz),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Scenario file path or bundled preset name.
    pub scenario: String,
    pub modes: Vec<ControllerMode>,
    pub episodes: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub nmac_threshold: f64,
    pub rates: RateOverrides,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    /// Re-run every scenario at each of these environment factors.
    pub environments: Option<Vec<f64>>,
    /// Forces every scenario to this horizon side.
    pub horizon: Option<HorizonSide>,
}

impl RunConfig {
    pub fn new(scenario: impl Into<String>, out: impl Into<PathBuf>) -> Self {
        Self {
            scenario: scenario.into(),
            modes: vec![ControllerMode::Nominal, ControllerMode::Safe],
            episodes: 100,
            seed: 0,
            out: out.into(),
            nmac_threshold: daa_core::metrics::DEFAULT_NMAC_THRESHOLD,
            rates: RateOverrides::default(),
            jobs: None,
            environments: None,
            horizon: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            bail!("episode count must be at least 1");
        }
        if self.modes.is_empty() {
            bail!("no controller modes requested");
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].contains(m) {
                bail!("mode {} requested twice", m.name());
            }
        }
        if !(self.nmac_threshold > 0.0 && self.nmac_threshold.is_finite()) {
            bail!("NMAC threshold must be positive, got {}", self.nmac_threshold);
        }
        if self.jobs == Some(0) {
            bail!("--jobs must be at least 1");
        }
        if let Some(envs) = &self.environments {
            if envs.is_empty() {
                bail!("environment sweep is empty");
            }
            if let Some(e) = envs.iter().find(|e| !(0.0..=1.0).contains(*e)) {
                bail!("environment factor {e} is outside [0, 1]");
            }
        }
        Ok(())
    }
}

/// Machine-readable run report written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub base_seed: u64,
    pub episodes_per_scenario: u64,
    pub modes: Vec<ControllerMode>,
    pub environments: Option<Vec<f64>>,
    pub metrics: MetricsReport,
    pub episodes: Vec<EpisodeSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: RunReport,
    pub log_files: Vec<PathBuf>,
}

struct Job {
    scenario: Scenario,
    mode: ControllerMode,
    seed: u64,
    dir: PathBuf,
}

fn env_dir(e: f64) -> String {
    format!("env_{e:.3}")
}

fn plan(cfg: &RunConfig, scenarios: &[Scenario]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for base in scenarios {
        let mut base = base.clone();
        if let Some(h) = cfg.horizon {
            base.horizon = h;
        }
        let variants: Vec<(Scenario, PathBuf)> = match &cfg.environments {
            None => vec![(base.clone(), cfg.out.join(&base.label))],
            Some(envs) => envs
                .iter()
                .map(|&e| (Scenario { environment_factor: e, ..base.clone() }, cfg.out.join(&base.label).join(env_dir(e))))
                .collect(),
        };
        for (s, dir) in variants {
            for seed in cfg.seed..cfg.seed + cfg.episodes {
                for &mode in &cfg.modes {
                    jobs.push(Job { scenario: s.clone(), mode, seed, dir: dir.join(mode.name()) });
                }
            }
        }
    }
    jobs
}

fn run_job(job: &Job, sim: &SimConfig) -> Result<(EpisodeSummary, PathBuf)> {
    let log = run_episode(&job.scenario, sim, job.mode, job.seed)
        .with_context(|| format!("{} {} seed {}", job.scenario.label, job.mode.name(), job.seed))?;
    let path = job.dir.join(format!("episode_{}.csv", job.seed));
    let file = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    log.write_csv(BufWriter::new(file)).with_context(|| format!("cannot write {}", path.display()))?;
    Ok((EpisodeSummary::from_log(&log)?, path))
}

/// Runs the batch, writes every output file, and returns the report.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut file = ScenarioFile::resolve(&cfg.scenario)?;
    file.rates = cfg.rates.apply(file.rates);
    let sim = file.sim_config()?;
    let scenarios = file.scenarios()?;

    let jobs = plan(cfg, &scenarios);
    let mut dirs: Vec<&PathBuf> = jobs.iter().map(|j| &j.dir).collect();
    dirs.dedup();
    for dir in dirs {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("cannot start worker pool")?;
    let results: Vec<(EpisodeSummary, PathBuf)> =
        pool.install(|| jobs.par_iter().map(|j| run_job(j, &sim)).collect::<Result<_>>())?;
    let (episodes, log_files): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let report = RunReport {
        base_seed: cfg.seed,
        episodes_per_scenario: cfg.episodes,
        modes: cfg.modes.clone(),
        environments: cfg.environments.clone(),
        metrics: aggregate(&episodes, cfg.nmac_threshold),
        episodes,
    };
    write_outputs(&cfg.out, &report)?;
    Ok(RunOutcome { report, log_files })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn write_outputs(out: &Path, report: &RunReport) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_file(&out.join("report.json"), &json)?;
    write_file(&out.join("report.txt"), &report.metrics.to_table())?;
    write_file(&out.join("hroc_by_scenario.csv"), &hroc_by_scenario(&report.episodes))?;
    write_file(&out.join("hroc_by_environment.csv"), &hroc_by_environment(&report.episodes, report.metrics.nmac_threshold))?;
    Ok(())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn horizon_name(h: HorizonSide) -> &'static str {
    match h {
        HorizonSide::Above => "above",
        HorizonSide::Below => "below",
    }
}

/// Mean horizontal rate of closure per scenario, horizon side and mode.
pub const HROC_BY_SCENARIO_HEADER: &str = "scenario,geometry,horizon,mode,episodes,hroc_mean,hroc_std";
/// Mean horizontal rate of closure and NMAC probability per environment factor.
pub const HROC_BY_ENVIRONMENT_HEADER: &str = "scenario,horizon,environment_factor,mode,episodes,hroc_mean,hroc_std,p_nmac";

pub fn hroc_by_scenario(episodes: &[EpisodeSummary]) -> String {
    let mut groups: BTreeMap<(&str, &str, &str, ControllerMode), Vec<f64>> = BTreeMap::new();
    for e in episodes {
        groups.entry((&e.label, e.geometry.name(), horizon_name(e.horizon), e.mode)).or_default().push(e.mean_hroc);
    }
    let mut out = format!("{HROC_BY_SCENARIO_HEADER}\n");
    for ((label, geometry, horizon, mode), xs) in &groups {
        let (m, s) = mean_std(xs);
        let _ = writeln!(out, "{label},{geometry},{horizon},{},{},{m},{s}", mode.name(), xs.len());
    }
    out
}

pub fn hroc_by_environment(episodes: &[EpisodeSummary], nmac_threshold: f64) -> String {
    // keyed on the factor's bit pattern so the map is ordered and exact
    let mut groups: BTreeMap<(&str, &str, u64, ControllerMode), Vec<&EpisodeSummary>> = BTreeMap::new();
    for e in episodes {
        groups.entry((&e.label, horizon_name(e.horizon), e.environment_factor.to_bits(), e.mode)).or_default().push(e);
    }
    let mut out = format!("{HROC_BY_ENVIRONMENT_HEADER}\n");
    for ((label, horizon, env, mode), g) in &groups {
        let xs: Vec<f64> = g.iter().map(|e| e.mean_hroc).collect();
        let (m, s) = mean_std(&xs);
        let p = g.iter().filter(|e| e.min_separation < nmac_threshold).count() as f64 / g.len() as f64;
        let _ = writeln!(out, "{label},{horizon},{},{},{},{m},{s},{p}", f64::from_bits(*env), mode.name(), g.len());
    }
    out
}
