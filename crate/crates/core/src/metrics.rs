//! Encounter safety metrics: separation minima, near mid-air collision
//! probability, risk ratio against a baseline, horizontal rate of closure,
//! and batch aggregation into a report table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{DaaError, Result};
use crate::sensorsim::HorizonSide;
use crate::simkit::{ControllerMode, EncounterGeometry, EpisodeLog};

/// Default near mid-air collision distance, meters.
pub const DEFAULT_NMAC_THRESHOLD: f64 = 30.0;

/// Smallest truth 3D distance over the episode.
pub fn separation_minima(log: &EpisodeLog) -> Result<f64> {
    log.rows.iter().map(|r| r.separation()).min_by(f64::total_cmp).ok_or(DaaError::EmptyLog)
}

/// Horizontal range rate from truth, by central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrocSeries {
    pub t: Vec<f64>,
    pub hroc: Vec<f64>,
    /// Inclusive row range averaged into `window_mean`.
    pub window: (usize, usize),
    pub window_mean: f64,
}

/// Index of the row where the separation is smallest (first one on ties).
pub fn closest_approach_index(log: &EpisodeLog) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in log.rows.iter().enumerate() {
        let d = r.separation();
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i).ok_or(DaaError::EmptyLog)
}

/// Horizontal rate of closure per row, averaged from the first valid
/// geometry (from the start for the nominal controller) to closest approach.
pub fn hroc_series(log: &EpisodeLog) -> Result<HrocSeries> {
    let rows = &log.rows;
    if rows.len() < 2 {
        return Err(DaaError::TooShortLog { need: 2, got: rows.len() });
    }
    let dist: Vec<f64> = rows.iter().map(|r| r.horizontal_separation()).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let n = rows.len();
    let hroc: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (dist[b] - dist[a]) / (t[b] - t[a])
        })
        .collect();
    let cpa = closest_approach_index(log)?;
    let start = match log.mode {
        ControllerMode::Nominal => 0,
        ControllerMode::Safe => rows.iter().position(|r| r.geo_valid != 0).unwrap_or(0),
    };
    let start = if start > cpa { 0 } else { start };
    let window = &hroc[start..=cpa];
    let window_mean = window.iter().sum::<f64>() / window.len() as f64;
    Ok(HrocSeries { t, hroc, window: (start, cpa), window_mean })
}

/// Per-episode numbers that the batch metrics are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub label: String,
    pub geometry: EncounterGeometry,
    pub mode: ControllerMode,
    pub seed: u64,
    pub horizon: HorizonSide,
    pub environment_factor: f64,
    pub min_separation: f64,
    pub min_horizontal_separation: f64,
    /// Some tick fell below the separation threshold.
    pub lost_separation: bool,
    pub mean_hroc: f64,
    pub time_of_closest_approach: f64,
    pub first_track_time: Option<f64>,
    pub infeasible_ticks: usize,
    pub duration: f64,
}

impl EpisodeSummary {
    pub fn from_log(log: &EpisodeLog) -> Result<Self> {
        let min_separation = separation_minima(log)?;
        let min_horizontal_separation =
            log.rows.iter().map(|r| r.horizontal_separation()).min_by(f64::total_cmp).ok_or(DaaError::EmptyLog)?;
        let hroc = hroc_series(log)?;
        let cpa = closest_approach_index(log)?;
        Ok(Self {
            label: log.label.clone(),
            geometry: log.geometry,
            mode: log.mode,
            seed: log.seed,
            horizon: log.horizon,
            environment_factor: log.environment_factor,
            min_separation,
            min_horizontal_separation,
            lost_separation: min_separation < log.d_thresh,
            mean_hroc: hroc.window_mean,
            time_of_closest_approach: log.rows[cpa].t,
            first_track_time: log.first_valid_geometry(),
            infeasible_ticks: log.rows.iter().filter(|r| r.infeasible_relaxed != 0 && r.control_tick != 0).count(),
            duration: log.rows.last().map_or(0.0, |r| r.t),
        })
    }
}

/// Fraction of episodes whose separation minimum is below `nmac_threshold`.
pub fn p_nmac(episodes: &[EpisodeSummary], nmac_threshold: f64) -> Result<f64> {
    if episodes.is_empty() {
        return Err(DaaError::NoEpisodes);
    }
    let hits = episodes.iter().filter(|e| e.min_separation < nmac_threshold).count();
    Ok(hits as f64 / episodes.len() as f64)
}

pub fn risk_ratio(system: &[EpisodeSummary], baseline: &[EpisodeSummary], nmac_threshold: f64) -> Result<f64> {
    let base = p_nmac(baseline, nmac_threshold)?;
    if base == 0.0 {
        return Err(DaaError::UndefinedRiskRatio);
    }
    Ok(p_nmac(system, nmac_threshold)? / base)
}

/// One scenario and controller combination in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub mode: ControllerMode,
    pub episodes: usize,
    pub separation_mean: f64,
    pub separation_std: f64,
    pub p_nmac: f64,
    /// Against the nominal rows of the same label; absent when undefined.
    pub risk_ratio: Option<f64>,
    /// Episodes with a loss of separation.
    pub violations: usize,
    pub mean_hroc: f64,
    /// Episodes with at least one infeasible control tick.
    pub infeasible_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub nmac_threshold: f64,
    pub rows: Vec<ReportRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups by `(label, mode)`; the result does not depend on input order.
pub fn aggregate(episodes: &[EpisodeSummary], nmac_threshold: f64) -> MetricsReport {
    let mut groups: BTreeMap<(String, ControllerMode), Vec<&EpisodeSummary>> = BTreeMap::new();
    for e in episodes {
        groups.entry((e.label.clone(), e.mode)).or_default().push(e);
    }
    for g in groups.values_mut() {
        g.sort_by(|a, b| {
            a.seed
                .cmp(&b.seed)
                .then(a.environment_factor.total_cmp(&b.environment_factor))
                .then(a.min_separation.total_cmp(&b.min_separation))
                .then(a.mean_hroc.total_cmp(&b.mean_hroc))
        });
    }
    let owned = |g: &[&EpisodeSummary]| g.iter().map(|e| (*e).clone()).collect::<Vec<_>>();
    let rows = groups
        .iter()
        .map(|((label, mode), g)| {
            let seps: Vec<f64> = g.iter().map(|e| e.min_separation).collect();
            let (separation_mean, separation_std) = mean_std(&seps);
            let hrocs: Vec<f64> = g.iter().map(|e| e.mean_hroc).collect();
            let system = owned(g);
            let risk = groups
                .get(&(label.clone(), ControllerMode::Nominal))
                .and_then(|base| risk_ratio(&system, &owned(base), nmac_threshold).ok());
            ReportRow {
                label: label.clone(),
                mode: *mode,
                episodes: g.len(),
                separation_mean,
                separation_std,
                p_nmac: p_nmac(&system, nmac_threshold).unwrap_or(0.0),
                risk_ratio: risk,
                violations: g.iter().filter(|e| e.lost_separation).count(),
                mean_hroc: mean_std(&hrocs).0,
                infeasible_episodes: g.iter().filter(|e| e.infeasible_ticks > 0).count(),
            }
        })
        .collect();
    MetricsReport { nmac_threshold, rows }
}

impl MetricsReport {
    pub fn row(&self, label: &str, mode: ControllerMode) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label && r.mode == mode)
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let header = [
            "scenario",
            "mode",
            "episodes",
            "sep_mean_m",
            "sep_std_m",
            "p_nmac",
            "risk_ratio",
            "violations",
            "mean_hroc",
            "infeasible",
        ];
        let body: Vec<[String; 10]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.label.clone(),
                    r.mode.name().to_string(),
                    r.episodes.to_string(),
                    format!("{:.2}", r.separation_mean),
                    format!("{:.2}", r.separation_std),
                    format!("{:.3}", r.p_nmac),
                    r.risk_ratio.map_or("-".to_string(), |x| format!("{x:.3}")),
                    r.violations.to_string(),
                    format!("{:.2}", r.mean_hroc),
                    r.infeasible_episodes.to_string(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "NMAC threshold: {} m", self.nmac_threshold);
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let _ = writeln!(out, "{}", line(header.to_vec()));
        for row in &body {
            let _ = writeln!(out, "{}", line(row.iter().map(String::as_str).collect()));
        }
        out
    }
}
