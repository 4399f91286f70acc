use std::fmt::Write as _;

use anyhow::{bail, Result};
use daa_core::sensorsim::{max_detection_range, reaction_time, DetectionModel, IntruderProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionRow {
    pub profile: String,
    pub length: f64,
    pub closure: f64,
    pub d_max: f64,
    pub reaction_time: f64,
}

/// Detection range and time to contact for each profile at each closure rate.
pub fn reaction_rows(profiles: &[IntruderProfile], min_pixels: f64, focal: f64, closures: &[f64]) -> Result<Vec<ReactionRow>> {
    if !(min_pixels > 0.0 && focal > 0.0) {
        bail!("min_pixels and focal length must be positive");
    }
    let model = DetectionModel { min_pixels, focal_px: focal, ..DetectionModel::default() };
    let mut rows = Vec::new();
    for p in profiles {
        let d_max = max_detection_range(p, &model, focal);
        for &closure in closures {
            rows.push(ReactionRow {
                profile: p.label.clone(),
                length: p.length,
                closure,
                d_max,
                reaction_time: reaction_time(d_max, closure)?,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_reaction_time(profiles: &[IntruderProfile], min_pixels: f64, focal: f64, closures: &[f64]) -> Result<String> {
    let rows = reaction_rows(profiles, min_pixels, focal, closures)?;
    let mut out = format!("{:<12} {:>9} {:>12} {:>9} {:>12}\n", "profile", "length_m", "closure_m_s", "d_max_m", "reaction_s");
    for r in rows {
        let _ =
            writeln!(out, "{:<12} {:>9.3} {:>12.2} {:>9.1} {:>12.2}", r.profile, r.length, r.closure, r.d_max, r.reaction_time);
    }
    Ok(out)
}
