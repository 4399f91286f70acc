//! Multi-rate episode engine and Monte-Carlo harness.
//!
//! Everything here runs in `f64`. An episode advances a fixed base clock;
//! sensing, fusion and control fire on integer multiples of it, in that
//! order, after the physics step of the same tick. Commands are held
//! between control ticks.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{clamp_control, intruder_step, ownship_step, ControlBounds, ControlInput, IntruderState, OwnshipState};
use crate::error::{DaaError, Result};
use crate::frames::{default_rig, CameraModel, NedVector};
use crate::fusion::{FusionConfig, MultiViewFusion, RelativeGeometry};
use crate::safety::{cbf_value, truth_geometry, CbfParameters, GoalSpec, PdGains, SafetyController};
use crate::sensorsim::{
    max_detection_range, sense_with_memory, DetectionModel, DetectorMemory, HorizonSide, ImageTrack, IntruderProfile,
};

/// Ownship distance to goal at which an episode ends, meters.
pub const GOAL_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncounterGeometry {
    HeadOn,
    Overtake,
    Crossing,
}

impl EncounterGeometry {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "headon" => Some(Self::HeadOn),
            "overtake" => Some(Self::Overtake),
            "crossing" | "lateral" => Some(Self::Crossing),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::HeadOn => "head-on",
            Self::Overtake => "overtake",
            Self::Crossing => "crossing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    Nominal,
    Safe,
}

impl ControllerMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Nominal => "nominal",
            Self::Safe => "safe",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "nominal" => Some(Self::Nominal),
            "safe" | "cbf" => Some(Self::Safe),
            _ => None,
        }
    }
}

/// Where the controller's geometry comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensingMode {
    /// Camera simulation and multi-view fusion.
    #[default]
    Vision,
    /// Exact geometry from ground truth at every control tick.
    Perfect,
}

/// One encounter family to sample episodes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub geometry: EncounterGeometry,
    pub ownship_speed: f64,
    pub intruder_speed: f64,
    pub profile: IntruderProfile,
    pub horizon: HorizonSide,
    /// Nominal horizontal start separation; `None` means 1.5 detection ranges.
    pub initial_range: Option<f64>,
    /// Uniform jitter of the intruder start along its own path, +/- meters.
    pub corridor_extent: f64,
    /// Uniform jitter of the intruder start across its path, +/- meters.
    pub lateral_extent: f64,
    /// Vertical offset between the two constant altitudes, meters.
    pub altitude_offset: f64,
    /// Ownship altitude above the origin, meters.
    pub altitude: f64,
    pub environment_factor: f64,
    pub d_thresh: f64,
    pub bounds: ControlBounds<f64>,
    pub duration: f64,
    /// How far past the conflict point the ownship goal lies, meters.
    pub goal_margin: f64,
    pub sensing: SensingMode,
}

impl Scenario {
    /// A scenario with the library defaults for everything but the encounter.
    pub fn new(
        label: impl Into<String>,
        geometry: EncounterGeometry,
        ownship_speed: f64,
        intruder_speed: f64,
        profile: IntruderProfile,
    ) -> Self {
        Self {
            label: label.into(),
            geometry,
            ownship_speed,
            intruder_speed,
            profile,
            horizon: HorizonSide::Above,
            initial_range: None,
            corridor_extent: 20.0,
            lateral_extent: 5.0,
            altitude_offset: 15.0,
            altitude: 60.0,
            environment_factor: 1.0,
            d_thresh: 50.0,
            bounds: ControlBounds::default(),
            duration: 60.0,
            goal_margin: 200.0,
            sensing: SensingMode::Vision,
        }
    }

    /// The five reference encounters E1 to E5.
    pub fn preset(label: &str) -> Option<Self> {
        use EncounterGeometry::*;
        let hex = IntruderProfile::hexarotor;
        let mut s = match label.to_ascii_uppercase().as_str() {
            "E1" => Self::new("E1", HeadOn, 10.0, 10.0, hex()),
            "E2" => Self { duration: 120.0, ..Self::new("E2", Overtake, 10.0, 5.0, hex()) },
            "E3" => Self { duration: 80.0, ..Self::new("E3", Crossing, 10.0, 5.0, hex()) },
            "E4" => Self::new("E4", HeadOn, 10.0, 30.0, IntruderProfile::vtol()),
            // same encounter as E1 at a second, hazier site
            "E5" => Self { environment_factor: 0.8, ..Self::new("E5", HeadOn, 10.0, 10.0, hex()) },
            _ => return None,
        };
        s.label = label.to_ascii_uppercase();
        Some(s)
    }

    pub fn presets() -> Vec<Self> {
        ["E1", "E2", "E3", "E4", "E5"].iter().filter_map(|l| Self::preset(l)).collect()
    }

    pub fn closure_rate(&self) -> f64 {
        match self.geometry {
            EncounterGeometry::HeadOn => self.ownship_speed + self.intruder_speed,
            EncounterGeometry::Overtake => self.ownship_speed - self.intruder_speed,
            EncounterGeometry::Crossing => self.ownship_speed.hypot(self.intruder_speed),
        }
    }

    pub fn detection_range(&self, model: &DetectionModel) -> f64 {
        max_detection_range(&self.profile, model, model.focal_px)
    }

    pub fn resolved_initial_range(&self, model: &DetectionModel) -> f64 {
        self.initial_range.unwrap_or_else(|| 1.5 * self.detection_range(model))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DaaError::Config(format!("scenario {}: {msg}", self.label)));
        for (name, v) in [("ownship_speed", self.ownship_speed), ("intruder_speed", self.intruder_speed)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.closure_rate() > 0.0) {
            return bad(match self.geometry {
                EncounterGeometry::Overtake => "overtake needs the ownship faster than the intruder".into(),
                _ => "agents never converge".into(),
            });
        }
        if let Some(r) = self.initial_range {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("initial_range must be positive, got {r}"));
            }
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.d_thresh > 0.0) {
            return bad(format!("d_thresh must be positive, got {}", self.d_thresh));
        }
        if !(0.0..=1.0).contains(&self.environment_factor) {
            return bad(format!("environment_factor must lie in [0, 1], got {}", self.environment_factor));
        }
        for (name, v) in [
            ("corridor_extent", self.corridor_extent),
            ("lateral_extent", self.lateral_extent),
            ("altitude_offset", self.altitude_offset),
            ("goal_margin", self.goal_margin),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !self.profile.length.is_finite() || self.profile.length <= 0.0 {
            return bad("intruder length must be positive".into());
        }
        self.bounds.validate()
    }
}

/// Loop periods as multiples of a base step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateConfig {
    pub base_hz: u32,
    pub sensor_ticks: u32,
    pub fusion_ticks: u32,
    pub control_ticks: u32,
}

impl Default for RateConfig {
    fn default() -> Self {
        // 600 Hz base: 8, 24 and 50 Hz loops
        Self { base_hz: 600, sensor_ticks: 75, fusion_ticks: 25, control_ticks: 12 }
    }
}

impl RateConfig {
    /// Builds the config from loop rates, each of which must divide `base_hz`.
    pub fn from_hz(base_hz: u32, sensor_hz: u32, fusion_hz: u32, control_hz: u32) -> Result<Self> {
        let ticks = |name: &str, hz: u32| {
            if hz == 0 || !base_hz.is_multiple_of(hz) {
                Err(DaaError::Config(format!("{name} rate {hz} Hz does not divide the {base_hz} Hz base rate")))
            } else {
                Ok(base_hz / hz)
            }
        };
        let cfg = Self {
            base_hz,
            sensor_ticks: ticks("sensor", sensor_hz)?,
            fusion_ticks: ticks("fusion", fusion_hz)?,
            control_ticks: ticks("control", control_hz)?,
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_hz == 0 || self.sensor_ticks == 0 || self.fusion_ticks == 0 || self.control_ticks == 0 {
            return Err(DaaError::Config("rates must be positive".into()));
        }
        Ok(())
    }

    pub fn base_step(&self) -> f64 {
        1.0 / f64::from(self.base_hz)
    }

    pub fn time_of(&self, tick: u64) -> f64 {
        tick as f64 / f64::from(self.base_hz)
    }
}

/// Everything besides the scenario that shapes an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rig: Vec<CameraModel<f64>>,
    pub detection: DetectionModel,
    pub fusion: FusionConfig,
    /// `d_thresh` is taken from the scenario.
    pub cbf: CbfParameters<f64>,
    pub gains: PdGains<f64>,
    pub rates: RateConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rig: default_rig(),
            detection: DetectionModel::default(),
            fusion: FusionConfig::default(),
            cbf: CbfParameters::default(),
            gains: PdGains::default(),
            rates: RateConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rig.is_empty() {
            return Err(DaaError::Config("camera rig is empty".into()));
        }
        for cam in &self.rig {
            cam.validate()?;
        }
        self.detection.validate()?;
        self.cbf.validate()?;
        self.rates.validate()
    }
}

/// Initial conditions of one sampled episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Encounter {
    pub ownship: OwnshipState<f64>,
    pub intruder: IntruderState<f64>,
    pub goal: GoalSpec<f64>,
    /// Where the unperturbed paths meet.
    pub conflict_point: NedVector<f64>,
}

/// Samples the starting states. The ownship starts at the origin flying north.
pub fn build_encounter<R: Rng + ?Sized>(s: &Scenario, model: &DetectionModel, rng: &mut R) -> Result<Encounter> {
    s.validate()?;
    let jitter = |rng: &mut R, ext: f64| if ext > 0.0 { rng.random_range(-ext..=ext) } else { 0.0 };
    let along = jitter(rng, s.corridor_extent);
    let across = jitter(rng, s.lateral_extent);
    let r0 = s.resolved_initial_range(model);
    let (vo, vi) = (s.ownship_speed, s.intruder_speed);
    let own_down = -s.altitude;
    let int_down = match s.horizon {
        HorizonSide::Above => own_down - s.altitude_offset,
        HorizonSide::Below => own_down + s.altitude_offset,
    };
    let (int_n, int_e, int_heading, conflict_n) = match s.geometry {
        EncounterGeometry::HeadOn => {
            let start = r0 + along;
            (start, across, std::f64::consts::PI, vo * start / (vo + vi))
        }
        EncounterGeometry::Overtake => {
            let start = r0 + along;
            (start, across, 0.0, vo * start / (vo - vi))
        }
        EncounterGeometry::Crossing => {
            // paths meet at (vo t_c, 0); the intruder comes from the east
            let t_c = r0 / s.closure_rate();
            let conflict = vo * t_c;
            (conflict + across, vi * t_c + along, -std::f64::consts::FRAC_PI_2, conflict)
        }
    };
    let ownship = OwnshipState { position: NedVector::new(0.0, 0.0, own_down), speed: vo, heading: 0.0 };
    let intruder = IntruderState { position: NedVector::new(int_n, int_e, int_down), speed: vi, heading: int_heading };
    let goal = GoalSpec { position: NedVector::new(conflict_n + s.goal_margin, 0.0, own_down), desired_speed: vo };
    Ok(Encounter { ownship, intruder, goal, conflict_point: NedVector::new(conflict_n, 0.0, own_down) })
}

/// One base tick of an episode. Field names are the CSV header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub own_north: f64,
    pub own_east: f64,
    pub own_down: f64,
    pub own_speed: f64,
    pub own_heading: f64,
    pub int_north: f64,
    pub int_east: f64,
    pub int_down: f64,
    pub int_speed: f64,
    pub int_heading: f64,
    pub geo_valid: u8,
    pub geo_d: f64,
    pub geo_d_dot: f64,
    pub geo_theta: f64,
    pub geo_v_int_north: f64,
    pub geo_v_int_east: f64,
    pub h: f64,
    pub u_nom_accel: f64,
    pub u_nom_turn: f64,
    pub u_accel: f64,
    pub u_turn: f64,
    pub constraint_active: u8,
    pub infeasible_relaxed: u8,
    pub sensor_tick: u8,
    pub fusion_tick: u8,
    pub control_tick: u8,
    pub detections: u32,
}

impl LogRow {
    pub fn ownship_position(&self) -> NedVector<f64> {
        NedVector::new(self.own_north, self.own_east, self.own_down)
    }

    pub fn intruder_position(&self) -> NedVector<f64> {
        NedVector::new(self.int_north, self.int_east, self.int_down)
    }

    /// Truth 3D separation.
    pub fn separation(&self) -> f64 {
        (self.intruder_position() - self.ownship_position()).norm()
    }

    /// Truth horizontal separation.
    pub fn horizontal_separation(&self) -> f64 {
        (self.intruder_position() - self.ownship_position()).horizontal_norm()
    }
}

/// Column names of the episode CSV, in order.
pub const LOG_HEADER: [&str; 28] = [
    "t",
    "own_north",
    "own_east",
    "own_down",
    "own_speed",
    "own_heading",
    "int_north",
    "int_east",
    "int_down",
    "int_speed",
    "int_heading",
    "geo_valid",
    "geo_d",
    "geo_d_dot",
    "geo_theta",
    "geo_v_int_north",
    "geo_v_int_east",
    "h",
    "u_nom_accel",
    "u_nom_turn",
    "u_accel",
    "u_turn",
    "constraint_active",
    "infeasible_relaxed",
    "sensor_tick",
    "fusion_tick",
    "control_tick",
    "detections",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub label: String,
    pub geometry: EncounterGeometry,
    pub mode: ControllerMode,
    pub seed: u64,
    pub horizon: HorizonSide,
    pub environment_factor: f64,
    pub d_thresh: f64,
    pub rows: Vec<LogRow>,
}

impl EpisodeLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(|e| DaaError::Config(format!("csv: {e}")))?;
        }
        if self.rows.is_empty() {
            w.write_record(LOG_HEADER).map_err(|e| DaaError::Config(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| DaaError::Config(format!("csv: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| DaaError::Config(e.to_string()))
    }

    /// Parses rows written by [`EpisodeLog::write_csv`].
    pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<LogRow>> {
        let mut r = csv::Reader::from_reader(input);
        r.deserialize().collect::<std::result::Result<Vec<LogRow>, _>>().map_err(|e| DaaError::Config(format!("csv: {e}")))
    }

    pub fn any_infeasible(&self) -> bool {
        self.rows.iter().any(|r| r.infeasible_relaxed != 0)
    }

    /// Time of the first row carrying a valid geometry.
    pub fn first_valid_geometry(&self) -> Option<f64> {
        self.rows.iter().find(|r| r.geo_valid != 0).map(|r| r.t)
    }
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// RNG streams of one seed: encounter sampling, detections, clutter.
pub fn episode_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng, ChaCha8Rng) {
    (seeded(seed, 0), seeded(seed, 1), seeded(seed, 2))
}

/// Runs one episode; deterministic in `(scenario, config, mode, seed)`.
pub fn run_episode(s: &Scenario, cfg: &SimConfig, mode: ControllerMode, seed: u64) -> Result<EpisodeLog> {
    cfg.validate()?;
    let mut detection = cfg.detection.clone();
    detection.environment_factor = s.environment_factor;
    let (mut enc_rng, mut sensor_rng, mut clutter_rng) = episode_rngs(seed);
    let enc = build_encounter(s, &detection, &mut enc_rng)?;
    let params = CbfParameters { d_thresh: s.d_thresh, ..cfg.cbf };
    params.validate()?;

    let rates = cfg.rates;
    let dt = rates.base_step();
    let last_tick = (s.duration * f64::from(rates.base_hz)).floor() as u64;
    let mut own = enc.ownship;
    let mut intr = enc.intruder;
    let mut controller = SafetyController::new(params, s.bounds, cfg.gains);
    let mut fusion = MultiViewFusion::<f64>::new(cfg.fusion.clone());
    let mut memory = DetectorMemory::new();
    let mut pending: Vec<(ImageTrack<f64>, f64)> = Vec::new();
    let mut geo = RelativeGeometry::<f64>::invalid();
    let mut u = ControlInput::zero();
    let mut u_nom = ControlInput::zero();
    let mut h = 0.0;
    let (mut active, mut relaxed) = (false, false);
    let mut rows = Vec::with_capacity(last_tick as usize + 1);

    for k in 0..=last_tick {
        let t = rates.time_of(k);
        if k > 0 {
            own = ownship_step(&own, &u, dt)?;
            intr = intruder_step(&intr, dt)?;
        }
        let sensor_tick = k % u64::from(rates.sensor_ticks) == 0;
        let fusion_tick = k % u64::from(rates.fusion_ticks) == 0;
        let control_tick = k % u64::from(rates.control_ticks) == 0;
        let mut detections = 0;

        match s.sensing {
            SensingMode::Vision => {
                if sensor_tick {
                    let tracks = sense_with_memory(
                        &own,
                        &intr,
                        &s.profile,
                        &cfg.rig,
                        &detection,
                        &mut memory,
                        &mut sensor_rng,
                        &mut clutter_rng,
                        t,
                    );
                    detections = tracks.len() as u32;
                    pending.extend(tracks.into_iter().map(|tk| (tk, own.heading)));
                }
                if fusion_tick {
                    for (tk, heading) in pending.drain(..) {
                        fusion.ingest(&tk, &cfg.rig, heading)?;
                    }
                    fusion.prune(t);
                    geo = fusion.publish(&own, t);
                }
            }
            SensingMode::Perfect => {
                if fusion_tick || control_tick {
                    geo = truth_geometry(&own, &intr);
                }
            }
        }

        if control_tick {
            match mode {
                ControllerMode::Nominal => {
                    u_nom = controller.nominal(&own, &enc.goal);
                    u = u_nom;
                    active = false;
                    relaxed = false;
                    h = if geo.valid { cbf_value(geo.d.max(1.0), geo.d_dot, &params).unwrap_or(0.0) } else { 0.0 };
                }
                ControllerMode::Safe => {
                    let (cmd, diag) = controller.safe(&own, &geo, &enc.goal)?;
                    u = clamp_control(cmd, &s.bounds);
                    u_nom = diag.u_nom;
                    h = diag.h;
                    active = diag.constraint_active;
                    relaxed = diag.infeasible_relaxed;
                }
            }
        }

        rows.push(LogRow {
            t,
            own_north: own.position.north,
            own_east: own.position.east,
            own_down: own.position.down,
            own_speed: own.speed,
            own_heading: own.heading,
            int_north: intr.position.north,
            int_east: intr.position.east,
            int_down: intr.position.down,
            int_speed: intr.speed,
            int_heading: intr.heading,
            geo_valid: u8::from(geo.valid),
            geo_d: geo.d,
            geo_d_dot: geo.d_dot,
            geo_theta: geo.theta,
            geo_v_int_north: geo.v_int_north,
            geo_v_int_east: geo.v_int_east,
            h,
            u_nom_accel: u_nom.accel,
            u_nom_turn: u_nom.turn_rate,
            u_accel: u.accel,
            u_turn: u.turn_rate,
            constraint_active: u8::from(active),
            infeasible_relaxed: u8::from(relaxed),
            sensor_tick: u8::from(sensor_tick),
            fusion_tick: u8::from(fusion_tick),
            control_tick: u8::from(control_tick),
            detections,
        });

        if (enc.goal.position - own.position).norm() <= GOAL_RADIUS {
            break;
        }
    }

    Ok(EpisodeLog {
        label: s.label.clone(),
        geometry: s.geometry,
        mode,
        seed,
        horizon: s.horizon,
        environment_factor: s.environment_factor,
        d_thresh: s.d_thresh,
        rows,
    })
}

/// Runs seeds `base_seed..base_seed + n` for every mode and maps each log
/// through `f` as soon as it is produced. Results are ordered by seed, then
/// by the order of `modes`.
pub fn run_monte_carlo_with<F, R>(
    s: &Scenario,
    cfg: &SimConfig,
    modes: &[ControllerMode],
    n: u64,
    base_seed: u64,
    mut f: F,
) -> Result<Vec<R>>
where
    F: FnMut(EpisodeLog) -> Result<R>,
{
    if n == 0 {
        return Err(DaaError::NoEpisodes);
    }
    let mut out = Vec::with_capacity((n as usize) * modes.len());
    for seed in base_seed..base_seed + n {
        for &mode in modes {
            out.push(f(run_episode(s, cfg, mode, seed)?)?);
        }
    }
    Ok(out)
}

pub fn run_monte_carlo(
    s: &Scenario,
    cfg: &SimConfig,
    modes: &[ControllerMode],
    n: u64,
    base_seed: u64,
) -> Result<Vec<EpisodeLog>> {
    run_monte_carlo_with(s, cfg, modes, n, base_seed, Ok)
}
