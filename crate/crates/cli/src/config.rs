//! Scenario file schema.
//!
//! A scenario file is TOML with five top-level keys:
//!
//! ```toml
//! [[scenario]]            # one or more encounter families
//! label = "E1"
//! geometry = "head-on"    # head-on | overtake | crossing
//! ownship_speed = 10.0    # m/s
//! intruder_speed = 10.0   # m/s
//! intruder = "hexarotor"  # hexarotor | vtol | bell407, or any name plus intruder_length
//!
//! [[rig]]                 # optional; omit for the built-in six-camera rig
//! mount_yaw_deg = 0.0
//! hfov_deg = 56.0
//! vfov_deg = 48.0
//! width_px = 1224
//! height_px = 1024
//!
//! [detection]             # optional overrides of the detector model
//! [cbf]                   # optional: c, n, k, lambda
//! [rates]                 # optional: base_hz, sensor_hz, fusion_hz, control_hz
//! ```
//!
//! Unknown keys are rejected. The structs here hold values in file units
//! (degrees, Hz, profile names) so that [`ScenarioFile::to_canonical_string`]
//! round-trips exactly; conversion to the simulation types is one way.

use std::path::Path;

use anyhow::{bail, Context, Result};
use daa_core::dynamics::{ControlBounds, ControlInput};
use daa_core::frames::CameraModel;
use daa_core::fusion::FusionConfig;
use daa_core::safety::CbfParameters;
use daa_core::sensorsim::{DetectionModel, HorizonSide, IntruderProfile};
use daa_core::simkit::{EncounterGeometry, RateConfig, Scenario, SensingMode, SimConfig};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const PRESETS: [(&str, &str); 5] = [
    ("E1", include_str!("../presets/e1.toml")),
    ("E2", include_str!("../presets/e2.toml")),
    ("E3", include_str!("../presets/e3.toml")),
    ("E4", include_str!("../presets/e4.toml")),
    ("E5", include_str!("../presets/e5.toml")),
];

/// Names of the bundled preset files.
pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

/// Source text of a bundled preset, matched case-insensitively.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, src)| *src)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub detection: DetectionSpec,
    #[serde(default)]
    pub cbf: CbfSpec,
    #[serde(default)]
    pub rates: RatesSpec,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rig: Option<Vec<CameraSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub label: String,
    #[serde(serialize_with = "ser_geometry", deserialize_with = "de_geometry")]
    pub geometry: EncounterGeometry,
    #[serde(deserialize_with = "de_speed")]
    pub ownship_speed: f64,
    #[serde(deserialize_with = "de_speed")]
    pub intruder_speed: f64,
    pub intruder: String,
    /// Overrides (or, for an unknown profile name, supplies) the intruder size, meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intruder_length: Option<f64>,
    #[serde(default = "defaults::horizon")]
    pub horizon: HorizonSide,
    #[serde(default = "defaults::duration")]
    pub duration: f64,
    #[serde(default = "defaults::environment_factor")]
    pub environment_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_range: Option<f64>,
    #[serde(default = "defaults::corridor_extent")]
    pub corridor_extent: f64,
    #[serde(default = "defaults::lateral_extent")]
    pub lateral_extent: f64,
    #[serde(default = "defaults::altitude_offset")]
    pub altitude_offset: f64,
    #[serde(default = "defaults::altitude")]
    pub altitude: f64,
    #[serde(default = "defaults::d_thresh")]
    pub d_thresh: f64,
    #[serde(default = "defaults::goal_margin")]
    pub goal_margin: f64,
    #[serde(default = "defaults::accel_min")]
    pub accel_min: f64,
    #[serde(default = "defaults::accel_max")]
    pub accel_max: f64,
    #[serde(default = "defaults::turn_rate_min")]
    pub turn_rate_min: f64,
    #[serde(default = "defaults::turn_rate_max")]
    pub turn_rate_max: f64,
    #[serde(default)]
    pub sensing: SensingMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub mount_yaw_deg: f64,
    #[serde(default)]
    pub mount_pitch_deg: f64,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSpec {
    pub min_pixels: f64,
    pub p_track_at_threshold: f64,
    pub range_noise_rel: f64,
    pub angle_noise_deg: f64,
    pub p_detect_above_horizon: f64,
    pub p_detect_below_horizon: f64,
    pub focal_px: f64,
    pub clutter_rate: f64,
    pub detection_persistence_above: f64,
    pub detection_persistence_below: f64,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        let m = DetectionModel::default();
        Self {
            min_pixels: m.min_pixels,
            p_track_at_threshold: m.p_track_at_threshold,
            range_noise_rel: m.range_noise_rel,
            angle_noise_deg: 0.3,
            p_detect_above_horizon: m.p_detect_above_horizon,
            p_detect_below_horizon: m.p_detect_below_horizon,
            focal_px: m.focal_px,
            clutter_rate: m.clutter_rate,
            detection_persistence_above: m.detection_persistence_above,
            detection_persistence_below: m.detection_persistence_below,
        }
    }
}

impl DetectionSpec {
    pub fn to_model(&self) -> Result<DetectionModel> {
        let m = DetectionModel {
            min_pixels: self.min_pixels,
            p_track_at_threshold: self.p_track_at_threshold,
            range_noise_rel: self.range_noise_rel,
            angle_noise: self.angle_noise_deg.to_radians(),
            p_detect_above_horizon: self.p_detect_above_horizon,
            p_detect_below_horizon: self.p_detect_below_horizon,
            environment_factor: 1.0,
            focal_px: self.focal_px,
            clutter_rate: self.clutter_rate,
            detection_persistence_above: self.detection_persistence_above,
            detection_persistence_below: self.detection_persistence_below,
        };
        m.validate().context("[detection]")?;
        Ok(m)
    }
}

/// Barrier shape and decay rate; the separation threshold is per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CbfSpec {
    pub c: f64,
    pub n: f64,
    pub k: f64,
    pub lambda: f64,
}

impl Default for CbfSpec {
    fn default() -> Self {
        let p = CbfParameters::<f64>::default();
        Self { c: p.c, n: p.n, k: p.k, lambda: p.lambda }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSpec {
    pub base_hz: u32,
    pub sensor_hz: u32,
    pub fusion_hz: u32,
    pub control_hz: u32,
}

impl Default for RatesSpec {
    fn default() -> Self {
        Self { base_hz: 600, sensor_hz: 8, fusion_hz: 24, control_hz: 50 }
    }
}

mod defaults {
    use super::*;

    fn template() -> Scenario {
        Scenario::new("", EncounterGeometry::HeadOn, 0.0, 0.0, IntruderProfile::hexarotor())
    }

    pub fn horizon() -> HorizonSide {
        template().horizon
    }
    pub fn duration() -> f64 {
        template().duration
    }
    pub fn environment_factor() -> f64 {
        template().environment_factor
    }
    pub fn corridor_extent() -> f64 {
        template().corridor_extent
    }
    pub fn lateral_extent() -> f64 {
        template().lateral_extent
    }
    pub fn altitude_offset() -> f64 {
        template().altitude_offset
    }
    pub fn altitude() -> f64 {
        template().altitude
    }
    pub fn d_thresh() -> f64 {
        template().d_thresh
    }
    pub fn goal_margin() -> f64 {
        template().goal_margin
    }
    pub fn accel_min() -> f64 {
        template().bounds.min.accel
    }
    pub fn accel_max() -> f64 {
        template().bounds.max.accel
    }
    pub fn turn_rate_min() -> f64 {
        template().bounds.min.turn_rate
    }
    pub fn turn_rate_max() -> f64 {
        template().bounds.max.turn_rate
    }
}

fn ser_geometry<S: Serializer>(g: &EncounterGeometry, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(g.name())
}

fn de_geometry<'de, D: Deserializer<'de>>(d: D) -> Result<EncounterGeometry, D::Error> {
    let name = String::deserialize(d)?;
    EncounterGeometry::parse(&name)
        .ok_or_else(|| serde::de::Error::custom(format!("unknown geometry `{name}`, expected head-on, overtake or crossing")))
}

fn de_speed<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(serde::de::Error::custom(format!("speed must be a non-negative number, got {v}")))
    }
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && label != "."
        && label != ".."
}

impl ScenarioSpec {
    pub fn from_scenario(s: &Scenario) -> Self {
        let known = IntruderProfile::by_name(&s.profile.label);
        let intruder_length = match known {
            Some(p) if p.length == s.profile.length => None,
            _ => Some(s.profile.length),
        };
        Self {
            label: s.label.clone(),
            geometry: s.geometry,
            ownship_speed: s.ownship_speed,
            intruder_speed: s.intruder_speed,
            intruder: s.profile.label.clone(),
            intruder_length,
            horizon: s.horizon,
            duration: s.duration,
            environment_factor: s.environment_factor,
            initial_range: s.initial_range,
            corridor_extent: s.corridor_extent,
            lateral_extent: s.lateral_extent,
            altitude_offset: s.altitude_offset,
            altitude: s.altitude,
            d_thresh: s.d_thresh,
            goal_margin: s.goal_margin,
            accel_min: s.bounds.min.accel,
            accel_max: s.bounds.max.accel,
            turn_rate_min: s.bounds.min.turn_rate,
            turn_rate_max: s.bounds.max.turn_rate,
            sensing: s.sensing,
        }
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        if !valid_label(&self.label) {
            bail!("scenario label `{}` must be non-empty and use only letters, digits, '-', '_' or '.'", self.label);
        }
        let profile = match (IntruderProfile::by_name(&self.intruder), self.intruder_length) {
            (Some(p), None) => p,
            (Some(p), Some(len)) => IntruderProfile::new(p.label, len)?,
            (None, Some(len)) => IntruderProfile::new(self.intruder.clone(), len)?,
            (None, None) => bail!(
                "scenario {}: unknown intruder `{}`, use hexarotor, vtol or bell407, or give intruder_length",
                self.label,
                self.intruder
            ),
        };
        let s = Scenario {
            horizon: self.horizon,
            duration: self.duration,
            environment_factor: self.environment_factor,
            initial_range: self.initial_range,
            corridor_extent: self.corridor_extent,
            lateral_extent: self.lateral_extent,
            altitude_offset: self.altitude_offset,
            altitude: self.altitude,
            d_thresh: self.d_thresh,
            goal_margin: self.goal_margin,
            bounds: ControlBounds {
                min: ControlInput::new(self.accel_min, self.turn_rate_min),
                max: ControlInput::new(self.accel_max, self.turn_rate_max),
            },
            sensing: self.sensing,
            ..Scenario::new(self.label.clone(), self.geometry, self.ownship_speed, self.intruder_speed, profile)
        };
        s.validate()?;
        Ok(s)
    }
}

impl CameraSpec {
    pub fn to_camera(&self, id: u8) -> Result<CameraModel<f64>> {
        let cam = CameraModel::from_fov(
            id,
            self.mount_yaw_deg.to_radians(),
            self.mount_pitch_deg.to_radians(),
            self.hfov_deg.to_radians(),
            self.vfov_deg.to_radians(),
            self.width_px,
            self.height_px,
        )
        .with_context(|| format!("[[rig]] camera {id}"))?;
        Ok(cam)
    }
}

impl ScenarioFile {
    /// Parses and validates scenario file text; `origin` names it in errors.
    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).with_context(|| format!("failed to parse {origin}"))?;
        file.validate().with_context(|| format!("invalid scenario file {origin}"))?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse_str(&text, &path.display().to_string())
    }

    /// Loads a file path or, failing that, a bundled preset name such as `e1`.
    pub fn resolve(source: &str) -> Result<Self> {
        let path = Path::new(source);
        if path.exists() {
            return Self::load(path);
        }
        match preset_source(source) {
            Some(text) => Self::parse_str(text, &format!("preset {}", source.to_ascii_uppercase())),
            None => bail!(
                "no scenario file `{source}` and no preset of that name (presets: {})",
                preset_names().collect::<Vec<_>>().join(", ")
            ),
        }
    }

    pub fn from_scenarios(scenarios: &[Scenario]) -> Self {
        Self {
            detection: DetectionSpec::default(),
            cbf: CbfSpec::default(),
            rates: RatesSpec::default(),
            scenarios: scenarios.iter().map(ScenarioSpec::from_scenario).collect(),
            rig: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            bail!("at least one [[scenario]] is required");
        }
        let mut seen = std::collections::BTreeSet::new();
        for spec in &self.scenarios {
            if !seen.insert(spec.label.as_str()) {
                bail!("duplicate scenario label `{}`", spec.label);
            }
        }
        self.scenarios()?;
        self.sim_config()?;
        Ok(())
    }

    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        self.scenarios.iter().map(ScenarioSpec::to_scenario).collect()
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let detection = self.detection.to_model()?;
        let rates = RateConfig::from_hz(self.rates.base_hz, self.rates.sensor_hz, self.rates.fusion_hz, self.rates.control_hz)
            .context("[rates]")?;
        let cbf =
            CbfParameters { c: self.cbf.c, n: self.cbf.n, k: self.cbf.k, lambda: self.cbf.lambda, ..CbfParameters::default() };
        cbf.validate().context("[cbf]")?;
        let mut cfg = SimConfig { fusion: FusionConfig::matched_to(&detection), detection, cbf, rates, ..SimConfig::default() };
        if let Some(rig) = &self.rig {
            if rig.len() > usize::from(u8::MAX) {
                bail!("[[rig]] has more than 255 cameras");
            }
            cfg.rig = rig.iter().enumerate().map(|(i, c)| c.to_camera(i as u8)).collect::<Result<_>>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every field written out explicitly, in a fixed order.
    pub fn to_canonical_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// The scenarios in a scenario file, validated.
pub fn parse_scenario_file(path: &Path) -> Result<Vec<Scenario>> {
    ScenarioFile::load(path)?.scenarios()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[scenario]]
label = "X"
geometry = "crossing"
ownship_speed = 10.0
intruder_speed = 5.0
intruder = "hexarotor"
"#;

    #[test]
    fn minimal_file_fills_defaults() {
        let f = ScenarioFile::parse_str(MINIMAL, "test").unwrap();
        let s = &f.scenarios().unwrap()[0];
        let expect = Scenario::new("X", EncounterGeometry::Crossing, 10.0, 5.0, IntruderProfile::hexarotor());
        assert_eq!(*s, expect);
        assert_eq!(f.sim_config().unwrap(), SimConfig::default());
    }

    #[test]
    fn unknown_geometry_and_negative_speed_are_rejected() {
        let bad = MINIMAL.replace("crossing", "spiral");
        let err = format!("{:#}", ScenarioFile::parse_str(&bad, "test").unwrap_err());
        assert!(err.contains("unknown geometry `spiral`"), "{err}");
        assert!(err.contains("line 4"), "{err}");

        let bad = MINIMAL.replace("intruder_speed = 5.0", "intruder_speed = -5.0");
        let err = format!("{:#}", ScenarioFile::parse_str(&bad, "test").unwrap_err());
        assert!(err.contains("non-negative"), "{err}");
        assert!(err.contains("line 6"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{MINIMAL}wingspan = 3.0\n");
        let err = format!("{:#}", ScenarioFile::parse_str(&bad, "test").unwrap_err());
        assert!(err.contains("wingspan"), "{err}");
        let bad = format!("{MINIMAL}[cbf]\ngamma = 1.0\n");
        assert!(ScenarioFile::parse_str(&bad, "test").is_err());
    }

    #[test]
    fn custom_intruder_needs_a_length() {
        let bad = MINIMAL.replace("hexarotor", "glider");
        assert!(ScenarioFile::parse_str(&bad, "test").is_err());
        let ok = format!("{}intruder_length = 2.5\n", MINIMAL.replace("hexarotor", "glider"));
        let f = ScenarioFile::parse_str(&ok, "test").unwrap();
        assert_eq!(f.scenarios().unwrap()[0].profile.length, 2.5);
    }

    #[test]
    fn rates_must_divide_base() {
        let bad = format!("{MINIMAL}[rates]\nsensor_hz = 7\n");
        let err = format!("{:#}", ScenarioFile::parse_str(&bad, "test").unwrap_err());
        assert!(err.contains("sensor rate 7 Hz"), "{err}");
    }

    #[test]
    fn labels_are_path_safe() {
        let bad = MINIMAL.replace("label = \"X\"", "label = \"../x\"");
        assert!(ScenarioFile::parse_str(&bad, "test").is_err());
    }

    #[test]
    fn rig_section_builds_cameras() {
        let text = format!(
            "{MINIMAL}[[rig]]\nmount_yaw_deg = -30.0\nhfov_deg = 60.0\nvfov_deg = 48.0\nwidth_px = 1224\nheight_px = 1024\n\
             [[rig]]\nmount_yaw_deg = 30.0\nhfov_deg = 60.0\nvfov_deg = 48.0\nwidth_px = 1224\nheight_px = 1024\n"
        );
        let cfg = ScenarioFile::parse_str(&text, "test").unwrap().sim_config().unwrap();
        assert_eq!(cfg.rig.len(), 2);
        assert_eq!(cfg.rig[1].id, 1);
        assert!((cfg.rig[1].mount_yaw - 30f64.to_radians()).abs() < 1e-15);
    }
}
