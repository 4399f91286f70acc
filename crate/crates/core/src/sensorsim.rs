//! Synthetic multi-camera intruder detector.
//!
//! Stands in for a learned detector and image-level tracker: each camera
//! that sees the intruder large enough reports at most one track per frame,
//! with multiplicative range noise and additive bearing noise.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{IntruderState, OwnshipState};
use crate::error::{DaaError, Result};
use crate::frames::{project_to_camera, CameraModel, PixelPoint};
use crate::scalar::{lit, Scalar};

/// Focal length (px) for which a 14 px threshold gives `d_max = 163.2 l`.
pub const DETECTION_FOCAL_PX: f64 = 163.2 * 14.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionModel {
    /// Smallest apparent size that yields a reliable track, pixels.
    pub min_pixels: f64,
    pub p_track_at_threshold: f64,
    /// Range noise standard deviation as a fraction of the true range.
    pub range_noise_rel: f64,
    /// Bearing noise standard deviation, radians.
    pub angle_noise: f64,
    pub p_detect_above_horizon: f64,
    pub p_detect_below_horizon: f64,
    /// 1.0 is clear weather; lower values degrade detection probability.
    pub environment_factor: f64,
    /// Focal length used for apparent-size computations, pixels.
    pub focal_px: f64,
    /// Expected false detections per camera per frame.
    pub clutter_rate: f64,
    /// Lag-one correlation of successive per-camera detection outcomes
    /// above the horizon; 0 gives independent frames.
    pub detection_persistence_above: f64,
    /// Same, below the horizon, where ground clutter makes misses come in runs.
    pub detection_persistence_below: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            min_pixels: 14.0,
            p_track_at_threshold: 0.95,
            range_noise_rel: 0.10,
            angle_noise: 0.3f64.to_radians(),
            p_detect_above_horizon: 0.95,
            p_detect_below_horizon: 0.5,
            environment_factor: 1.0,
            focal_px: DETECTION_FOCAL_PX,
            clutter_rate: 0.0,
            detection_persistence_above: 0.0,
            detection_persistence_below: 0.9,
        }
    }
}

impl DetectionModel {
    /// Zero noise, certain detection, no clutter.
    pub fn noiseless() -> Self {
        Self {
            range_noise_rel: 0.0,
            angle_noise: 0.0,
            p_detect_above_horizon: 1.0,
            p_detect_below_horizon: 1.0,
            detection_persistence_below: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(DaaError::InvalidParameter(format!("{name} = {p} is not a probability")))
            }
        };
        prob("p_track_at_threshold", self.p_track_at_threshold)?;
        prob("p_detect_above_horizon", self.p_detect_above_horizon)?;
        prob("p_detect_below_horizon", self.p_detect_below_horizon)?;
        prob("environment_factor", self.environment_factor)?;
        for (name, r) in [
            ("detection_persistence_above", self.detection_persistence_above),
            ("detection_persistence_below", self.detection_persistence_below),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(DaaError::InvalidParameter(format!("{name} = {r} must lie in [0, 1)")));
            }
        }
        if !(self.min_pixels > 0.0) {
            return Err(DaaError::InvalidParameter("min_pixels must be positive".into()));
        }
        if !(self.range_noise_rel >= 0.0 && self.angle_noise >= 0.0 && self.clutter_rate >= 0.0) {
            return Err(DaaError::InvalidParameter("noise levels must be non-negative".into()));
        }
        if !(self.focal_px > 0.0) {
            return Err(DaaError::InvalidParameter("focal_px must be positive".into()));
        }
        Ok(())
    }

    pub fn detection_probability(&self, side: HorizonSide) -> f64 {
        let p = match side {
            HorizonSide::Above => self.p_detect_above_horizon,
            HorizonSide::Below => self.p_detect_below_horizon,
        };
        p * self.environment_factor
    }

    pub fn detection_persistence(&self, side: HorizonSide) -> f64 {
        match side {
            HorizonSide::Above => self.detection_persistence_above,
            HorizonSide::Below => self.detection_persistence_below,
        }
    }
}

/// Previous detection outcome of each camera.
///
/// Outcomes form a two-state Markov chain with stationary probability `p`
/// and lag-one correlation `r`: after a detection the next frame detects
/// with `p + r (1 - p)`, after a miss with `p (1 - r)`. The chain advances
/// every frame whether or not the intruder is in view.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DetectorMemory {
    last: Vec<Option<bool>>,
}

impl DetectorMemory {
    pub fn new() -> Self {
        Self::default()
    }

    fn conditional(&self, cam: usize, p: f64, r: f64) -> f64 {
        match self.last.get(cam).copied().flatten() {
            None => p,
            Some(true) => p + r * (1.0 - p),
            Some(false) => p * (1.0 - r),
        }
    }

    fn record(&mut self, cam: usize, hit: bool) {
        if self.last.len() <= cam {
            self.last.resize(cam + 1, None);
        }
        self.last[cam] = Some(hit);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonSide {
    Above,
    Below,
}

impl HorizonSide {
    /// Above iff the intruder is higher than the ownship (smaller down).
    pub fn of<T: Scalar>(own: &OwnshipState<T>, intr: &IntruderState<T>) -> Self {
        if intr.position.down < own.position.down {
            HorizonSide::Above
        } else {
            HorizonSide::Below
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntruderProfile {
    /// Frontal diagonal length, meters.
    pub length: f64,
    pub label: String,
}

impl IntruderProfile {
    pub fn new(label: impl Into<String>, length: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(DaaError::InvalidParameter(format!("profile length {length} must be positive")));
        }
        Ok(Self { length, label: label.into() })
    }

    /// Hexarotor intruder whose reliable detection range is 287 m.
    pub fn hexarotor() -> Self {
        Self { length: 287.0 / 163.2, label: "hexarotor".into() }
    }

    /// Quad-plane VTOL intruder whose reliable detection range is 525 m.
    pub fn vtol() -> Self {
        Self { length: 525.0 / 163.2, label: "vtol".into() }
    }

    pub fn bell_407() -> Self {
        Self { length: 4.27, label: "bell407".into() }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "hexarotor" | "multirotor" | "m600" => Some(Self::hexarotor()),
            "vtol" => Some(Self::vtol()),
            "bell407" | "bell_407" | "bell-407" => Some(Self::bell_407()),
            _ => None,
        }
    }
}

/// One synthetic per-camera detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTrack<T> {
    pub camera_id: u8,
    pub pixel: PixelPoint<T>,
    pub predicted_range: T,
    pub apparent_size: T,
    pub timestamp: T,
    pub track_id: u32,
}

/// Apparent size in pixels of an object of length `length` at range `range`.
pub fn apparent_pixels<T: Scalar>(length: T, range: T, focal: T) -> Result<T> {
    if !(range > T::zero()) {
        return Err(DaaError::NonPositiveRange(range.to_f64_lossy()));
    }
    Ok(focal * length / range)
}

/// Largest range at which the profile still spans `min_pixels`.
pub fn max_detection_range(profile: &IntruderProfile, model: &DetectionModel, focal: f64) -> f64 {
    focal * profile.length / model.min_pixels
}

pub fn reaction_time(d_max: f64, closure: f64) -> Result<f64> {
    if !(closure > 0.0) {
        return Err(DaaError::NonPositiveClosure(closure));
    }
    Ok(d_max / closure)
}

/// Random draws consumed per camera per frame, independent of visibility,
/// so that episodes sharing a seed see identical noise.
const DRAWS_PER_CAMERA: usize = 4;

/// Draws this frame's detections with independent outcomes per frame.
///
/// `rng` supplies the detection and noise draws; `clutter_rng` is only
/// touched when the clutter rate is positive.
#[allow(clippy::too_many_arguments)]
pub fn sense<T: Scalar, R: Rng + ?Sized, C: Rng + ?Sized>(
    own: &OwnshipState<T>,
    intr: &IntruderState<T>,
    profile: &IntruderProfile,
    rig: &[CameraModel<T>],
    model: &DetectionModel,
    rng: &mut R,
    clutter_rng: &mut C,
    t: T,
) -> Vec<ImageTrack<T>> {
    sense_with_memory(own, intr, profile, rig, model, &mut DetectorMemory::new(), rng, clutter_rng, t)
}

/// Like [`sense`], carrying detection outcomes across frames in `memory`.
#[allow(clippy::too_many_arguments)]
pub fn sense_with_memory<T: Scalar, R: Rng + ?Sized, C: Rng + ?Sized>(
    own: &OwnshipState<T>,
    intr: &IntruderState<T>,
    profile: &IntruderProfile,
    rig: &[CameraModel<T>],
    model: &DetectionModel,
    memory: &mut DetectorMemory,
    rng: &mut R,
    clutter_rng: &mut C,
    t: T,
) -> Vec<ImageTrack<T>> {
    let rel = intr.position - own.position;
    let range = rel.norm();
    let side = HorizonSide::of(own, intr);
    let p_detect = model.detection_probability(side);
    let persistence = model.detection_persistence(side);
    let mut out = Vec::new();
    for (i, cam) in rig.iter().enumerate() {
        let mut draws = [0.0f64; DRAWS_PER_CAMERA];
        draws[0] = rng.random::<f64>();
        for d in draws.iter_mut().skip(1) {
            *d = StandardNormal.sample(rng);
        }
        let hit = draws[0] < memory.conditional(i, p_detect, persistence);
        memory.record(i, hit);
        if !(range > T::zero()) {
            continue;
        }
        let (px, visible) = project_to_camera(&rel, cam, own.heading);
        if !visible {
            continue;
        }
        let size = match apparent_pixels(lit::<T>(profile.length), range, lit(model.focal_px)) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if size < lit(model.min_pixels) || !hit {
            continue;
        }
        let sigma_px = model.angle_noise * cam.focal.to_f64_lossy();
        let w = cam.width as f64;
        let h = cam.height as f64;
        let u = (px.u.to_f64_lossy() + draws[1] * sigma_px).clamp(0.0, w);
        let v = (px.v.to_f64_lossy() + draws[2] * sigma_px).clamp(0.0, h);
        let scale = (1.0 + draws[3] * model.range_noise_rel).max(0.01);
        out.push(ImageTrack {
            camera_id: cam.id,
            pixel: PixelPoint { u: lit(u), v: lit(v) },
            predicted_range: range * lit(scale),
            apparent_size: size,
            timestamp: t,
            track_id: u32::from(cam.id) * 1000 + 1,
        });
    }
    if model.clutter_rate > 0.0 {
        out.extend(clutter(rig, model, clutter_rng, t));
    }
    out
}

fn clutter<T: Scalar, C: Rng + ?Sized>(rig: &[CameraModel<T>], model: &DetectionModel, rng: &mut C, t: T) -> Vec<ImageTrack<T>> {
    let Ok(poisson) = Poisson::new(model.clutter_rate) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for cam in rig {
        let k = poisson.sample(rng) as u32;
        for j in 0..k {
            let u = rng.random::<f64>() * cam.width as f64;
            let v = rng.random::<f64>() * cam.height as f64;
            let range = rng.random_range(20.0..1000.0);
            out.push(ImageTrack {
                camera_id: cam.id,
                pixel: PixelPoint { u: lit(u), v: lit(v) },
                predicted_range: lit(range),
                apparent_size: lit(model.min_pixels),
                timestamp: t,
                track_id: u32::from(cam.id) * 1000 + 2 + j,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{default_rig, NedVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn own() -> OwnshipState<f64> {
        OwnshipState { position: NedVector::new(0.0, 0.0, -50.0), speed: 10.0, heading: 0.0 }
    }

    fn intruder_at(n: f64, e: f64, d: f64) -> IntruderState<f64> {
        IntruderState { position: NedVector::new(n, e, d), speed: 10.0, heading: std::f64::consts::PI }
    }

    #[test]
    fn apparent_size_examples() {
        assert_eq!(apparent_pixels(1.0, 50.0, 50.0).unwrap(), 1.0);
        let bell = IntruderProfile::bell_407();
        let px = apparent_pixels(bell.length, 163.2 * bell.length, DETECTION_FOCAL_PX).unwrap();
        assert!((px - 14.0).abs() < 1e-9);
        let px: f64 = apparent_pixels(2.0, 100.0, 2284.8).unwrap();
        assert!((px - 45.696).abs() < 1e-9);
        assert!(apparent_pixels(1.0, 0.0, 10.0).is_err());
    }

    #[test]
    fn detection_range_examples() {
        let m = DetectionModel::default();
        let f = m.focal_px;
        assert!((max_detection_range(&IntruderProfile::hexarotor(), &m, f) - 287.0).abs() < 1e-9);
        assert!((max_detection_range(&IntruderProfile::vtol(), &m, f) - 525.0).abs() < 1e-9);
        let bell = max_detection_range(&IntruderProfile::bell_407(), &m, f);
        assert!((bell - 696.864).abs() < 1e-9);
    }

    #[test]
    fn reaction_time_examples() {
        assert!((reaction_time(287.0, 20.0).unwrap() - 14.35).abs() < 1e-12);
        assert!((reaction_time(525.0, 40.0).unwrap() - 13.125).abs() < 1e-12);
        assert_eq!(reaction_time(100.0, 100.0).unwrap(), 1.0);
        assert!(reaction_time(100.0, 0.0).is_err());
    }

    #[test]
    fn nothing_behind_or_beyond_range() {
        let rig = default_rig::<f64>();
        let m = DetectionModel::noiseless();
        let p = IntruderProfile::hexarotor();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut crng = ChaCha8Rng::seed_from_u64(2);
        let behind = sense(&own(), &intruder_at(-200.0, 0.0, -50.0), &p, &rig, &m, &mut rng, &mut crng, 0.0);
        assert!(behind.is_empty());
        let far = sense(&own(), &intruder_at(300.0, 0.0, -50.0), &p, &rig, &m, &mut rng, &mut crng, 0.0);
        assert!(far.is_empty());
    }

    #[test]
    fn noiseless_dead_ahead() {
        let rig = default_rig::<f64>();
        let m = DetectionModel::noiseless();
        let p = IntruderProfile::hexarotor();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut crng = ChaCha8Rng::seed_from_u64(2);
        let tracks = sense(&own(), &intruder_at(100.0, 0.0, -50.0), &p, &rig, &m, &mut rng, &mut crng, 0.5);
        // dead ahead lies in the overlap of the two central cameras
        let covering: Vec<_> = rig.iter().filter(|c| project_to_camera(&NedVector::new(100.0, 0.0, 0.0), c, 0.0).1).collect();
        assert_eq!(tracks.len(), covering.len());
        assert!(!tracks.is_empty());
        for (tk, cam) in tracks.iter().zip(&covering) {
            assert_eq!(tk.camera_id, cam.id);
            assert!((tk.predicted_range - 100.0).abs() < 1e-12);
            let (px, _) = project_to_camera(&NedVector::new(100.0, 0.0, 0.0), cam, 0.0);
            assert!((tk.pixel.u - px.u).abs() < 1e-9 && (tk.pixel.v - px.v).abs() < 1e-9);
            assert_eq!(tk.timestamp, 0.5);
        }
    }

    #[test]
    fn same_seed_same_detections() {
        let rig = default_rig::<f64>();
        let m = DetectionModel::default();
        let p = IntruderProfile::hexarotor();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut crng = ChaCha8Rng::seed_from_u64(seed + 1);
            (0..50)
                .flat_map(|k| sense(&own(), &intruder_at(150.0, 10.0, -60.0), &p, &rig, &m, &mut rng, &mut crng, k as f64))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn clutter_appears_when_enabled() {
        let rig = default_rig::<f64>();
        let m = DetectionModel { clutter_rate: 2.0, ..DetectionModel::noiseless() };
        let p = IntruderProfile::hexarotor();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut crng = ChaCha8Rng::seed_from_u64(2);
        let n: usize =
            (0..20).map(|_| sense(&own(), &intruder_at(-500.0, 0.0, -50.0), &p, &rig, &m, &mut rng, &mut crng, 0.0).len()).sum();
        assert!(n > 100);
    }

    #[test]
    fn model_validation() {
        assert!(DetectionModel::default().validate().is_ok());
        assert!(DetectionModel { environment_factor: 1.5, ..Default::default() }.validate().is_err());
        assert!(DetectionModel { min_pixels: 0.0, ..Default::default() }.validate().is_err());
        assert!(IntruderProfile::new("x", -1.0).is_err());
        assert_eq!(IntruderProfile::by_name("VTOL"), Some(IntruderProfile::vtol()));
    }
}
