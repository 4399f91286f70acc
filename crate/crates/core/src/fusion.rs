//! Multi-view fusion of per-camera image tracks into 3D intruder tracks.
//!
//! Every image track is unprojected with its predicted range, rotated into
//! the ownship-centered NED frame and expressed as (range, azimuth,
//! elevation). Measurements are associated to existing tracks by angular
//! distance. Each track runs two decoupled constant-velocity Kalman filters:
//! one over (azimuth, elevation) and one over range.

use serde::{Deserialize, Serialize};

use crate::dynamics::OwnshipState;
use crate::error::{DaaError, Result};
use crate::frames::{
    camera_to_ned, camera_unproject, los_angle_alpha, ned_to_spherical, wrap_angle, CameraModel, SphericalTrack,
};
use crate::linalg::{self, Mat};
use crate::scalar::{lit, Scalar};
use crate::sensorsim::{DetectionModel, ImageTrack};

/// Constant-velocity filter over `M` observed components and their rates.
/// The state is laid out as `[p_0..p_M, r_0..r_M]` with `N == 2 * M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvFilter<T, const N: usize, const M: usize> {
    pub mean: [T; N],
    pub cov: Mat<T, N, N>,
}

/// Mean `(azimuth, elevation, azimuth rate, elevation rate)`.
pub type AngleFilterState<T> = CvFilter<T, 4, 2>;
/// Mean `(range, range rate)`.
pub type RangeFilterState<T> = CvFilter<T, 2, 1>;

impl<T: Scalar, const N: usize, const M: usize> CvFilter<T, N, M> {
    pub fn new(mean: [T; N], cov: Mat<T, N, N>) -> Self {
        debug_assert_eq!(N, 2 * M);
        Self { mean, cov }
    }

    fn transition(dt: T) -> Mat<T, N, N> {
        let mut f = linalg::identity::<T, N>();
        for i in 0..M {
            f[i][i + M] = dt;
        }
        f
    }

    fn observation() -> Mat<T, M, N> {
        let mut h = linalg::zeros::<T, M, N>();
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = T::one();
        }
        h
    }

    /// Propagates mean and covariance; `q_rate` is process noise per second.
    pub fn predict(&self, dt: T, q_rate: &[T; N]) -> Self {
        if dt == T::zero() {
            return *self;
        }
        let f = Self::transition(dt);
        let mean = linalg::mul_vec(&f, &self.mean);
        let mut q = [T::zero(); N];
        for i in 0..N {
            q[i] = q_rate[i] * dt;
        }
        let cov = linalg::add(&linalg::mul(&linalg::mul(&f, &self.cov), &linalg::transpose(&f)), &linalg::diag(q));
        Self { mean, cov: linalg::symmetrize(&cov) }
    }

    /// Linear update on the observed components with Joseph-form covariance.
    /// `wrap` marks innovation components that are angles.
    pub fn update(&self, z: &[T; M], r: &Mat<T, M, M>, wrap: &[bool; M]) -> Result<Self> {
        if linalg::cholesky(r).is_none() || !linalg::is_symmetric(r, lit(1e-12)) {
            return Err(DaaError::NonSpdNoise);
        }
        let h = Self::observation();
        let ht = linalg::transpose(&h);
        let mut y = [T::zero(); M];
        for i in 0..M {
            y[i] = z[i] - self.mean[i];
            if wrap[i] {
                y[i] = wrap_angle(y[i]);
            }
        }
        let s = linalg::add(&linalg::mul(&linalg::mul(&h, &self.cov), &ht), r);
        let s_inv = linalg::spd_inverse(&s).ok_or(DaaError::NonSpdNoise)?;
        let k = linalg::mul(&linalg::mul(&self.cov, &ht), &s_inv);
        let dx = linalg::mul_vec(&k, &y);
        let mut mean = self.mean;
        for i in 0..N {
            mean[i] = mean[i] + dx[i];
        }
        let i_kh = linalg::sub(&linalg::identity::<T, N>(), &linalg::mul(&k, &h));
        let joseph = linalg::mul(&linalg::mul(&i_kh, &self.cov), &linalg::transpose(&i_kh));
        let krk = linalg::mul(&linalg::mul(&k, r), &linalg::transpose(&k));
        Ok(Self { mean, cov: linalg::symmetrize(&linalg::add(&joseph, &krk)) })
    }

    pub fn is_spd(&self) -> bool {
        linalg::is_symmetric(&self.cov, lit(1e-12)) && linalg::cholesky(&self.cov).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedIntruderTrack<T> {
    pub id: u32,
    pub angles: AngleFilterState<T>,
    pub range: RangeFilterState<T>,
    pub last_update: T,
    pub hits: u32,
}

impl<T: Scalar> FusedIntruderTrack<T> {
    pub fn azimuth(&self) -> T {
        self.angles.mean[0]
    }

    pub fn elevation(&self) -> T {
        self.angles.mean[1]
    }

    /// Horizontal range and its rate, from the 3D range and elevation.
    pub fn horizontal_range(&self) -> (T, T) {
        let (d, d_dot) = (self.range.mean[0], self.range.mean[1]);
        let (phi, phi_dot) = (self.angles.mean[1], self.angles.mean[3]);
        let (s, c) = phi.sin_cos();
        (d * c, d_dot * c - d * s * phi_dot)
    }
}

/// Relative geometry consumed by the safety controller.
///
/// `d` and `d_dot` are horizontal; `alpha = wrap(pi + theta)`. When `valid`
/// is false the other fields carry no information.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelativeGeometry<T> {
    pub d: T,
    pub d_dot: T,
    pub theta: T,
    pub theta_dot: T,
    pub phi: T,
    pub alpha: T,
    pub v_int_north: T,
    pub v_int_east: T,
    pub chi_int: T,
    pub heading_valid: bool,
    pub valid: bool,
    pub track_id: u32,
}

impl<T: Scalar> RelativeGeometry<T> {
    pub fn invalid() -> Self {
        Self {
            d: T::zero(),
            d_dot: T::zero(),
            theta: T::zero(),
            theta_dot: T::zero(),
            phi: T::zero(),
            alpha: T::zero(),
            v_int_north: T::zero(),
            v_int_east: T::zero(),
            chi_int: T::zero(),
            heading_valid: false,
            valid: false,
            track_id: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Association gate on angular distance, radians.
    pub gate: f64,
    /// Angle filter process noise per second (theta, phi, theta rate, phi rate).
    pub q_angles: [f64; 4],
    /// Range filter process noise per second (range, range rate).
    pub q_range: [f64; 2],
    /// Bearing measurement standard deviation, radians.
    pub angle_sigma: f64,
    /// Range measurement standard deviation as a fraction of range.
    pub range_sigma_rel: f64,
    /// Lower bounds keeping measurement noise positive-definite.
    pub min_angle_sigma: f64,
    pub min_range_sigma: f64,
    pub init_rate_sigma: f64,
    pub init_range_rate_sigma: f64,
    pub confirm_hits: u32,
    /// Tracks without an update for longer than this are dropped, seconds.
    pub stale_after: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            gate: 5f64.to_radians(),
            q_angles: [1e-6, 1e-6, 1e-4, 1e-4],
            q_range: [0.5, 2.0],
            angle_sigma: 0.3f64.to_radians(),
            range_sigma_rel: 0.10,
            min_angle_sigma: 1e-4,
            min_range_sigma: 0.05,
            init_rate_sigma: 0.1,
            init_range_rate_sigma: 30.0,
            confirm_hits: 3,
            stale_after: 1.0,
        }
    }
}

impl FusionConfig {
    /// Defaults with measurement noise set to what `model` actually injects.
    pub fn matched_to(model: &DetectionModel) -> Self {
        Self { angle_sigma: model.angle_noise, range_sigma_rel: model.range_noise_rel, ..Self::default() }
    }

    fn angle_noise<T: Scalar>(&self) -> Mat<T, 2, 2> {
        let s = self.angle_sigma.max(self.min_angle_sigma);
        linalg::diag([lit(s * s), lit(s * s)])
    }

    fn range_noise<T: Scalar>(&self, range: T) -> Mat<T, 1, 1> {
        let s = (self.range_sigma_rel * range.to_f64_lossy()).max(self.min_range_sigma);
        [[lit(s * s)]]
    }
}

/// Converts a per-camera image track to an ownship-centered spherical measurement.
pub fn measurement_from_image_track<T: Scalar>(
    tk: &ImageTrack<T>,
    rig: &[CameraModel<T>],
    heading: T,
) -> Result<SphericalTrack<T>> {
    let cam = rig.iter().find(|c| c.id == tk.camera_id).ok_or(DaaError::UnknownCamera(tk.camera_id))?;
    let p = camera_unproject(&tk.pixel, tk.predicted_range, cam)?;
    ned_to_spherical(&camera_to_ned(&p, cam, heading))
}

fn unit_los<T: Scalar>(az: T, el: T) -> [T; 3] {
    let (se, ce) = el.sin_cos();
    let (sa, ca) = az.sin_cos();
    [ce * ca, ce * sa, se]
}

/// Great-circle angle between a measurement direction and a track's current direction.
pub fn angular_distance<T: Scalar>(m: &SphericalTrack<T>, track: &FusedIntruderTrack<T>) -> T {
    let a = unit_los(m.azimuth, m.elevation);
    let b = unit_los(track.azimuth(), track.elevation());
    let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let cn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    cn.atan2(dot)
}

/// Id of the nearest track within `gate`, if any. Tracks must already be
/// predicted to the measurement time.
pub fn associate<T: Scalar>(m: &SphericalTrack<T>, tracks: &[FusedIntruderTrack<T>], gate: T) -> Option<u32> {
    tracks
        .iter()
        .map(|t| (t.id, angular_distance(m, t)))
        .filter(|(_, dist)| *dist <= gate)
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(id, _)| id)
}

pub fn kf_predict<T: Scalar>(track: &FusedIntruderTrack<T>, dt: T, cfg: &FusionConfig) -> FusedIntruderTrack<T> {
    let q_a = cfg.q_angles.map(lit::<T>);
    let q_r = cfg.q_range.map(lit::<T>);
    let mut angles = track.angles.predict(dt, &q_a);
    angles.mean[0] = wrap_angle(angles.mean[0]);
    FusedIntruderTrack { angles, range: track.range.predict(dt, &q_r), ..*track }
}

pub fn kf_update<T: Scalar>(
    track: &FusedIntruderTrack<T>,
    m: &SphericalTrack<T>,
    r_angles: &Mat<T, 2, 2>,
    r_range: &Mat<T, 1, 1>,
) -> Result<FusedIntruderTrack<T>> {
    let mut angles = track.angles.update(&[m.azimuth, m.elevation], r_angles, &[true, false])?;
    angles.mean[0] = wrap_angle(angles.mean[0]);
    let mut range = track.range.update(&[m.range], r_range, &[false])?;
    range.mean[0] = range.mean[0].max(lit(0.1));
    Ok(FusedIntruderTrack { angles, range, ..*track })
}

/// Intruder ground velocity (north, east) from ownship odometry and the
/// track's horizontal polar kinematics.
///
/// With the relative position `p = d (cos theta, sin theta)`, differentiation
/// gives `p' = d' (cos theta, sin theta) + d theta' (-sin theta, cos theta)`
/// and the intruder velocity is the ownship velocity plus `p'`.
pub fn estimate_intruder_velocity<T: Scalar>(own: &OwnshipState<T>, track: &FusedIntruderTrack<T>) -> Result<(T, T)> {
    let (d, d_dot) = track.horizontal_range();
    if !(d > T::zero()) || !d_dot.is_finite() {
        return Err(DaaError::InvalidGeometry);
    }
    let (theta, theta_dot) = (track.angles.mean[0], track.angles.mean[2]);
    let (s, c) = theta.sin_cos();
    let v_own = own.velocity();
    Ok((v_own.north + d_dot * c - d * theta_dot * s, v_own.east + d_dot * s + d * theta_dot * c))
}

pub fn estimate_intruder_heading<T: Scalar>(v_north: T, v_east: T) -> Result<T> {
    if v_north.hypot(v_east) < lit(0.1) {
        return Err(DaaError::HeadingUndefined);
    }
    Ok(v_east.atan2(v_north))
}

/// Track manager for one episode.
#[derive(Debug, Clone)]
pub struct MultiViewFusion<T> {
    pub config: FusionConfig,
    tracks: Vec<FusedIntruderTrack<T>>,
    next_id: u32,
    last_heading: Option<T>,
}

impl<T: Scalar> MultiViewFusion<T> {
    pub fn new(config: FusionConfig) -> Self {
        Self { config, tracks: Vec::new(), next_id: 1, last_heading: None }
    }

    pub fn tracks(&self) -> &[FusedIntruderTrack<T>] {
        &self.tracks
    }

    /// Fuses one image track captured while the ownship had `heading`.
    /// Returns the id of the track that absorbed the measurement.
    pub fn ingest(&mut self, tk: &ImageTrack<T>, rig: &[CameraModel<T>], heading: T) -> Result<u32> {
        let m = measurement_from_image_track(tk, rig, heading)?;
        let t = tk.timestamp;
        // only tracks not ahead of the measurement are candidates
        let predicted: Vec<FusedIntruderTrack<T>> = self
            .tracks
            .iter()
            .filter(|tr| tr.last_update <= t)
            .map(|tr| kf_predict(tr, t - tr.last_update, &self.config))
            .collect();
        let r_angles = self.config.angle_noise::<T>();
        match associate(&m, &predicted, lit(self.config.gate)) {
            Some(id) => {
                let pred = predicted.iter().find(|p| p.id == id).expect("associated track exists");
                let r_range = self.config.range_noise(pred.range.mean[0]);
                let mut updated = kf_update(pred, &m, &r_angles, &r_range)?;
                updated.last_update = t;
                updated.hits += 1;
                let slot = self.tracks.iter_mut().find(|p| p.id == id).expect("track exists");
                *slot = updated;
                Ok(id)
            }
            None => {
                let id = self.next_id;
                self.next_id += 1;
                self.tracks.push(self.initiate(id, &m, t));
                Ok(id)
            }
        }
    }

    fn initiate(&self, id: u32, m: &SphericalTrack<T>, t: T) -> FusedIntruderTrack<T> {
        let c = &self.config;
        let sa = c.angle_sigma.max(c.min_angle_sigma);
        let sr = (c.range_sigma_rel * m.range.to_f64_lossy()).max(c.min_range_sigma);
        let angles = AngleFilterState::new(
            [m.azimuth, m.elevation, T::zero(), T::zero()],
            linalg::diag([sa * sa, sa * sa, c.init_rate_sigma.powi(2), c.init_rate_sigma.powi(2)].map(lit::<T>)),
        );
        let range =
            RangeFilterState::new([m.range, T::zero()], linalg::diag([sr * sr, c.init_range_rate_sigma.powi(2)].map(lit::<T>)));
        FusedIntruderTrack { id, angles, range, last_update: t, hits: 1 }
    }

    /// Drops tracks not updated within the staleness window; returns how many.
    pub fn prune(&mut self, t: T) -> usize {
        let before = self.tracks.len();
        let stale = lit::<T>(self.config.stale_after);
        self.tracks.retain(|tr| t - tr.last_update <= stale);
        before - self.tracks.len()
    }

    /// Geometry of the nearest fresh confirmed track, predicted to `t`.
    pub fn publish(&mut self, own: &OwnshipState<T>, t: T) -> RelativeGeometry<T> {
        let stale = lit::<T>(self.config.stale_after);
        let best = self
            .tracks
            .iter()
            .filter(|tr| tr.hits >= self.config.confirm_hits && tr.last_update <= t && t - tr.last_update <= stale)
            .map(|tr| kf_predict(tr, t - tr.last_update, &self.config))
            .min_by(|a, b| a.horizontal_range().0.partial_cmp(&b.horizontal_range().0).unwrap_or(std::cmp::Ordering::Equal));
        let Some(tr) = best else {
            return RelativeGeometry::invalid();
        };
        let (d, d_dot) = tr.horizontal_range();
        let Ok((vn, ve)) = estimate_intruder_velocity(own, &tr) else {
            return RelativeGeometry::invalid();
        };
        let (chi, heading_valid) = match estimate_intruder_heading(vn, ve) {
            Ok(h) => {
                self.last_heading = Some(h);
                (h, true)
            }
            Err(_) => (self.last_heading.unwrap_or_else(T::zero), false),
        };
        let theta = tr.azimuth();
        RelativeGeometry {
            d,
            d_dot,
            theta,
            theta_dot: tr.angles.mean[2],
            phi: tr.elevation(),
            alpha: los_angle_alpha(theta),
            v_int_north: vn,
            v_int_east: ve,
            chi_int: chi,
            heading_valid,
            valid: true,
            track_id: tr.id,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{default_rig, project_to_camera, NedVector};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn track(id: u32, theta: f64, phi: f64, d: f64, d_dot: f64) -> FusedIntruderTrack<f64> {
        FusedIntruderTrack {
            id,
            angles: AngleFilterState::new([theta, phi, 0.0, 0.0], linalg::diag([1e-4, 1e-4, 1e-2, 1e-2])),
            range: RangeFilterState::new([d, d_dot], linalg::diag([25.0, 100.0])),
            last_update: 0.0,
            hits: 3,
        }
    }

    fn sph(range: f64, azimuth: f64, elevation: f64) -> SphericalTrack<f64> {
        SphericalTrack { range, azimuth, elevation }
    }

    #[test]
    fn measurement_examples() {
        let rig = vec![CameraModel::<f64>::from_fov(3, 0.0, 0.0, 1.0, 0.8, 1224, 1024).unwrap()];
        let tk = ImageTrack {
            camera_id: 3,
            pixel: rig[0].principal_point(),
            predicted_range: 100.0,
            apparent_size: 20.0,
            timestamp: 0.0,
            track_id: 1,
        };
        let m = measurement_from_image_track(&tk, &rig, 0.0).unwrap();
        assert!((m.range - 100.0).abs() < 1e-12 && m.azimuth.abs() < 1e-12 && m.elevation.abs() < 1e-12);
        let m = measurement_from_image_track(&tk, &rig, FRAC_PI_2).unwrap();
        assert!((m.azimuth - FRAC_PI_2).abs() < 1e-12);
        let bad = ImageTrack { camera_id: 9, ..tk };
        assert_eq!(measurement_from_image_track(&bad, &rig, 0.0), Err(DaaError::UnknownCamera(9)));
    }

    #[test]
    fn measurement_inverts_projection() {
        let rig = default_rig::<f64>();
        let p = NedVector::new(120.0, 75.0, -14.0);
        let heading = 0.4;
        for cam in &rig {
            let (px, vis) = project_to_camera(&p, cam, heading);
            if !vis {
                continue;
            }
            let tk = ImageTrack {
                camera_id: cam.id,
                pixel: px,
                predicted_range: p.norm(),
                apparent_size: 20.0,
                timestamp: 0.0,
                track_id: 1,
            };
            let m = measurement_from_image_track(&tk, &rig, heading).unwrap();
            let truth = ned_to_spherical(&p).unwrap();
            assert!((m.azimuth - truth.azimuth).abs() < 1e-9);
            assert!((m.elevation - truth.elevation).abs() < 1e-9);
        }
    }

    #[test]
    fn angular_distance_examples() {
        let t = track(1, 0.0, 0.0, 100.0, 0.0);
        assert_eq!(angular_distance(&sph(5.0, 0.0, 0.0), &t), 0.0);
        assert!((angular_distance(&sph(5.0, PI, 0.0), &t) - PI).abs() < 1e-12);
        assert!((angular_distance(&sph(5.0, 0.1, 0.0), &t) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn association_examples() {
        let m = sph(100.0, 0.0, 0.0);
        assert_eq!(associate(&m, &[], 0.09), None);
        assert_eq!(associate(&m, &[track(4, 0.0, 0.0, 1.0, 0.0)], 0.09), Some(4));
        let tracks = [track(1, 0.04, 0.0, 1.0, 0.0), track(2, -0.02, 0.0, 1.0, 0.0)];
        assert_eq!(associate(&m, &tracks, 0.09), Some(2));
        assert_eq!(associate(&m, &tracks, 0.01), None);
    }

    #[test]
    fn predict_examples() {
        let cfg = FusionConfig::default();
        let t = track(1, 0.0, 0.0, 100.0, -20.0);
        assert_eq!(kf_predict(&t, 0.0, &cfg), t);
        let p = kf_predict(&t, 0.5, &cfg);
        assert!((p.range.mean[0] - 90.0).abs() < 1e-12);
        assert!(linalg::trace(&p.angles.cov) > linalg::trace(&t.angles.cov));
        assert!(linalg::trace(&p.range.cov) > linalg::trace(&t.range.cov));
        // azimuth wraps
        let mut w = track(1, 3.1, 0.0, 100.0, 0.0);
        w.angles.mean[2] = 0.2;
        assert!(kf_predict(&w, 1.0, &cfg).azimuth() < 0.0);
    }

    #[test]
    fn update_with_tiny_noise_snaps_to_measurement() {
        let t = track(1, 0.1, 0.05, 100.0, 0.0);
        let m = sph(80.0, 0.2, -0.05);
        let u = kf_update(&t, &m, &linalg::diag([1e-14, 1e-14]), &[[1e-14]]).unwrap();
        assert!((u.azimuth() - 0.2).abs() < 1e-8);
        assert!((u.elevation() + 0.05).abs() < 1e-8);
        assert!((u.range.mean[0] - 80.0).abs() < 1e-8);
        assert!(u.angles.is_spd() && u.range.is_spd());
    }

    #[test]
    fn update_wraps_innovation() {
        let t = track(1, 3.1, 0.0, 100.0, 0.0);
        let m = sph(100.0, -3.1, 0.0);
        let u = kf_update(&t, &m, &linalg::diag([1e-4, 1e-4]), &[[1.0]]).unwrap();
        // the posterior moves toward +pi, not across zero
        let moved = wrap_angle(u.azimuth() - 3.1);
        assert!(moved > 0.0 && moved < 2.0 * PI - 6.2 + 1e-9);
    }

    #[test]
    fn update_rejects_bad_noise() {
        let t = track(1, 0.0, 0.0, 100.0, 0.0);
        let m = sph(100.0, 0.0, 0.0);
        assert_eq!(kf_update(&t, &m, &linalg::diag([0.0, 1e-4]), &[[1.0]]), Err(DaaError::NonSpdNoise));
        assert_eq!(kf_update(&t, &m, &linalg::diag([1e-4, 1e-4]), &[[-1.0]]), Err(DaaError::NonSpdNoise));
    }

    #[test]
    fn range_floor() {
        let t = track(1, 0.0, 0.0, 0.5, 0.0);
        let u = kf_update(&t, &sph(0.01, 0.0, 0.0), &linalg::diag([1e-4, 1e-4]), &[[1e-10]]).unwrap();
        assert_eq!(u.range.mean[0], 0.1);
    }

    #[test]
    fn stationary_truth_rates_converge() {
        let cfg = FusionConfig::default();
        let mut t = track(1, 0.3, 0.1, 150.0, 0.0);
        t.angles.mean[2] = 0.05;
        t.range.mean[1] = -5.0;
        let m = sph(150.0, 0.3, 0.1);
        for _ in 0..50 {
            t = kf_predict(&t, 0.125, &cfg);
            t = kf_update(&t, &m, &linalg::diag([1e-10, 1e-10]), &[[1e-6]]).unwrap();
        }
        assert!(t.angles.mean[2].abs() < 1e-6 && t.angles.mean[3].abs() < 1e-6);
        assert!(t.range.mean[1].abs() < 1e-6);
    }

    #[test]
    fn velocity_and_heading_examples() {
        let own0 = OwnshipState { position: NedVector::zero(), speed: 0.0, heading: 0.0 };
        let t = track(1, 0.4, 0.0, 100.0, 0.0);
        let (vn, ve) = estimate_intruder_velocity(&own0, &t).unwrap();
        assert!(vn.abs() < 1e-12 && ve.abs() < 1e-12);

        // head-on: ownship 10 m/s north, closing at 20 m/s
        let own = OwnshipState { position: NedVector::zero(), speed: 10.0, heading: 0.0 };
        let t = track(1, 0.0, 0.0, 200.0, -20.0);
        let (vn, ve) = estimate_intruder_velocity(&own, &t).unwrap();
        assert!((vn + 10.0).abs() < 1e-12 && ve.abs() < 1e-12);

        assert_eq!(estimate_intruder_heading(10.0, 0.0).unwrap(), 0.0);
        assert!((estimate_intruder_heading(0.0, -5.0).unwrap() + FRAC_PI_2).abs() < 1e-12);
        assert!((estimate_intruder_heading(-7.07, -7.07).unwrap() + 3.0 * PI / 4.0).abs() < 1e-12);
        assert_eq!(estimate_intruder_heading(0.05, 0.0), Err(DaaError::HeadingUndefined));
    }

    #[test]
    fn velocity_matches_differentiated_truth() {
        // ownship north at 10 m/s, intruder crossing eastbound at 5 m/s
        let own_at = |t: f64| NedVector::new(10.0 * t, 0.0, 0.0);
        let int_at = |t: f64| NedVector::new(100.0, -60.0 + 5.0 * t, 0.0);
        let t0 = 2.0;
        let eps = 1e-5;
        let rel = |t: f64| ned_to_spherical(&(int_at(t) - own_at(t))).unwrap();
        let (a, b) = (rel(t0 - eps), rel(t0 + eps));
        let mid = rel(t0);
        let mut tr = track(1, mid.azimuth, 0.0, mid.range, (b.range - a.range) / (2.0 * eps));
        tr.angles.mean[2] = wrap_angle(b.azimuth - a.azimuth) / (2.0 * eps);
        let own = OwnshipState { position: own_at(t0), speed: 10.0, heading: 0.0 };
        let (vn, ve) = estimate_intruder_velocity(&own, &tr).unwrap();
        assert!(vn.abs() < 1e-5 && (ve - 5.0).abs() < 1e-5);
    }

    #[test]
    fn lifecycle() {
        let rig = default_rig::<f64>();
        let own = OwnshipState { position: NedVector::zero(), speed: 10.0, heading: 0.0 };
        let mut fusion = MultiViewFusion::new(FusionConfig::default());
        assert!(!fusion.publish(&own, 0.0).valid);
        let cam = &rig[2];
        let (px, vis) = project_to_camera(&NedVector::new(200.0, -30.0, -10.0), cam, 0.0);
        assert!(vis);
        let mk = |t: f64| ImageTrack {
            camera_id: cam.id,
            pixel: px,
            predicted_range: 202.5,
            apparent_size: 20.0,
            timestamp: t,
            track_id: 1,
        };
        let id = fusion.ingest(&mk(0.0), &rig, 0.0).unwrap();
        assert!(!fusion.publish(&own, 0.0).valid, "unconfirmed track is not published");
        assert_eq!(fusion.ingest(&mk(0.125), &rig, 0.0).unwrap(), id);
        assert_eq!(fusion.ingest(&mk(0.25), &rig, 0.0).unwrap(), id);
        let g = fusion.publish(&own, 0.25);
        assert!(g.valid && g.track_id == id);
        assert_eq!(g.alpha, los_angle_alpha(g.theta));
        // a stale measurement does not reach the track
        let other = fusion.ingest(&mk(0.1), &rig, 0.0).unwrap();
        assert_ne!(other, id);
        assert_eq!(fusion.prune(1.2), 1);
        assert_eq!(fusion.prune(1.25), 0);
        assert!(fusion.publish(&own, 1.25).valid);
        assert_eq!(fusion.prune(1.3), 1);
        assert_eq!(fusion.prune(1.3), 0);
        assert!(!fusion.publish(&own, 1.3).valid);
        assert!(fusion.tracks().is_empty());
    }

    #[test]
    fn publish_picks_nearest() {
        let own = OwnshipState { position: NedVector::zero(), speed: 10.0, heading: 0.0 };
        let mut fusion = MultiViewFusion::<f64>::new(FusionConfig::default());
        fusion.tracks = vec![track(1, 0.0, 0.0, 200.0, -5.0), track(2, 1.0, 0.0, 120.0, -5.0)];
        let g = fusion.publish(&own, 0.0);
        assert_eq!(g.track_id, 2);
        assert!((g.d - 120.0).abs() < 1e-12);
    }

    #[test]
    fn filters_are_decoupled() {
        let t = track(1, 0.0, 0.0, 100.0, -3.0);
        let r_a = linalg::diag([1e-4, 1e-4]);
        let a = kf_update(&t, &sph(90.0, 0.01, 0.0), &r_a, &[[4.0]]).unwrap();
        let b = kf_update(&t, &sph(90.0, -0.3, 0.2), &r_a, &[[4.0]]).unwrap();
        assert_eq!(a.range, b.range);
        let c = kf_update(&t, &sph(50.0, 0.01, 0.0), &r_a, &[[4.0]]).unwrap();
        assert_eq!(a.angles, c.angles);
    }
}
