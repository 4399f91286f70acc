//! Coordinate frames and angle conventions.
//!
//! All positions are North-East-Down (NED) and ownship-centered unless
//! stated otherwise. Azimuth is `atan2(east, north)`, positive clockwise
//! seen from above; elevation is positive above the horizon.
//!
//! Camera frame: `x` along the optical axis, `y` to the right of the image,
//! `z` down the image. With zero mount angles it coincides with the body
//! frame (forward, right, down). Vehicle roll and pitch are always zero, so
//! the body frame differs from NED only by the heading rotation.

use serde::{Deserialize, Serialize};

use crate::error::{DaaError, Result};
use crate::scalar::{lit, Scalar};

/// Position or direction in a North-East-Down frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NedVector<T> {
    pub north: T,
    pub east: T,
    pub down: T,
}

impl<T: Scalar> NedVector<T> {
    pub fn new(north: T, east: T, down: T) -> Self {
        Self { north, east, down }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn norm(&self) -> T {
        (self.north * self.north + self.east * self.east + self.down * self.down).sqrt()
    }

    /// Length of the north/east projection.
    pub fn horizontal_norm(&self) -> T {
        self.north.hypot(self.east)
    }

    pub fn dot(&self, other: &Self) -> T {
        self.north * other.north + self.east * other.east + self.down * other.down
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.north * s, self.east * s, self.down * s)
    }

    pub fn is_finite(&self) -> bool {
        self.north.is_finite() && self.east.is_finite() && self.down.is_finite()
    }
}

impl<T: Scalar> std::ops::Add for NedVector<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.north + rhs.north, self.east + rhs.east, self.down + rhs.down)
    }
}

impl<T: Scalar> std::ops::Sub for NedVector<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.north - rhs.north, self.east - rhs.east, self.down - rhs.down)
    }
}

/// Range, azimuth and elevation of a point relative to the frame origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalTrack<T> {
    pub range: T,
    pub azimuth: T,
    pub elevation: T,
}

/// Pixel coordinates, `u` along columns and `v` along rows.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelPoint<T> {
    pub u: T,
    pub v: T,
}

/// Point expressed in a camera frame (forward, right, down), meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CameraPoint<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> CameraPoint<T> {
    pub fn norm(&self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Undistorted pinhole camera with principal point at the image center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel<T> {
    pub id: u8,
    /// Mount yaw relative to the body forward axis, radians (positive right).
    pub mount_yaw: T,
    /// Mount pitch, radians (positive up).
    pub mount_pitch: T,
    pub hfov: T,
    pub vfov: T,
    pub width: u32,
    pub height: u32,
    /// Focal length, pixels.
    pub focal: T,
}

impl<T: Scalar> CameraModel<T> {
    /// Builds a camera whose focal length is derived from the horizontal FOV.
    pub fn from_fov(id: u8, mount_yaw: T, mount_pitch: T, hfov: T, vfov: T, width: u32, height: u32) -> Result<Self> {
        let w = T::from_u32(width).unwrap_or_else(T::zero);
        let focal = w * T::half() / (hfov * T::half()).tan();
        let cam = Self { id, mount_yaw, mount_pitch, hfov, vfov, width, height, focal };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let pi = T::PI();
        let bad = |msg: String| Err(DaaError::InvalidCamera(format!("camera {}: {msg}", self.id)));
        if !(self.hfov > T::zero() && self.hfov < pi) {
            return bad(format!("horizontal FOV {} outside (0, pi)", self.hfov));
        }
        if !(self.vfov > T::zero() && self.vfov < pi) {
            return bad(format!("vertical FOV {} outside (0, pi)", self.vfov));
        }
        if self.width == 0 || self.height == 0 {
            return bad("resolution must be positive".into());
        }
        if !(self.focal > T::zero()) || !self.focal.is_finite() {
            return bad(format!("focal length {} must be positive", self.focal));
        }
        let w = T::from_u32(self.width).unwrap_or_else(T::zero);
        let expected = w * T::half() / (self.hfov * T::half()).tan();
        if ((self.focal - expected) / expected).abs() > lit(0.01) {
            return bad(format!("focal length {} inconsistent with FOV (expected {})", self.focal, expected));
        }
        if !self.mount_yaw.is_finite() || !self.mount_pitch.is_finite() {
            return bad("mount angles must be finite".into());
        }
        Ok(())
    }

    pub fn principal_point(&self) -> PixelPoint<T> {
        PixelPoint {
            u: T::from_u32(self.width).unwrap_or_else(T::zero) * T::half(),
            v: T::from_u32(self.height).unwrap_or_else(T::zero) * T::half(),
        }
    }

    pub fn contains_pixel(&self, px: &PixelPoint<T>) -> bool {
        let w = T::from_u32(self.width).unwrap_or_else(T::zero);
        let h = T::from_u32(self.height).unwrap_or_else(T::zero);
        let eps = lit::<T>(1e-6);
        px.u >= -eps && px.u <= w + eps && px.v >= -eps && px.v <= h + eps
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let pi = T::PI();
    let two_pi = T::TAU();
    let mut r = a % two_pi;
    if r > pi {
        r = r - two_pi;
    } else if r <= -pi {
        r = r + two_pi;
    }
    r
}

/// Range, azimuth and elevation of an NED vector.
pub fn ned_to_spherical<T: Scalar>(p: &NedVector<T>) -> Result<SphericalTrack<T>> {
    let d = p.norm();
    if !(d > T::zero()) || !d.is_finite() {
        return Err(DaaError::DegenerateGeometry("zero-length NED vector"));
    }
    let ratio = (p.down / d).max(-T::one()).min(T::one());
    Ok(SphericalTrack { range: d, azimuth: wrap_angle(p.east.atan2(p.north)), elevation: -ratio.asin() })
}

pub fn spherical_to_ned<T: Scalar>(s: &SphericalTrack<T>) -> NedVector<T> {
    let (sin_el, cos_el) = s.elevation.sin_cos();
    let (sin_az, cos_az) = s.azimuth.sin_cos();
    NedVector::new(s.range * cos_el * cos_az, s.range * cos_el * sin_az, -s.range * sin_el)
}

/// Line-of-sight angle seen from the intruder: the azimuth rotated by pi.
pub fn los_angle_alpha<T: Scalar>(azimuth: T) -> T {
    wrap_angle(T::PI() + azimuth)
}

/// Point at Euclidean distance `range` along the ray through `px`.
pub fn camera_unproject<T: Scalar>(px: &PixelPoint<T>, range: T, cam: &CameraModel<T>) -> Result<CameraPoint<T>> {
    if !(range > T::zero()) {
        return Err(DaaError::NonPositiveRange(range.to_f64_lossy()));
    }
    let c = cam.principal_point();
    let ry = (px.u - c.u) / cam.focal;
    let rz = (px.v - c.v) / cam.focal;
    let s = range / (T::one() + ry * ry + rz * rz).sqrt();
    Ok(CameraPoint { x: s, y: s * ry, z: s * rz })
}

// Body (forward, right, down) from camera: yaw about z, then pitch about y.
fn camera_to_body<T: Scalar>(pt: &CameraPoint<T>, cam: &CameraModel<T>) -> NedVector<T> {
    let (sp, cp) = cam.mount_pitch.sin_cos();
    // pitch up tilts the optical axis toward -z
    let x1 = cp * pt.x + sp * pt.z;
    let z1 = -sp * pt.x + cp * pt.z;
    let (sy, cy) = cam.mount_yaw.sin_cos();
    NedVector::new(cy * x1 - sy * pt.y, sy * x1 + cy * pt.y, z1)
}

fn body_to_camera<T: Scalar>(b: &NedVector<T>, cam: &CameraModel<T>) -> CameraPoint<T> {
    let (sy, cy) = cam.mount_yaw.sin_cos();
    let x1 = cy * b.north + sy * b.east;
    let y = -sy * b.north + cy * b.east;
    let (sp, cp) = cam.mount_pitch.sin_cos();
    CameraPoint { x: cp * x1 - sp * b.down, y, z: sp * x1 + cp * b.down }
}

fn rotate_heading<T: Scalar>(v: &NedVector<T>, heading: T) -> NedVector<T> {
    let (s, c) = heading.sin_cos();
    NedVector::new(c * v.north - s * v.east, s * v.north + c * v.east, v.down)
}

/// Rotates a camera-frame point into the ownship-centered NED frame.
pub fn camera_to_ned<T: Scalar>(pt: &CameraPoint<T>, cam: &CameraModel<T>, heading: T) -> NedVector<T> {
    rotate_heading(&camera_to_body(pt, cam), heading)
}

pub fn ned_to_camera<T: Scalar>(p: &NedVector<T>, cam: &CameraModel<T>, heading: T) -> CameraPoint<T> {
    body_to_camera(&rotate_heading(p, -heading), cam)
}

/// Projects an ownship-relative NED point into a camera image.
///
/// The flag is true iff the point is in front of the camera and inside both
/// FOV half-angles; the FOV boundary itself counts as visible. For points
/// behind the camera the returned pixel is meaningless.
pub fn project_to_camera<T: Scalar>(p: &NedVector<T>, cam: &CameraModel<T>, heading: T) -> (PixelPoint<T>, bool) {
    let q = ned_to_camera(p, cam, heading);
    let c = cam.principal_point();
    if !(q.x > T::zero()) {
        return (c, false);
    }
    let ty = q.y / q.x;
    let tz = q.z / q.x;
    let px = PixelPoint { u: c.u + cam.focal * ty, v: c.v + cam.focal * tz };
    let tol = T::one() + lit(1e-9);
    let in_h = ty.abs() <= (cam.hfov * T::half()).tan() * tol;
    let in_v = tz.abs() <= (cam.vfov * T::half()).tan() * tol;
    let visible = in_h && in_v && cam.contains_pixel(&px);
    (px, visible)
}

/// The default six-camera rig: 220 deg total horizontal coverage and 48 deg
/// vertical at 1224x1024 per camera with a single square-pixel focal length.
///
/// The vertical FOV fixes the focal length (512 / tan 24 deg), which gives
/// each camera a ~56 deg horizontal FOV; mount yaws are evenly spaced so the
/// outermost edges sit at +-110 deg.
pub fn default_rig<T: Scalar>() -> Vec<CameraModel<T>> {
    uniform_rig(6, lit::<T>(220.0).to_radians(), lit::<T>(48.0).to_radians(), 1224, 1024).expect("default rig is valid")
}

/// `n` identical square-pixel cameras whose focal length follows from the
/// vertical FOV, yawed evenly so the outer edges span `total_hfov`.
pub fn uniform_rig<T: Scalar>(n: usize, total_hfov: T, vfov: T, width: u32, height: u32) -> Result<Vec<CameraModel<T>>> {
    if n == 0 || n > usize::from(u8::MAX) {
        return Err(DaaError::InvalidCamera(format!("rig needs 1 to 255 cameras, got {n}")));
    }
    if !(vfov > T::zero() && vfov < T::PI()) || width == 0 || height == 0 {
        return Err(DaaError::InvalidCamera("rig FOV and image size must be positive".into()));
    }
    let focal = lit::<T>(f64::from(height)) * T::half() / (vfov * T::half()).tan();
    let hfov = T::two() * (lit::<T>(f64::from(width)) * T::half() / focal).atan();
    if n as f64 * hfov.to_f64_lossy() < total_hfov.to_f64_lossy() {
        return Err(DaaError::InvalidCamera(format!("{n} cameras cannot cover the requested horizontal FOV")));
    }
    let first = -total_hfov * T::half() + hfov * T::half();
    let step = if n > 1 { (total_hfov - hfov) / lit(n as f64 - 1.0) } else { T::zero() };
    (0..n)
        .map(|i| {
            let yaw = if n > 1 { first + step * lit(i as f64) } else { T::zero() };
            CameraModel::from_fov(i as u8, yaw, T::zero(), hfov, vfov, width, height)
        })
        .collect()
}
