//! Barrier function, range kinematics and the affine CBF constraint.
//!
//! Relative position `p = p_int - p_own = d (cos theta, sin theta)` in the
//! horizontal plane, relative velocity `w = v_int - v_own`. Then
//!
//! ```text
//! d'  = (p . w) / d
//!     = v_own cos(alpha - chi_own) - v_int cos(alpha - chi_int)
//! d'' = (|w|^2 + p . w') / d - d'^2 / d
//!     = [cos(alpha - chi_own), v_own sin(alpha - chi_own)] . u
//!       + (v_own sin(alpha - chi_own) - v_int sin(alpha - chi_int))^2 / d
//! ```
//!
//! with `alpha = pi + theta` and the intruder velocity held constant.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, OwnshipState};
use crate::error::{DaaError, Result};
use crate::fusion::RelativeGeometry;
use crate::scalar::{lit, Scalar};

/// Hyperparameters of `h = c + d_thresh^n - d^n - k d'` and the decay rate
/// `lambda` in `h' <= -lambda h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbfParameters<T> {
    pub c: T,
    pub n: T,
    pub k: T,
    pub lambda: T,
    pub d_thresh: T,
}

impl<T: Scalar> Default for CbfParameters<T> {
    fn default() -> Self {
        Self { c: lit(0.01), n: lit(0.3), k: lit(0.2), lambda: lit(0.2), d_thresh: lit(50.0) }
    }
}

impl<T: Scalar> CbfParameters<T> {
    pub fn validate(&self) -> Result<()> {
        let all_pos = [self.c, self.n, self.k, self.lambda, self.d_thresh].iter().all(|x| *x > T::zero() && x.is_finite());
        if all_pos {
            Ok(())
        } else {
            Err(DaaError::InvalidParameter(format!("CBF parameters must be positive: {self:?}")))
        }
    }
}

/// Barrier value; `h <= 0` is the safe side.
pub fn cbf_value<T: Scalar>(d: T, d_dot: T, p: &CbfParameters<T>) -> Result<T> {
    if !(d > T::zero()) {
        return Err(DaaError::NonPositiveRange(d.to_f64_lossy()));
    }
    Ok(p.c + p.d_thresh.powf(p.n) - d.powf(p.n) - p.k * d_dot)
}

fn check_geometry<T: Scalar>(geo: &RelativeGeometry<T>) -> Result<()> {
    if !geo.valid || !(geo.d > T::zero()) {
        return Err(DaaError::InvalidGeometry);
    }
    Ok(())
}

struct Kinematics<T> {
    /// unit LOS from ownship to intruder
    los: [T; 2],
    rel_vel: [T; 2],
}

fn kinematics<T: Scalar>(own: &OwnshipState<T>, geo: &RelativeGeometry<T>) -> Kinematics<T> {
    let (s, c) = geo.theta.sin_cos();
    let v_own = own.velocity();
    Kinematics { los: [c, s], rel_vel: [geo.v_int_north - v_own.north, geo.v_int_east - v_own.east] }
}

/// Horizontal range rate, negative when closing.
pub fn range_rate<T: Scalar>(own: &OwnshipState<T>, geo: &RelativeGeometry<T>) -> Result<T> {
    check_geometry(geo)?;
    let k = kinematics(own, geo);
    Ok(k.los[0] * k.rel_vel[0] + k.los[1] * k.rel_vel[1])
}

/// The same range rate written with the LOS angle `alpha`.
pub fn range_rate_trig<T: Scalar>(own: &OwnshipState<T>, geo: &RelativeGeometry<T>) -> Result<T> {
    check_geometry(geo)?;
    let v_int = geo.v_int_north.hypot(geo.v_int_east);
    let chi_int = geo.v_int_east.atan2(geo.v_int_north);
    Ok(own.speed * (geo.alpha - own.heading).cos() - v_int * (geo.alpha - chi_int).cos())
}

/// `(a, drift)` such that `d'' = a . u + drift`.
///
/// Fails with [`DaaError::SingularRange`] below 1 m, where the drift term's
/// `1/d` blows up.
pub fn range_accel_affine<T: Scalar>(own: &OwnshipState<T>, geo: &RelativeGeometry<T>) -> Result<([T; 2], T)> {
    check_geometry(geo)?;
    if geo.d < T::one() {
        return Err(DaaError::SingularRange(geo.d.to_f64_lossy()));
    }
    let rel = geo.alpha - own.heading;
    let (s, c) = rel.sin_cos();
    let k = kinematics(own, geo);
    // component of the relative velocity across the LOS
    let tangential = -k.los[1] * k.rel_vel[0] + k.los[0] * k.rel_vel[1];
    Ok(([c, own.speed * s], tangential * tangential / geo.d))
}

/// Affine CBF constraint `a_qp . u <= b_qp` with the quantities it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbfConstraint<T> {
    pub a_qp: [T; 2],
    pub b_qp: T,
    pub h: T,
    pub d_dot: T,
    /// `d'' = accel . u + drift`
    pub accel: [T; 2],
    pub drift: T,
}

/// Expands `h' <= -lambda h` using `h' = -n d^(n-1) d' - k d''`.
pub fn cbf_constraint<T: Scalar>(
    own: &OwnshipState<T>,
    geo: &RelativeGeometry<T>,
    p: &CbfParameters<T>,
) -> Result<CbfConstraint<T>> {
    let d_dot = range_rate(own, geo)?;
    let (accel, drift) = range_accel_affine(own, geo)?;
    let h = cbf_value(geo.d, d_dot, p)?;
    let slope = p.n * geo.d.powf(p.n - T::one());
    Ok(CbfConstraint {
        a_qp: [-p.k * accel[0], -p.k * accel[1]],
        b_qp: -p.lambda * h + slope * d_dot + p.k * drift,
        h,
        d_dot,
        accel,
        drift,
    })
}

/// Analytic `h'` under control `u`.
pub fn cbf_derivative<T: Scalar>(
    own: &OwnshipState<T>,
    geo: &RelativeGeometry<T>,
    p: &CbfParameters<T>,
    u: &ControlInput<T>,
) -> Result<T> {
    let d_dot = range_rate(own, geo)?;
    let (accel, drift) = range_accel_affine(own, geo)?;
    let d_ddot = accel[0] * u.accel + accel[1] * u.turn_rate + drift;
    Ok(-p.n * geo.d.powf(p.n - T::one()) * d_dot - p.k * d_ddot)
}
