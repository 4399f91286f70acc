//! Planar unicycle ownship and constant-velocity intruder.

use serde::{Deserialize, Serialize};

use crate::error::{DaaError, Result};
use crate::frames::{wrap_angle, NedVector};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OwnshipState<T> {
    /// Down component is held fixed by the dynamics.
    pub position: NedVector<T>,
    pub speed: T,
    pub heading: T,
}

impl<T: Scalar> OwnshipState<T> {
    pub fn velocity(&self) -> NedVector<T> {
        let (s, c) = self.heading.sin_cos();
        NedVector::new(self.speed * c, self.speed * s, T::zero())
    }
}

/// Commanded acceleration (m/s^2) and turn rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput<T> {
    pub accel: T,
    pub turn_rate: T,
}

impl<T: Scalar> ControlInput<T> {
    pub fn new(accel: T, turn_rate: T) -> Self {
        Self { accel, turn_rate }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn as_array(&self) -> [T; 2] {
        [self.accel, self.turn_rate]
    }

    pub fn from_array(a: [T; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds<T> {
    pub min: ControlInput<T>,
    pub max: ControlInput<T>,
}

impl<T: Scalar> ControlBounds<T> {
    pub fn new(min: ControlInput<T>, max: ControlInput<T>) -> Result<Self> {
        let b = Self { min, max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |lo: T, hi: T| lo.is_finite() && hi.is_finite() && lo <= hi;
        if ok(self.min.accel, self.max.accel) && ok(self.min.turn_rate, self.max.turn_rate) {
            Ok(())
        } else {
            Err(DaaError::InvalidParameter(format!("control bounds must satisfy min <= max: {:?}", self)))
        }
    }
}

impl<T: Scalar> Default for ControlBounds<T> {
    /// +-2 m/s^2 and +-0.5 rad/s.
    fn default() -> Self {
        Self { min: ControlInput::new(lit(-2.0), lit(-0.5)), max: ControlInput::new(lit(2.0), lit(0.5)) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntruderState<T> {
    pub position: NedVector<T>,
    pub speed: T,
    pub heading: T,
}

impl<T: Scalar> IntruderState<T> {
    pub fn velocity(&self) -> NedVector<T> {
        let (s, c) = self.heading.sin_cos();
        NedVector::new(self.speed * c, self.speed * s, T::zero())
    }
}

pub fn clamp_control<T: Scalar>(u: ControlInput<T>, b: &ControlBounds<T>) -> ControlInput<T> {
    ControlInput::new(u.accel.max(b.min.accel).min(b.max.accel), u.turn_rate.max(b.min.turn_rate).min(b.max.turn_rate))
}

// [north, east, speed, heading]
fn unicycle_rate<T: Scalar>(x: &[T; 4], u: &ControlInput<T>) -> [T; 4] {
    let (s, c) = x[3].sin_cos();
    [x[2] * c, x[2] * s, u.accel, u.turn_rate]
}

/// One RK4 step of the unicycle under a zero-order-held control.
///
/// Speed is floored at zero after the step and heading is wrapped.
pub fn ownship_step<T: Scalar>(s: &OwnshipState<T>, u: &ControlInput<T>, dt: T) -> Result<OwnshipState<T>> {
    if !(dt > T::zero()) {
        return Err(DaaError::NonPositiveStep(dt.to_f64_lossy()));
    }
    let x0 = [s.position.north, s.position.east, s.speed, s.heading];
    let add = |x: &[T; 4], k: &[T; 4], h: T| -> [T; 4] { [x[0] + k[0] * h, x[1] + k[1] * h, x[2] + k[2] * h, x[3] + k[3] * h] };
    let half = dt * T::half();
    let k1 = unicycle_rate(&x0, u);
    let k2 = unicycle_rate(&add(&x0, &k1, half), u);
    let k3 = unicycle_rate(&add(&x0, &k2, half), u);
    let k4 = unicycle_rate(&add(&x0, &k3, dt), u);
    let six = lit::<T>(6.0);
    let two = T::two();
    let mut x = x0;
    for i in 0..2 {
        x[i] = x0[i] + dt / six * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
    }
    // speed and heading rates are constant over the step
    x[2] = x0[2] + u.accel * dt;
    x[3] = x0[3] + u.turn_rate * dt;
    Ok(OwnshipState {
        position: NedVector::new(x[0], x[1], s.position.down),
        speed: x[2].max(T::zero()),
        heading: wrap_angle(x[3]),
    })
}

pub fn intruder_step<T: Scalar>(s: &IntruderState<T>, dt: T) -> Result<IntruderState<T>> {
    if !(dt > T::zero()) {
        return Err(DaaError::NonPositiveStep(dt.to_f64_lossy()));
    }
    Ok(IntruderState { position: s.position + s.velocity().scale(dt), ..*s })
}
