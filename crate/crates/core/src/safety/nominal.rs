use serde::{Deserialize, Serialize};

use crate::dynamics::{clamp_control, ControlBounds, ControlInput, OwnshipState};
use crate::frames::{wrap_angle, NedVector};
use crate::scalar::{lit, Scalar};

/// Mission the nominal controller flies toward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec<T> {
    pub position: NedVector<T>,
    pub desired_speed: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdGains<T> {
    /// Speed error gain, 1/s.
    pub k_v: T,
    /// Heading error gain, 1/s.
    pub k_chi: T,
    /// Damping on the previous turn-rate command.
    pub k_d: T,
}

impl<T: Scalar> Default for PdGains<T> {
    fn default() -> Self {
        Self { k_v: lit(0.5), k_chi: lit(1.0), k_d: lit(0.1) }
    }
}

/// PD go-to-goal command, clamped to the actuation box.
pub fn nominal_control<T: Scalar>(
    own: &OwnshipState<T>,
    goal: &GoalSpec<T>,
    gains: &PdGains<T>,
    prev_turn_rate: T,
    bounds: &ControlBounds<T>,
) -> ControlInput<T> {
    let delta = goal.position - own.position;
    let bearing = delta.east.atan2(delta.north);
    let accel = gains.k_v * (goal.desired_speed - own.speed);
    let turn = gains.k_chi * wrap_angle(bearing - own.heading) - gains.k_d * prev_turn_rate;
    clamp_control(ControlInput::new(accel, turn), bounds)
}
