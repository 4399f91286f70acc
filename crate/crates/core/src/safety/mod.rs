//! Supervisory safety controller: a CBF-constrained QP around a PD nominal
//! controller. Without a valid intruder geometry the nominal command passes
//! through untouched.

pub mod cbf;
pub mod nominal;
pub mod qp;

pub use cbf::{
    cbf_constraint, cbf_derivative, cbf_value, range_accel_affine, range_rate, range_rate_trig, CbfConstraint, CbfParameters,
};
pub use nominal::{nominal_control, GoalSpec, PdGains};
pub use qp::{kkt_residual, solve_qp, ActiveSet, QpProblem, QpSolution};

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlBounds, ControlInput, IntruderState, OwnshipState};
use crate::error::Result;
use crate::frames::los_angle_alpha;
use crate::fusion::RelativeGeometry;
use crate::scalar::Scalar;

/// Range below which the drift term is evaluated at this floor instead.
pub const SINGULARITY_GUARD_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SafetyDiagnostics<T> {
    /// Barrier value, zero when the geometry was invalid.
    pub h: T,
    /// Right-hand side `-lambda h` of the enforced condition.
    pub hdot_bound: T,
    pub constraint_active: bool,
    pub infeasible_relaxed: bool,
    pub geometry_valid: bool,
    pub u_nom: ControlInput<T>,
}

/// Exact horizontal geometry from ground truth, as a perfect sensor would report.
pub fn truth_geometry<T: Scalar>(own: &OwnshipState<T>, intr: &IntruderState<T>) -> RelativeGeometry<T> {
    let rel = intr.position - own.position;
    let d = rel.horizontal_norm();
    let theta = rel.east.atan2(rel.north);
    let vi = intr.velocity();
    let w = vi - own.velocity();
    let (d_dot, theta_dot) = if d > T::zero() {
        ((rel.north * w.north + rel.east * w.east) / d, (rel.north * w.east - rel.east * w.north) / (d * d))
    } else {
        (T::zero(), T::zero())
    };
    RelativeGeometry {
        d,
        d_dot,
        theta,
        theta_dot,
        phi: (-rel.down).atan2(d),
        alpha: los_angle_alpha(theta),
        v_int_north: vi.north,
        v_int_east: vi.east,
        chi_int: intr.heading,
        heading_valid: intr.speed >= T::lit(0.1),
        valid: d > T::zero(),
        track_id: 0,
    }
}

/// Minimally modified nominal command satisfying the CBF condition.
#[allow(clippy::too_many_arguments)]
pub fn safe_control<T: Scalar>(
    own: &OwnshipState<T>,
    geo: &RelativeGeometry<T>,
    goal: &GoalSpec<T>,
    params: &CbfParameters<T>,
    bounds: &ControlBounds<T>,
    gains: &PdGains<T>,
    prev_turn_rate: T,
) -> Result<(ControlInput<T>, SafetyDiagnostics<T>)> {
    let u_nom = nominal_control(own, goal, gains, prev_turn_rate, bounds);
    let mut diag = SafetyDiagnostics { u_nom, ..Default::default() };
    if !geo.valid {
        return Ok((u_nom, diag));
    }
    let mut guarded = *geo;
    guarded.d = guarded.d.max(T::lit(SINGULARITY_GUARD_M));
    let c = cbf_constraint(own, &guarded, params)?;
    let problem = QpProblem { u_nom, a: c.a_qp, b: c.b_qp, bounds: *bounds, constraint_active: true };
    let sol = solve_qp(&problem);
    diag.h = c.h;
    diag.hdot_bound = -params.lambda * c.h;
    diag.constraint_active = sol.u != u_nom;
    diag.infeasible_relaxed = sol.infeasible_relaxed;
    diag.geometry_valid = true;
    Ok((sol.u, diag))
}

/// Per-episode controller state: the PD derivative memory.
#[derive(Debug, Clone)]
pub struct SafetyController<T> {
    pub params: CbfParameters<T>,
    pub bounds: ControlBounds<T>,
    pub gains: PdGains<T>,
    prev_turn_rate: T,
}

impl<T: Scalar> SafetyController<T> {
    pub fn new(params: CbfParameters<T>, bounds: ControlBounds<T>, gains: PdGains<T>) -> Self {
        Self { params, bounds, gains, prev_turn_rate: T::zero() }
    }

    pub fn nominal(&mut self, own: &OwnshipState<T>, goal: &GoalSpec<T>) -> ControlInput<T> {
        let u = nominal_control(own, goal, &self.gains, self.prev_turn_rate, &self.bounds);
        self.prev_turn_rate = u.turn_rate;
        u
    }

    pub fn safe(
        &mut self,
        own: &OwnshipState<T>,
        geo: &RelativeGeometry<T>,
        goal: &GoalSpec<T>,
    ) -> Result<(ControlInput<T>, SafetyDiagnostics<T>)> {
        let out = safe_control(own, geo, goal, &self.params, &self.bounds, &self.gains, self.prev_turn_rate)?;
        self.prev_turn_rate = out.0.turn_rate;
        Ok(out)
    }
}
