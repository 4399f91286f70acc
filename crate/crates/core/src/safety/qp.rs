//! Exact solver for the two-variable safety QP
//!
//! ```text
//! minimize |u - u_nom|^2  subject to  a . u <= b,  lo <= u <= hi
//! ```
//!
//! by enumerating active sets. The feasible set is a convex polygon, so the
//! minimizer is the Euclidean projection of `u_nom` onto it and lies on one
//! of: the interior, the halfspace boundary, a box edge (with or without the
//! halfspace), or a box corner. Every candidate is checked for feasibility
//! and the closest one wins.

#![allow(clippy::needless_range_loop)]

use crate::dynamics::{clamp_control, ControlBounds, ControlInput};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpProblem<T> {
    pub u_nom: ControlInput<T>,
    /// Constraint gradient; the constraint reads `a . u <= b`.
    pub a: [T; 2],
    pub b: T,
    pub bounds: ControlBounds<T>,
    /// When false only the box applies.
    pub constraint_active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActiveSet {
    pub halfspace: bool,
    pub lower: [bool; 2],
    pub upper: [bool; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSolution<T> {
    pub u: ControlInput<T>,
    pub active: ActiveSet,
    /// The halfspace misses the box; `u` minimizes `a . u - b` over the box.
    pub infeasible_relaxed: bool,
    pub objective: T,
}

fn objective<T: Scalar>(u: &[T; 2], u_nom: &[T; 2]) -> T {
    let d0 = u[0] - u_nom[0];
    let d1 = u[1] - u_nom[1];
    d0 * d0 + d1 * d1
}

struct Frame<T> {
    lo: [T; 2],
    hi: [T; 2],
    a: [T; 2],
    b: T,
    tol: T,
}

impl<T: Scalar> Frame<T> {
    fn new(q: &QpProblem<T>) -> Self {
        let lo = q.bounds.min.as_array();
        let hi = q.bounds.max.as_array();
        let span = (hi[0] - lo[0]).abs().max((hi[1] - lo[1]).abs()).max(T::one());
        let scale = T::one() + q.b.abs() + (q.a[0].abs() + q.a[1].abs()) * span;
        Self { lo, hi, a: q.a, b: q.b, tol: lit::<T>(1e-12) * scale }
    }

    fn in_box(&self, u: &[T; 2]) -> bool {
        (0..2).all(|i| u[i] >= self.lo[i] - self.tol && u[i] <= self.hi[i] + self.tol)
    }

    fn clamp(&self, u: [T; 2]) -> [T; 2] {
        [u[0].max(self.lo[0]).min(self.hi[0]), u[1].max(self.lo[1]).min(self.hi[1])]
    }

    fn slack(&self, u: &[T; 2]) -> T {
        self.a[0] * u[0] + self.a[1] * u[1] - self.b
    }

    fn feasible(&self, u: &[T; 2]) -> bool {
        self.in_box(u) && self.slack(u) <= self.tol
    }

    /// Box point minimizing `a . u`; ties keep the nominal component.
    fn least_violation(&self, u_nom: &[T; 2]) -> [T; 2] {
        let mut u = self.clamp(*u_nom);
        for i in 0..2 {
            if self.a[i] > T::zero() {
                u[i] = self.lo[i];
            } else if self.a[i] < T::zero() {
                u[i] = self.hi[i];
            }
        }
        u
    }
}

fn active_set<T: Scalar>(f: &Frame<T>, u: &[T; 2], with_halfspace: bool) -> ActiveSet {
    ActiveSet {
        halfspace: with_halfspace && f.slack(u).abs() <= f.tol,
        lower: [u[0] <= f.lo[0] + f.tol, u[1] <= f.lo[1] + f.tol],
        upper: [u[0] >= f.hi[0] - f.tol, u[1] >= f.hi[1] - f.tol],
    }
}

pub fn solve_qp<T: Scalar>(q: &QpProblem<T>) -> QpSolution<T> {
    let f = Frame::new(q);
    let un = q.u_nom.as_array();
    let finish = |u: [T; 2], halfspace: bool, relaxed: bool| QpSolution {
        u: ControlInput::from_array(u),
        active: active_set(&f, &u, halfspace),
        infeasible_relaxed: relaxed,
        objective: objective(&u, &un),
    };

    if !q.constraint_active {
        let u = clamp_control(q.u_nom, &q.bounds).as_array();
        return finish(u, false, false);
    }

    let lv = f.least_violation(&un);
    if f.slack(&lv) > f.tol {
        return finish(lv, true, true);
    }

    let mut candidates: Vec<[T; 2]> = Vec::with_capacity(14);
    candidates.push(un);
    let aa = f.a[0] * f.a[0] + f.a[1] * f.a[1];
    if aa > T::zero() {
        let s = f.slack(&un) / aa;
        candidates.push([un[0] - s * f.a[0], un[1] - s * f.a[1]]);
    }
    for i in 0..2 {
        let j = 1 - i;
        for bound in [f.lo[i], f.hi[i]] {
            // box edge alone
            let mut u = un;
            u[i] = bound;
            candidates.push(u);
            // box edge with the halfspace boundary
            if f.a[j] != T::zero() {
                let mut u = [T::zero(); 2];
                u[i] = bound;
                u[j] = (f.b - f.a[i] * bound) / f.a[j];
                candidates.push(u);
            }
        }
    }
    for u0 in [f.lo[0], f.hi[0]] {
        for u1 in [f.lo[1], f.hi[1]] {
            candidates.push([u0, u1]);
        }
    }

    let best = candidates
        .into_iter()
        .filter(|u| f.feasible(u))
        .map(|u| f.clamp(u))
        .min_by(|x, y| objective(x, &un).partial_cmp(&objective(y, &un)).unwrap_or(std::cmp::Ordering::Equal));
    match best {
        Some(u) if u == un => finish(un, true, false),
        Some(u) => finish(u, true, false),
        // unreachable in exact arithmetic: the least-violation corner is feasible
        None => finish(lv, true, true),
    }
}

/// Largest KKT violation of `u` for `q` (primal feasibility, stationarity
/// with non-negative multipliers on the active constraints).
///
/// For relaxed (infeasible) problems the halfspace is dropped and the
/// check applies to the box alone.
pub fn kkt_residual<T: Scalar>(q: &QpProblem<T>, sol: &QpSolution<T>) -> T {
    let f = Frame::new(q);
    let u = sol.u.as_array();
    let un = q.u_nom.as_array();
    let use_half = q.constraint_active && !sol.infeasible_relaxed;
    let mut primal = T::zero();
    for i in 0..2 {
        primal = primal.max(f.lo[i] - u[i]).max(u[i] - f.hi[i]);
    }
    if use_half {
        primal = primal.max(f.slack(&u));
    }
    if sol.infeasible_relaxed {
        // u must minimize a . u over the box
        let lv = f.least_violation(&un);
        return primal.max((f.slack(&u) - f.slack(&lv)).abs());
    }
    // gradient of the objective / 2
    let g = [u[0] - un[0], u[1] - un[1]];
    let act = active_set(&f, &u, use_half);
    let mut gens: Vec<[T; 2]> = Vec::new();
    if act.halfspace {
        gens.push(f.a);
    }
    for i in 0..2 {
        let mut e = [T::zero(); 2];
        if act.lower[i] {
            e[i] = -T::one();
            gens.push(e);
        }
        let mut e = [T::zero(); 2];
        if act.upper[i] {
            e[i] = T::one();
            gens.push(e);
        }
    }
    // find mu >= 0 with g + sum mu_k gen_k = 0; in 2-D two generators suffice
    let target = [-g[0], -g[1]];
    let norm = |v: [T; 2]| v[0].hypot(v[1]);
    let mut best = norm(target);
    for (k, gk) in gens.iter().enumerate() {
        let gg = gk[0] * gk[0] + gk[1] * gk[1];
        if gg > T::zero() {
            let mu = ((target[0] * gk[0] + target[1] * gk[1]) / gg).max(T::zero());
            best = best.min(norm([target[0] - mu * gk[0], target[1] - mu * gk[1]]));
        }
        for gl in gens.iter().skip(k + 1) {
            let det = gk[0] * gl[1] - gk[1] * gl[0];
            if det.abs() <= lit(1e-15) {
                continue;
            }
            let m1 = (target[0] * gl[1] - target[1] * gl[0]) / det;
            let m2 = (gk[0] * target[1] - gk[1] * target[0]) / det;
            if m1 >= T::zero() && m2 >= T::zero() {
                best = best.min(norm([target[0] - m1 * gk[0] - m2 * gl[0], target[1] - m1 * gk[1] - m2 * gl[1]]));
            }
        }
    }
    primal.max(best)
}
