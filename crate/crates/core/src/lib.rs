//! Detect-and-avoid simulation toolkit.
//!
//! A camera-only ownship perceives a non-cooperative intruder, fuses
//! per-camera detections into a relative geometry estimate, and filters a
//! go-to-goal command through a control barrier function quadratic program.
//! The `simkit` and `metrics` modules run Monte-Carlo encounter batches and
//! score them with separation minima, NMAC probability, risk ratio and
//! horizontal rate of closure.
//!
//! The geometry, dynamics, sensing, fusion and safety layers are generic over
//! the floating-point type ([`Scalar`]); the aliases below fix it to `f64`.
//! The episode engine and metrics are `f64` only.

// `!(x > 0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod frames;
pub mod fusion;
pub mod linalg;
pub mod metrics;
pub mod safety;
pub mod scalar;
pub mod sensorsim;
pub mod simkit;

pub use error::{DaaError, Result};
pub use scalar::Scalar;

pub type NedVector = frames::NedVector<f64>;
pub type SphericalTrack = frames::SphericalTrack<f64>;
pub type PixelPoint = frames::PixelPoint<f64>;
pub type CameraModel = frames::CameraModel<f64>;
pub type OwnshipState = dynamics::OwnshipState<f64>;
pub type IntruderState = dynamics::IntruderState<f64>;
pub type ControlInput = dynamics::ControlInput<f64>;
pub type ControlBounds = dynamics::ControlBounds<f64>;
pub type ImageTrack = sensorsim::ImageTrack<f64>;
pub type FusedIntruderTrack = fusion::FusedIntruderTrack<f64>;
pub type RelativeGeometry = fusion::RelativeGeometry<f64>;
pub type MultiViewFusion = fusion::MultiViewFusion<f64>;
pub type CbfParameters = safety::CbfParameters<f64>;
pub type QpProblem = safety::QpProblem<f64>;
pub type QpSolution = safety::QpSolution<f64>;
pub type GoalSpec = safety::GoalSpec<f64>;
pub type PdGains = safety::PdGains<f64>;
pub type SafetyController = safety::SafetyController<f64>;
