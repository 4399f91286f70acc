use thiserror::Error;

/// Errors produced by the detect-and-avoid toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DaaError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("range must be positive, got {0}")]
    NonPositiveRange(f64),
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("closure rate must be positive, got {0}")]
    NonPositiveClosure(f64),
    #[error("unknown camera id {0}")]
    UnknownCamera(u8),
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("measurement noise is not symmetric positive-definite")]
    NonSpdNoise,
    #[error("range {0} m is below the 1 m singularity guard")]
    SingularRange(f64),
    #[error("relative geometry is not valid")]
    InvalidGeometry,
    #[error("intruder speed below 0.1 m/s, heading undefined")]
    HeadingUndefined,
    #[error("episode log is empty")]
    EmptyLog,
    #[error("episode log too short: need at least {need} rows, got {got}")]
    TooShortLog { need: usize, got: usize },
    #[error("no episodes given")]
    NoEpisodes,
    #[error("baseline P(NMAC) is zero, risk ratio undefined")]
    UndefinedRiskRatio,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = DaaError> = std::result::Result<T, E>;
