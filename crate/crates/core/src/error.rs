use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum QrfError {
    #[error("invalid mass configuration: {0}")]
    InvalidMasses(String),

    #[error("invalid coordinate frame: {0}")]
    InvalidFrame(String),

    #[error("frame mismatch: expected [{expected}], found [{found}]")]
    FrameMismatch { expected: String, found: String },

    #[error("invalid Gaussian branch: {0}")]
    InvalidBranch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "grid extent too small on axis {axis} ({label}): branch {branch} needs [{need_min}, {need_max}], axis covers [{min}, {max}]"
    )]
    ExtentTooSmall {
        axis: usize,
        label: String,
        branch: usize,
        need_min: f64,
        need_max: f64,
        min: f64,
        max: f64,
    },

    #[error("support clipped: mass {mass:e} of the image falls outside the target axes")]
    SupportClipped { mass: f64 },

    #[error("norm drift {drift:e} exceeds budget {budget:e}")]
    NormDrift { drift: f64, budget: f64 },

    #[error("state is not normalized: norm {0}")]
    NotNormalized(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stability budget violated: dt * max T(k) / hbar = {value} (limit {limit})")]
    StabilityBudget { value: f64, limit: f64 },

    #[error("probability mass {mass:e} reached the outer band of axis {axis}")]
    EdgeContact { axis: usize, mass: f64 },

    #[error("trajectory too short: {0} samples (need at least 5)")]
    TrajectoryTooShort(usize),

    #[error("unknown observable `{0}`")]
    UnknownObservable(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl QrfError {
    /// Whether the error signals a violated numeric budget rather than bad input.
    pub fn is_numeric_budget(&self) -> bool {
        matches!(
            self,
            QrfError::NormDrift { .. }
                | QrfError::StabilityBudget { .. }
                | QrfError::EdgeContact { .. }
                | QrfError::SupportClipped { .. }
                | QrfError::ExtentTooSmall { .. }
                | QrfError::Linalg(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, QrfError>;
