use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("unknown parameter `{param}` for system `{system}`")]
    UnknownParam { system: String, param: String },

    #[error("parameter `{param}` = {value} outside admissible range: {reason}")]
    ParamOutOfRange {
        param: String,
        value: f64,
        reason: String,
    },

    #[error("non-finite state encountered at step {step}")]
    NonFinite { step: usize },

    #[error("rank collapse in QR at step {step} (diagonal {diag:e}); unstable dimension too large or system degenerate")]
    RankCollapse { step: usize, diag: f64 },

    #[error(
        "stable and unstable subspaces nearly tangent at step {step} (condition number {cond:e})"
    )]
    NearTangency { step: usize, cond: f64 },

    #[error("window too short: {0}")]
    Window(String),

    #[error("dimension cap exceeded: {0}")]
    DimensionCap(String),

    #[error("map is not expanding: {0}")]
    NotExpanding(String),

    #[error("power iteration did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::RankCollapse { .. }
                | Error::NearTangency { .. }
                | Error::NotExpanding(_)
                | Error::NoConvergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
