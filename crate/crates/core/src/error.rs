use thiserror::Error;

use crate::sdp::SolveStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable spaces differ: {left:?} vs {right:?}")]
    VariableMismatch {
        left: Vec<String>,
        right: Vec<String>,
    },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("polynomial uses non-parameter variable `{0}`")]
    NotParametric(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid parameterized polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("polynomial degree in s is too low: {0}")]
    DegreeTooLow(String),

    #[error("level d = {requested} is below the minimal level {minimal}")]
    LevelTooLow { requested: usize, minimal: usize },

    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("malformed SDP: {0}")]
    MalformedSdp(String),

    #[error("SDP solver failed at level d = {level}: status {status:?}, {detail}")]
    SolverFailed {
        level: usize,
        status: SolveStatus,
        detail: String,
    },

    #[error("certificate identity residual {residual:.3e} exceeds {limit:.1e}")]
    CertificateResidual { residual: f64, limit: f64 },

    #[error("Gauss-Lucas stage 1 failed: {0}")]
    Stage1Failed(Box<Error>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
