use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different domains")]
    DomainMismatch,

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("solution blew up at t = {t}")]
    BlowUp {
        t: f64,
        /// Last finite field state, for post-mortem inspection.
        last_l2: f64,
    },

    #[error("time window [{t0}, {t1}] is not covered by the trajectory snapshots")]
    WindowNotCovered { t0: f64, t1: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("Newton iteration diverged (residual {residual:.3e} after {iterations} steps)")]
    NewtonDiverged { residual: f64, iterations: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
