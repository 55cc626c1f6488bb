use thiserror::Error;

/// Errors raised by the lattice toolkit.
///
/// Variants fall into three families that map onto CLI exit codes:
/// validation/hypothesis failures (1), numerical failures (2) and I/O (1).
#[derive(Debug, Error)]
pub enum Error {
    #[error("state length mismatch: expected {expected} entries for n_half={n_half}, got {got}")]
    LengthMismatch {
        expected: usize,
        got: usize,
        n_half: usize,
    },

    #[error("non-finite amplitude at lattice site {site}")]
    NonFinite { site: i64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("blow-up detected at t={t}: non-finite right-hand side")]
    BlowUp { t: f64 },

    #[error("adaptive step underflow at t={t}: dt={dt:e} fell below dt_min={dt_min:e}")]
    StepUnderflow { t: f64, dt: f64, dt_min: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("empty attractor cloud")]
    EmptyCloud,

    #[error("tail index out of range: 2K={two_k} must be below n_half={n_half}")]
    TailOutOfRange { two_k: usize, n_half: usize },

    #[error("errors are not monotonically decreasing with dt: {errors:?}")]
    NonMonotone { errors: Vec<f64> },

    #[error("{0}")]
    Failed(String),

    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error: 2 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BlowUp { .. } | Error::StepUnderflow { .. } | Error::Singular(_) => 2,
            Error::NonMonotone { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
