use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration blew up at step {step}")]
    BlowUp { step: usize },

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("CFL condition violated (courant number {courant:.4} > 0.5); admissible dt <= {admissible_dt:e}")]
    Cfl { courant: f64, admissible_dt: f64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
