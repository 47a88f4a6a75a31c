use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("vector is not tangent at its base point (inner product {inner:e})")]
    NotTangent { inner: f64 },

    #[error("point is off the sphere (squared norm {norm_sq}, expected {n})")]
    OffSphere { norm_sq: f64, n: usize },

    #[error("dense tensor with {entries} entries exceeds the limit of {limit}")]
    TooLarge { entries: u128, limit: u128 },

    #[error("integration failed at step {step}: {reason}")]
    Integration { step: usize, reason: String },

    #[error("region has zero volume")]
    EmptyRegion,

    #[error("conductance condition violated: pi(A) pi(A_eps^c) - 4 pi(shell) = {denominator:e} <= 0")]
    ConductanceCondition { denominator: f64 },

    #[error("variance estimate is not positive ({0:e})")]
    ZeroVariance(f64),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("flat landscape: every point is critical")]
    FlatLandscape,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
