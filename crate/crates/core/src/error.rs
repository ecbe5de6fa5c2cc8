use thiserror::Error;

/// Errors shared across the geometry and assembly modules.
///
/// Infeasibility of a smoothing problem is *not* an error: solvers return it
/// as a value together with a certificate. Errors here are misuse (bad
/// dimensions, invalid points, broken preconditions) or capacity limits.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("capacity exceeded: required order {required} > i_max {limit}")]
    Capacity { required: u32, limit: u32 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GeomError>;
