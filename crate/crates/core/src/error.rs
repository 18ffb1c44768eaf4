use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vector field is singular at {at:?} (|S| = {norm:e})")]
    SingularField { at: Vec<f64>, norm: f64 },

    #[error("non-finite state encountered: {at:?}")]
    NonFinite { at: Vec<f64> },

    #[error("system `{system}` has no inverse map; backward evolution is unavailable")]
    MissingInverse { system: String },

    #[error("operation requires a {expected}, got `{system}`")]
    WrongKind { expected: &'static str, system: String },

    #[error("frame degenerate: column {column} has reduced norm {norm:e} (elapsed {elapsed})")]
    DegenerateFrame { column: usize, norm: f64, elapsed: f64 },

    #[error("zero reference vector")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("Newton matrix is singular: near-neutral multiplier {multiplier}")]
    SingularNewton { multiplier: f64 },

    #[error("det(A^{period} - I) = 0: period is not hyperbolic")]
    NonHyperbolicPeriod { period: usize },

    #[error("periodic orbit has not been verified")]
    UnverifiedOrbit,

    #[error("measures live on different geometries")]
    GeometryMismatch,

    #[error("empty trajectory or measure")]
    Empty,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("malformed system description: {0}")]
    Malformed(String),
}
