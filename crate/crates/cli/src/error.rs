use frameflow_core::Error as CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{op} failed: {source}")]
    Numerical {
        op: &'static str,
        #[source]
        source: CoreError,
    },

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

/// Attribute a core error to the operation that raised it. Errors caused
/// by the inputs rather than the numerics count as configuration errors.
pub fn failed(op: &'static str) -> impl FnOnce(CoreError) -> CliError {
    move |source| match source {
        CoreError::InvalidParameter(_)
        | CoreError::UnknownSystem(_)
        | CoreError::Malformed(_)
        | CoreError::WrongKind { .. }
        | CoreError::MissingInverse { .. }
        | CoreError::DimensionMismatch { .. } => CliError::Config(format!("{op}: {source}")),
        source => CliError::Numerical { op, source },
    }
}

pub fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
