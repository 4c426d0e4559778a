use std::path::PathBuf;

/// Errors raised anywhere in the tracking laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("non-finite numeric value: {0}")]
    NumericDomain(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("stale forward cache: parameters changed since the forward pass")]
    StaleCache,

    #[error("training diverged at episode {episode}: {detail}")]
    Diverged { episode: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ParameterDomain(_) | Error::Checkpoint(_) => 2,
            Error::NumericDomain(_) | Error::DimensionMismatch { .. } | Error::StaleCache | Error::Diverged { .. } => 3,
            Error::Io { .. } => 4,
        }
    }
}

pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericDomain(format!("{what} = {value}")))
    }
}
