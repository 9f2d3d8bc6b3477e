use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("invalid transition: {0}")]
    InvalidTransition(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("replay memory holds {size} transitions, batch of {batch} requested")]
    NotReady { size: usize, batch: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable short name used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Config(_) => "config",
            Error::InvalidTransition(_) => "invalid_transition",
            Error::NonFinite(_) => "non_finite",
            Error::Usage(_) => "usage",
            Error::NotReady { .. } => "not_ready",
            Error::Internal(_) => "internal",
            Error::Incompatible(_) => "incompatible",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "parse",
        }
    }
}
