use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A record line that could not be parsed or violates a field invariant.
    #[error("{file}:{line}: field `{field}`: {message}")]
    Malformed {
        file: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("duplicate {kind} id `{id}` with conflicting fields")]
    DuplicateConflict { kind: &'static str, id: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested quantity is mathematically undefined for the input
    /// (zero variance, zero views, empty sample, ...).
    #[error("undefined: {0}")]
    Undefined(String),

    #[error("rank-deficient design matrix; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("sharers missing from the user table: {}", .0.join(", "))]
    UnknownUsers(Vec<String>),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn undefined(msg: impl Into<String>) -> Self {
        Error::Undefined(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the failure is caused by the caller's data or configuration
    /// rather than by the environment.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_validation(),
            Error::Io { .. } | Error::Json(_) => false,
            _ => true,
        }
    }
}
