use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: column `{column}` not found in header")]
    Schema { column: String },

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("bounds error: {0}")]
    Bounds(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("degenerate regressor: {0}")]
    Degenerate(String),

    #[error(
        "insufficient excitation: {what} has numerical rank {rank}, full row rank {required} needed"
    )]
    Excitation {
        what: String,
        rank: usize,
        required: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported moment order {order} (at most {max})")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("generation error: {0}")]
    Generation(String),

    #[error("unobservable pair: observability rank {rank} < state dimension {n}")]
    Unobservable { rank: usize, n: usize },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "schema",
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Bounds(_) => "bounds",
            Error::Dimension(_) => "dimension",
            Error::Degenerate(_) => "degenerate",
            Error::Excitation { .. } => "excitation",
            Error::Domain(_) => "domain",
            Error::UnsupportedOrder { .. } => "unsupported_order",
            Error::Generation(_) => "generation",
            Error::Unobservable { .. } => "unobservable",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
