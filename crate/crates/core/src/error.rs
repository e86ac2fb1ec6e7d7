use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the domain of an operation (negative target, latitude
    /// beyond the Mercator bound, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("schema mismatch: missing columns {missing:?}, extra columns {extra:?}")]
    SchemaMismatch { missing: Vec<String>, extra: Vec<String> },

    #[error("fitting error: {0}")]
    Fit(String),

    #[error("threshold {threshold} (label > {threshold}): {source}")]
    Threshold {
        threshold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("resampling error: {0}")]
    Resampling(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("fetch error: {0}")]
    Fetch(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
