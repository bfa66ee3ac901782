use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("character {0:?} is not in the alphabet")]
    Vocabulary(char),

    #[error("transcript of {needed} labels cannot be aligned in {timesteps} timesteps")]
    AlignmentInfeasible { needed: usize, timesteps: usize },

    #[error("invalid probability matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid UTF-8 at byte offset {offset}")]
    Utf8 { offset: usize },

    #[error("empty corpus: no usable lines after filtering")]
    EmptyCorpus,

    #[error("invalid format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("image error for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: ::image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
