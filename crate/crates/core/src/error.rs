use std::path::PathBuf;

use crate::grid::Mask;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    /// A fill was requested on a grid whose every cell is masked.
    #[error("no known cells to interpolate from ({0})")]
    NoKnownData(String),

    #[error("mask selects no cells")]
    EmptyMask,

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{remaining} pixels still unfilled after {iterations} fill iterations")]
    FillExhausted {
        iterations: usize,
        remaining: usize,
        residual: Vec<Mask>,
    },

    #[error("stage completer failed at stage {stage}: {message}")]
    Completer { stage: usize, message: String },
}

impl Error {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    /// Attach the offending file to an error.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::File { .. }) => e,
            other => Error::File {
                path: path.into(),
                source: Box::new(other),
            },
        }
    }

    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Format { .. } => "format",
            Error::Config(_) => "config",
            Error::Invalid(_) => "invalid",
            Error::NoKnownData(_) => "no_known_data",
            Error::EmptyMask => "empty_mask",
            Error::File { source, .. } => source.kind(),
            Error::Io { .. } => "io",
            Error::Image(_) => "image",
            Error::Json(_) => "json",
            Error::FillExhausted { .. } => "fill_exhausted",
            Error::Completer { .. } => "completer",
        }
    }
}
