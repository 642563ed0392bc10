use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic in {}: expected ORR1, found {found:?}", path.display())]
    BadMagic { path: PathBuf, found: String },

    #[error("payload size mismatch: header implies {expected} bytes, payload has {actual}")]
    PayloadMismatch { expected: u64, actual: u64 },

    #[error("unknown band name {0:?}")]
    UnknownBand(String),

    #[error("duplicate band {0}")]
    DuplicateBand(String),

    #[error("band {0} not present in raster")]
    BandMissing(String),

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unmatched record: {0}")]
    Unmatched(String),

    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Stable machine-readable code for the failure class.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingFile(_) => "E_MISSING_FILE",
            Error::Io { .. } => "E_IO",
            Error::BadMagic { .. }
            | Error::PayloadMismatch { .. }
            | Error::UnknownBand(_)
            | Error::DuplicateBand(_)
            | Error::InvalidRaster(_)
            | Error::Format(_) => "E_FORMAT",
            Error::BandMissing(_) | Error::DimensionMismatch { .. } | Error::Unmatched(_) => {
                "E_INPUT"
            }
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::InvalidArgument(_) | Error::UnknownFeature(_) => "E_CONFIG",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Format(err.to_string())
    }
}
