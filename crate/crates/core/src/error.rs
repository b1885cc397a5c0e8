use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    DimensionMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid {rows}x{cols} too small: {reason}")]
    GridTooSmall {
        rows: usize,
        cols: usize,
        reason: String,
    },

    #[error("non-finite values at iteration {iteration} in {field}")]
    NonFinite { iteration: usize, field: &'static str },

    #[error("degenerate spectrum: every frequency is below the division guard")]
    DegenerateSpectrum,

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("texture dictionary is empty but {targets} pixels need inpainting")]
    EmptyDictionary { targets: usize },

    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by the numerics rather than by inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::DegenerateSpectrum | Error::EmptyDictionary { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Format { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
