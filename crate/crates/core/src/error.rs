use std::path::PathBuf;

/// Errors raised by the analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("tied values at positions {first} and {second}; add jitter during preprocessing")]
    Tie { first: usize, second: usize },

    #[error("pattern order {0} is outside 2..=6")]
    InvalidOrder(usize),

    #[error("pattern index {index} is outside 1..={max}")]
    InvalidIndex { index: usize, max: usize },

    #[error("invalid lag set: {0}")]
    InvalidLags(String),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("missing value at position {0}")]
    Missing(usize),

    #[error("cannot take the logarithm of non-positive value {value} at position {position}")]
    NonPositiveLog { position: usize, value: f64 },

    #[error("could not break ties after {0} jitter attempts")]
    UnresolvedTies(usize),

    #[error("column {0:?} not found")]
    ColumnNotFound(String),

    #[error("row {row}: cannot parse {cell:?} as a number")]
    Parse { row: usize, cell: String },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("no admissible split point")]
    EmptyRange,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the data itself (ties, length, parse failures)
    /// rather than by I/O or a malformed request.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::TooShort { .. }
                | Error::Tie { .. }
                | Error::NonFinite(_)
                | Error::Missing(_)
                | Error::NonPositiveLog { .. }
                | Error::UnresolvedTies(_)
                | Error::Parse { .. }
                | Error::EmptyRange
        )
    }

    pub fn is_io_error(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Csv(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
