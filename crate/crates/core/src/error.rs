use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("parameter component {index} = {value} lies outside [-{half_width}, {half_width}]")]
    OutOfDomain {
        index: usize,
        value: f64,
        half_width: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("non-finite value detected: {0}")]
    Numerical(String),

    #[error("sample (shift {shift}, point {point}) failed: {source}")]
    Sample {
        shift: usize,
        point: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Json(_)
            | Error::InvalidArgument(_)
            | Error::LengthMismatch { .. }
            | Error::DimensionMismatch { .. }
            | Error::OutOfDomain { .. } => 2,
            Error::Budget(_) => 3,
            Error::Numerical(_) => 4,
            Error::Sample { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
