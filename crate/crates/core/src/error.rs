use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index set at level {level} has {size} elements, above the cap of {cap}")]
    IndexCap { level: u32, size: u128, cap: u128 },

    #[error("ill-conditioned projection at level {level}: condition estimate {condition:e}")]
    IllConditioned { level: u32, condition: f64 },

    #[error("singular normal equations ({0}); use a ridge parameter > 0")]
    Singular(String),

    #[error("verification failed: measured error {measured:e} exceeds {tolerance:e} at {point:?}")]
    Verification {
        measured: f64,
        tolerance: f64,
        point: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the command line: 1 configuration, 2 verification,
    /// 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Verification { .. } => 2,
            Error::IllConditioned { .. } | Error::Singular(_) | Error::Numerical(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
