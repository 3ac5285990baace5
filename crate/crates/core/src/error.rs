use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("unsupported parameters: {0}")]
    UnsupportedParameters(String),

    #[error("model is unstable (max real eigenvalue {max_real_eigenvalue:.6e})")]
    Unstable { max_real_eigenvalue: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation { field, reason: reason.into() }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. }
            | Error::Config(_)
            | Error::UnsupportedInput(_)
            | Error::UnsupportedParameters(_)
            | Error::DimensionMismatch { .. }
            | Error::DegenerateInput(_)
            | Error::InvalidModel(_)
            | Error::Json(_) => 2,
            Error::Unstable { .. } => 3,
            Error::Numerical(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
