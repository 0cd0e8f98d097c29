use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure categories surfaced by the library and mapped onto CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("treatment {treatment} has no units assigned")]
    EmptyArm { treatment: usize },

    #[error("treatment {treatment} has a single unit; its sample variance is undefined")]
    VarianceUndefined { treatment: usize },

    #[error("degenerate inference: {0}")]
    Degenerate(String),

    #[error("estimand undefined: {0}")]
    Undefined(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn parse(row: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            row,
            message: msg.into(),
        }
    }

    /// Process exit code: 2 input error, 3 statistical degeneracy, 4 infeasibility.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_)
            | Error::Parse { .. }
            | Error::EmptyArm { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::VarianceUndefined { .. } | Error::Degenerate(_) | Error::Undefined(_) => 3,
            Error::Infeasible(_) => 4,
        }
    }
}
