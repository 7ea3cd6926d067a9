use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("patient {0} has no visits")]
    EmptySequence(String),

    #[error("trace mismatch: {0}")]
    TraceMismatch(String),

    #[error("invalid config key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("infeasible generator config: {0}")]
    Infeasible(String),

    #[error("schema violation at line {line} (patient {patient}): {reason}")]
    Schema {
        line: usize,
        patient: String,
        reason: String,
    },

    #[error("unknown token `{token}` in family {family}")]
    UnknownToken { family: &'static str, token: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("empty training set")]
    EmptyTraining,

    #[error("non-finite objective at perturbed coordinate {coordinate} of tensor `{tensor}`")]
    NonFinite { tensor: String, coordinate: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("report structure mismatch: {0}")]
    Structure(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("validation: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn dim(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 4,
            _ => 2,
        }
    }
}
