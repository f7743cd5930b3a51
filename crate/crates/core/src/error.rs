use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes; the CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Numerical,
    RetryBudget,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: column `{column}`: {message}")]
    Csv {
        file: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("panel `{country}` has {weeks} weeks, at least {min} are required")]
    PanelTooShort {
        country: String,
        weeks: usize,
        min: usize,
    },

    #[error("non-finite transition log-rate (offending covariate index {index})")]
    NonFiniteRate { index: usize },

    #[error("emission rate overflow in state {state}")]
    EmissionOverflow { state: usize },

    #[error("parameter constraint violated: {0}")]
    Constraint(String),

    #[error("exhaustive enumeration refused: {weeks} weeks exceeds the limit of {max}")]
    EnumerationTooLarge { weeks: usize, max: usize },

    #[error("labels of panel `{0}` leave no state path with positive probability")]
    InconsistentLabels(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("retry budget exhausted for `{country}` after {attempts} attempts")]
    RetryExhausted { country: String, attempts: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Csv { .. }
            | Error::Invalid(_)
            | Error::ZeroVariance(_)
            | Error::PanelTooShort { .. }
            | Error::Constraint(_)
            | Error::EnumerationTooLarge { .. }
            | Error::Io(_)
            | Error::Json(_) => ErrorCategory::Validation,
            Error::NonFiniteRate { .. }
            | Error::EmissionOverflow { .. }
            | Error::InconsistentLabels(_)
            | Error::Numerical(_) => ErrorCategory::Numerical,
            Error::RetryExhausted { .. } => ErrorCategory::RetryBudget,
        }
    }

    pub(crate) fn csv(file: &str, line: u64, column: &str, message: impl Into<String>) -> Self {
        Error::Csv {
            file: file.to_string(),
            line,
            column: column.to_string(),
            message: message.into(),
        }
    }
}
