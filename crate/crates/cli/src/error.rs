use thiserror::Error;

use cxr_core::eval::EvalError;
use cxr_core::svm::SvmError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or malformed inputs.
    #[error("{0}")]
    Data(String),
    /// An SVM failed to reach the KKT tolerance.
    #[error("{0}")]
    Convergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Convergence(_) => 4,
        }
    }

    pub(crate) fn data(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {e}"))
    }

    pub(crate) fn from_eval(context: &str, e: EvalError) -> Self {
        let msg = format!("{context}: {e}");
        match e {
            EvalError::Training {
                source: SvmError::NotConverged { .. },
                ..
            } => CliError::Convergence(msg),
            _ => CliError::Data(msg),
        }
    }
}
