use thiserror::Error;

/// Failures raised by the solver library.
///
/// Hypothesis violations (for instance an empty Nehari set) are kept apart
/// from configuration and domain errors so that callers can map them onto
/// distinct exit statuses.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("shape mismatch: expected {expected} values, got {found}")]
    Shape { expected: usize, found: usize },
    #[error("no root of the fibering equation in [{lo:e}, {hi:e}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
}

impl Error {
    /// True for errors that signal a failed structural hypothesis of the model
    /// rather than a malformed request.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(self, Error::NoRoot { .. } | Error::Hypothesis(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
