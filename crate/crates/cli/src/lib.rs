//! Configuration, orchestration and persistence for the `nehari` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod fieldio;
pub mod run;

pub const EXIT_OK: u8 = 0;
pub const EXIT_HYPOTHESIS: u8 = 2;
pub const EXIT_NO_CONVERGENCE: u8 = 3;
pub const EXIT_BAD_CONFIG: u8 = 4;
const EXIT_OTHER: u8 = 1;

/// Malformed or inconsistent configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Exit status for a failed run.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_BAD_CONFIG;
    }
    if let Some(e) = err.downcast_ref::<nehari::Error>() {
        return if e.is_hypothesis_violation() { EXIT_HYPOTHESIS } else { EXIT_BAD_CONFIG };
    }
    EXIT_OTHER
}
