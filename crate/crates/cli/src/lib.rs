//! Front end for the `pwaq-core` toolkit: system files, reports, traces and
//! plots.

pub mod args;
pub mod commands;
pub mod files;
pub mod plot;
pub mod report;

use pwaq_core::optim::LpOptions;
use pwaq_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CERTIFICATE: i32 = 4;
pub const EXIT_SYNTHESIS: i32 = 5;
pub const EXIT_PROTOCOL: i32 = 6;

pub const LP_TOL_ENV: &str = "PWAQ_LP_TOL";

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(EXIT_VALIDATION, message)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Exit code for a core error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DimensionMismatch { .. }
        | Error::InvalidArgument(_)
        | Error::InvalidModel(_)
        | Error::OutOfDomain
        | Error::Unsupported(_) => EXIT_VALIDATION,
        Error::Unbounded | Error::Empty | Error::Infeasible | Error::NumericalFailure(_) | Error::PairLp { .. } => {
            EXIT_SOLVER
        }
        Error::CertificateInvalid { .. } | Error::RangeTooSmall { .. } | Error::GapViolated { .. } => EXIT_CERTIFICATE,
        Error::CclStalled { .. } | Error::VerificationFailed(_) | Error::FixpointDiverged { .. } => EXIT_SYNTHESIS,
    }
}

/// Message with cell indices shifted to the 1-based convention of the CLI.
pub fn describe(e: &Error) -> String {
    match e {
        Error::CertificateInvalid { source, target, reason } => {
            format!("certificate invalid for pair ({}, {}): {reason}", source + 1, target + 1)
        }
        Error::PairLp { source, target, inner } => {
            format!("LP for successor pair ({}, {}) failed: {}", source + 1, target + 1, describe(inner))
        }
        Error::RangeTooSmall { cell } => format!("quantizer range does not exceed |g| on cell {}", cell + 1),
        other => other.to_string(),
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::new(exit_code(&e), describe(&e))
    }
}

/// LP options with the tolerance taken from the environment when set.
pub fn lp_options() -> Result<LpOptions, CliError> {
    match std::env::var(LP_TOL_ENV) {
        Err(_) => Ok(LpOptions::default()),
        Ok(s) => {
            let tol: f64 = s.trim().parse().map_err(|_| CliError::validation(format!("{LP_TOL_ENV}: not a number: {s:?}")))?;
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(CliError::validation(format!("{LP_TOL_ENV} must be positive")));
            }
            Ok(LpOptions::with_tol(tol))
        }
    }
}
