use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

/// Errors raised by the analysis, synthesis and simulation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DimensionMismatch { context: &'static str, expected: usize, found: usize },
    InvalidArgument(String),
    InvalidModel(String),
    /// The polytope (or an LP over it) is unbounded.
    Unbounded,
    /// The polytope is empty.
    Empty,
    Infeasible,
    NumericalFailure(String),
    OutOfDomain,
    /// An LP for the successor pair `(source, target)` failed.
    PairLp { source: usize, target: usize, inner: Box<Error> },
    CertificateInvalid { source: usize, target: usize, reason: String },
    RangeTooSmall { cell: usize },
    GapViolated { slack: f64 },
    CclStalled { iterations: usize, trace: f64 },
    VerificationFailed(String),
    FixpointDiverged { rounds: usize },
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { context, expected, found } => {
                write!(f, "dimension mismatch in {context}: expected {expected}, found {found}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            Error::Unbounded => f.write_str("polytope or program is unbounded"),
            Error::Empty => f.write_str("polytope is empty"),
            Error::Infeasible => f.write_str("problem is infeasible"),
            Error::NumericalFailure(msg) => write!(f, "numerical failure: {msg}"),
            Error::OutOfDomain => f.write_str("state lies outside the total state space"),
            Error::PairLp { source, target, inner } => {
                write!(f, "LP for successor pair ({source}, {target}) failed: {inner}")
            }
            Error::CertificateInvalid { source, target, reason } => {
                write!(f, "certificate invalid for pair ({source}, {target}): {reason}")
            }
            Error::RangeTooSmall { cell } => {
                write!(f, "quantizer range M does not exceed |g_i| for cell {cell}")
            }
            Error::GapViolated { slack } => write!(f, "gap condition violated (slack {slack:e})"),
            Error::CclStalled { iterations, trace } => {
                write!(f, "cone complementarity iteration stalled after {iterations} iterations (trace {trace})")
            }
            Error::VerificationFailed(msg) => write!(f, "post-synthesis verification failed: {msg}"),
            Error::FixpointDiverged { rounds } => {
                write!(f, "successor-map refinement did not settle within {rounds} rounds")
            }
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, found })
    }
}
