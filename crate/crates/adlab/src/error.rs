//! Crate-wide error type.
//!
//! Variants are grouped by how callers should react: configuration problems
//! (bad axes, bad config fields, model/grid mismatches) are recoverable by
//! fixing the input, while observation/budget/io failures are runtime
//! conditions surfaced to the caller with enough context to diagnose them.

use std::fmt;
use std::io;

/// Everything that can go wrong inside the library.
#[derive(Debug)]
pub enum Error {
    /// An axis description that cannot produce a valid grid.
    InvalidAxis { name: String, reason: String },
    /// A configuration field with a missing, malformed, or inconsistent value.
    InvalidConfig { field: String, reason: String },
    /// Configuration text that could not be parsed at all.
    ConfigSyntax { detail: String },
    /// Two objects that must agree in length do not.
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// Weights that should form a probability distribution do not sum to one.
    NotNormalized { what: &'static str, sum: f64 },
    /// A probability weight outside `[0, 1]` (or non-finite).
    InvalidWeight { index: usize, value: f64 },
    /// An input that must be non-empty was empty.
    EmptyInput { what: &'static str },
    /// An index outside its valid range.
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    /// Model parameters or designs outside the model's valid domain.
    Domain { model: &'static str, reason: String },
    /// A response label the model cannot produce.
    ResponseOutOfRange { response: u32, count: usize },
    /// An observed response whose predictive probability is exactly zero
    /// under the current posterior, so no update exists.
    ImpossibleObservation {
        design_index: usize,
        response_index: usize,
        trial: Option<usize>,
    },
    /// A lookahead request whose evaluation tree exceeds the node budget.
    BudgetExceeded { nodes: u128, budget: u64 },
    /// An exhaustive policy enumeration too large to run.
    OracleTooLarge { policies: u128, limit: u64 },
    /// A numeric cross-check that exceeded its tolerance.
    CheckFailed {
        what: &'static str,
        worst: f64,
        tolerance: f64,
    },
    /// More observed responses than a policy tree has depth.
    WalkPastHorizon { responses: usize, depth: usize },
    /// An underlying I/O failure.
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidAxis { name, reason } => {
                write!(f, "invalid axis `{name}`: {reason}")
            }
            Error::InvalidConfig { field, reason } => {
                write!(f, "invalid configuration field `{field}`: {reason}")
            }
            Error::ConfigSyntax { detail } => {
                write!(f, "configuration text could not be parsed: {detail}")
            }
            Error::LengthMismatch {
                what,
                expected,
                got,
            } => {
                write!(f, "length mismatch for {what}: expected {expected}, got {got}")
            }
            Error::NotNormalized { what, sum } => {
                write!(f, "{what} must sum to 1, got {sum}")
            }
            Error::InvalidWeight { index, value } => {
                write!(f, "weight at index {index} is not a probability: {value}")
            }
            Error::EmptyInput { what } => write!(f, "{what} must not be empty"),
            Error::IndexOutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range for length {len}")
            }
            Error::Domain { model, reason } => {
                write!(f, "domain error in {model} model: {reason}")
            }
            Error::ResponseOutOfRange { response, count } => {
                write!(
                    f,
                    "response label {response} outside the {count}-element response space"
                )
            }
            Error::ImpossibleObservation {
                design_index,
                response_index,
                trial,
            } => {
                write!(
                    f,
                    "observed response index {response_index} at design index {design_index} \
                     has zero predictive probability"
                )?;
                if let Some(t) = trial {
                    write!(f, " (trial {t})")?;
                }
                Ok(())
            }
            Error::BudgetExceeded { nodes, budget } => {
                write!(
                    f,
                    "lookahead evaluation tree needs {nodes} nodes, budget is {budget}"
                )
            }
            Error::OracleTooLarge { policies, limit } => {
                write!(
                    f,
                    "exhaustive policy enumeration needs {policies} policies, limit is {limit}"
                )
            }
            Error::CheckFailed {
                what,
                worst,
                tolerance,
            } => {
                write!(
                    f,
                    "{what} check failed: worst deviation {worst:e} exceeds tolerance {tolerance:e}"
                )
            }
            Error::WalkPastHorizon { responses, depth } => {
                write!(
                    f,
                    "{responses} observed responses walk past a policy tree of depth {depth}"
                )
            }
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Error::Io(err)
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
