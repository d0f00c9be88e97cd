//! Error type shared across the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Problem or experiment parameters violate an invariant.
    InvalidConfig(String),
    /// A runtime value is inconsistent with the state it was applied to.
    InvalidState(String),
    /// Schedule periods do not sum to the horizon.
    ScheduleMismatch { period_sum: usize, horizon: usize },
    /// A schedule period was zero.
    InvalidPeriod,
    /// Homogeneous period does not divide the horizon.
    IndivisibleHorizon { period: usize, horizon: usize },
    /// Slot index outside `[1, horizon]`.
    SlotOutOfRange { slot: usize, horizon: usize },
    /// Requested file index is not in the library.
    FileOutOfLibrary { file: usize, library_size: usize },
    /// Trace has no request left for the queried slot.
    TraceExhausted { slot: usize, trace_len: usize },
    /// Trace construction from an empty event list.
    EmptyTrace,
    /// Probability vector is not a distribution.
    InvalidDistribution(String),
    /// Exhaustive subset enumeration would exceed its size guard.
    CombinatorialBlowup { subsets: u128, limit: u128 },
    /// Input line could not be parsed.
    Parse { line: usize, message: String },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::InvalidState(msg) => write!(f, "invalid state: {msg}"),
            Error::ScheduleMismatch { period_sum, horizon } => write!(
                f,
                "schedule periods sum to {period_sum} but the horizon is {horizon}"
            ),
            Error::InvalidPeriod => write!(f, "schedule periods must be at least 1"),
            Error::IndivisibleHorizon { period, horizon } => {
                write!(f, "period {period} does not divide horizon {horizon}")
            }
            Error::SlotOutOfRange { slot, horizon } => {
                write!(f, "slot {slot} outside [1, {horizon}]")
            }
            Error::FileOutOfLibrary { file, library_size } => {
                write!(f, "file {file} outside library of size {library_size}")
            }
            Error::TraceExhausted { slot, trace_len } => {
                write!(f, "slot {slot} beyond trace of length {trace_len}")
            }
            Error::EmptyTrace => write!(f, "trace contains no events"),
            Error::InvalidDistribution(msg) => write!(f, "invalid distribution: {msg}"),
            Error::CombinatorialBlowup { subsets, limit } => {
                write!(f, "{subsets} subsets exceeds enumeration guard of {limit}")
            }
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Io(err) => write!(f, "io error: {err}"),
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

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
