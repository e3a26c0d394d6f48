use std::path::PathBuf;

use thiserror::Error;

use crate::engine::SimState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("power flow did not converge after {iterations} iterations (worst mismatch {worst_residual:.3e} pu at bus {worst_bus})")]
    NonConvergence {
        iterations: usize,
        worst_residual: f64,
        worst_bus: usize,
    },

    #[error("network is islanded: bus {0} is not connected to the slack bus")]
    IslandedNetwork(usize),

    #[error("invalid system model: {0}")]
    InvalidModel(String),

    #[error("Newton solve of the algebraic constraints diverged at t = {t:.3} s (residual {residual:.3e})")]
    NewtonDivergence { t: f64, residual: f64 },

    #[error("non-finite value in simulation state at t = {t:.3} s")]
    NumericalBlowup { t: f64, last_good: Box<SimState> },

    #[error("no synchronous inertia: centre-of-inertia frequency is undefined")]
    NoSynchronousInertia,

    #[error("at t = {t:.3} s: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("trace is empty")]
    EmptyTrace,

    #[error("{path}: parse error at line {line}, field `{field}`: {message}")]
    Parse {
        path: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("line {line}: malformed row: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("line {line}: timestamp {timestamp} is earlier than the previous row")]
    NonMonotonicTimestamps { line: usize, timestamp: f64 },

    #[error("line {line}: frequency {frequency} Hz outside sanity window [{lo}, {hi}] Hz")]
    OutOfRangeFrequency {
        line: usize,
        frequency: f64,
        lo: f64,
        hi: f64,
    },

    #[error("line {line}: gap of {missing} samples violates gap policy `error`")]
    GapPolicyViolation { line: usize, missing: usize },

    #[error("reports use different nominal frequencies ({a} Hz vs {b} Hz)")]
    MismatchedNominalFrequency { a: f64, b: f64 },

    #[error("reports use different band half-widths ({a} Hz vs {b} Hz)")]
    MismatchedBand { a: f64, b: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_time(self, t: f64) -> Self {
        match self {
            e @ (Error::AtTime { .. }
            | Error::NewtonDivergence { .. }
            | Error::NumericalBlowup { .. }) => e,
            other => Error::AtTime {
                t,
                source: Box::new(other),
            },
        }
    }
}
