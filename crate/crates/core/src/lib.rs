//! Ravine and Nesterov accelerated gradient methods with general extrapolation
//! coefficients and stochastic gradient errors.
//!
//! The crate is organised bottom-up:
//!
//! * [`problems`]: convex test objectives with exact first and second order oracles.
//! * [`noise`]: iteration-indexed, reproducible zero-mean gradient errors.
//! * [`schedules`]: extrapolation coefficients, the `t_k` sequence and condition checks.
//! * [`methods`]: pure NAG/RAG steppers, drivers, and the Nesterov/Ravine transforms.
//! * [`lyapunov`]: energies, anchor recursions, rate slopes and summability statistics.
//! * [`ode`]: inertial ODEs (plain and Hessian-damped) and discrete/continuous comparison.
//! * [`harness`]: config files, trace/diagnostic formats, Monte Carlo and sweeps.

pub mod harness;
pub mod lyapunov;
pub mod methods;
pub mod noise;
pub mod ode;
pub mod problems;
pub mod schedules;

use thiserror::Error;

/// Dense vector type used everywhere in the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix type used everywhere in the crate.
pub type Matrix = nalgebra::DMatrix<f64>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("prox unavailable for {0} problems")]
    ProxUnavailable(&'static str),

    #[error("no solution-set representation available")]
    NoSolution,

    #[error("t-series did not converge within {terms} terms (tail bound {tail_bound:e})")]
    NonConvergence { terms: usize, tail_bound: f64 },

    #[error("index {k} out of range (valid {lo}..={hi})")]
    IndexOutOfRange { k: usize, lo: usize, hi: usize },

    #[error("trace is missing {0}")]
    MissingRecord(&'static str),

    #[error("constant-step identity requires a constant step size")]
    NonConstantStep,

    #[error("window too short: {points} points (need at least 10)")]
    WindowTooShort { points: usize },

    #[error("numeric failure at k={k}: {reason}")]
    Numeric { k: usize, reason: String },

    #[error("grid coverage failure: {0}")]
    GridCoverage(String),

    #[error("config error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            msg: msg.into(),
        }
    }

    pub(crate) fn config_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line: Some(line),
            msg: msg.into(),
        }
    }

    /// CLI exit code: 1 for configuration problems, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
