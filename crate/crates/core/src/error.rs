use std::path::PathBuf;

use num_complex::Complex64;
use thiserror::Error;

use crate::estimation::FitResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter or input record violates a stated bound.
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// A transfer function was evaluated on top of its pole.
    #[error("{what} evaluated at its pole s = {s} (pole at {pole})")]
    Pole {
        what: &'static str,
        s: Complex64,
        pole: f64,
    },

    #[error("algebraic loop: |1 - L| = {magnitude:e} at s = {s} is below {tolerance:e}")]
    AlgebraicLoop {
        s: Complex64,
        magnitude: f64,
        tolerance: f64,
    },

    #[error("ideal compensator infeasible: 2(k1 + k4) = {coupling} >= gamma_p = {gamma_p}")]
    InfeasibleIdeal { coupling: f64, gamma_p: f64 },

    #[error("band edge must be positive, got {0}")]
    EmptyBand(f64),

    /// Evaluation failed at one point of a grid.
    #[error("at grid point {index} (detuning {detuning}): {source}")]
    AtGridPoint {
        index: usize,
        detuning: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("fit did not converge after {iterations} iterations (best residual {:e})", best.residual)]
    NotConverged {
        iterations: usize,
        best: Box<FitResult>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical model (poles, singular loops,
    /// non-convergence), as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Pole { .. }
            | Error::AlgebraicLoop { .. }
            | Error::NotConverged { .. } => true,
            Error::AtGridPoint { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
