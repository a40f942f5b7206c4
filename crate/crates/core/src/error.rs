use thiserror::Error;

use crate::equilibrium::Assumption2Report;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (bad indices, empty groups, wrong lengths).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The peer-effect strength is outside the admissible region.
    #[error("invalid regime: {message}")]
    InvalidRegime {
        message: String,
        report: Option<Assumption2Report>,
    },

    /// The eigenvector matrix of a directed network is (numerically) singular.
    #[error("network is not numerically diagonalizable (eigenvector condition number {condition:.3e})")]
    NonDiagonalizable { condition: f64 },

    /// A quadratic objective that must be concave is not.
    #[error("objective is not concave: {0}")]
    IndefiniteObjective(String),

    /// The numeric oracle found a direction of non-negative curvature or diverged.
    #[error("oracle detected a non-concave objective: {0}")]
    NonConcave(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::InvalidRegime {
            message: msg.into(),
            report: None,
        }
    }
}
