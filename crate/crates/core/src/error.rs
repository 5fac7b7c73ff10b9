use thiserror::Error;

use crate::index::MultiIndex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("monomial repeats index {0}; only multilinear monomials are supported")]
    RepeatedIndex(MultiIndex),

    #[error("monomial degree {0} exceeds the supported maximum of 2")]
    DegreeTooHigh(usize),

    #[error("invalid rectangle {0}: every coordinate must be at least 1")]
    InvalidRectangle(MultiIndex),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid innovation law: {0}")]
    InvalidLaw(String),

    #[error("term budget exceeded: {terms} stored monomials > budget {budget}")]
    TermBudgetExceeded { terms: usize, budget: usize },

    #[error("oracle window has {sites} sites; at most {max} can be enumerated")]
    WindowTooLarge { sites: usize, max: usize },

    #[error("oracle window is missing site {0}")]
    WindowMissingSite(MultiIndex),

    #[error("simulation window of {cells} cells exceeds the budget of {budget}")]
    SimulationTooLarge { cells: usize, budget: usize },

    #[error("expansion is not a martingale difference at {0}")]
    NotMartingaleDifference(MultiIndex),

    #[error("invalid ladder: {0}")]
    InvalidLadder(String),

    #[error("invalid samples: {0}")]
    InvalidSamples(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("oracle mismatch on {witness} at cutoff {cutoff}: {detail}")]
    OracleMismatch { witness: String, cutoff: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
