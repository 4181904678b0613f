use std::io;

use thiserror::Error;

/// Errors raised by the sensor-selection toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rank out of range: {0}")]
    RankOutOfRange(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("degenerate noise model: every noise variance is at or below the floor")]
    DegenerateNoise,
    #[error("sensor index {index} out of range for {n} candidates")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("sensor index {0} appears more than once")]
    DuplicateSensor(usize),
    #[error("Fisher information matrix is singular (condition number {0:.3e})")]
    SingularFim(f64),
    #[error("{p} sensors cannot determine {r1} latent variables")]
    UnderSampled { p: usize, r1: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("reference data has zero Frobenius norm")]
    ZeroData,
    #[error("infeasible sensor budget p={p} (need {r1} <= p <= {n})")]
    InfeasibleBudget { p: usize, r1: usize, n: usize },
    #[error("exhaustive search over {0} subsets exceeds the enumeration bound")]
    TooLarge(u128),
    #[error("invalid dimensions: {0}")]
    DimensionError(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("inconsistent grid: {0}")]
    InconsistentGrid(String),
    #[error("mask selects no grid cells")]
    EmptyMask,
    #[error("bad fold count k={k} for {m} columns")]
    BadFoldCount { k: usize, m: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors that stem from the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalFailure(_) | Error::DegenerateNoise | Error::SingularFim(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
