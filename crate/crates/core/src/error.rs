use thiserror::Error;

use crate::linsolve::SolveStats;
use crate::ptl::CycleReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid boundary condition: {0}")]
    InvalidBoundary(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Lagged temperature (or another power-law base) outside the model's domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("operator is not positive definite: {0}")]
    Indefinite(String),

    #[error("zero pivot in ILU0 factorization at row {row}")]
    ZeroPivot { row: usize },

    #[error("linear solver diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error(
        "linear solver did not converge: relative residual {:.3e} after {} iterations",
        .0.final_relative_residual,
        .0.iterations
    )]
    NotConverged(SolveStats),

    #[error("non-finite value produced by {scheme} at stage {stage}")]
    BlowUp { scheme: &'static str, stage: usize },

    #[error("cycle cap of {max_cycles} exceeded with {remaining:e} of the outer step left")]
    CycleCap {
        max_cycles: usize,
        remaining: f64,
        report: Box<CycleReport>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
