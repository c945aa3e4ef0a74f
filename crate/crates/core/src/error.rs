use thiserror::Error;

use crate::grid::GridFunction;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid fractional parameters: {0}")]
    InvalidParams(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("exterior radius {ext_radius} too small for half width {half_width}")]
    ExtRadiusTooSmall { ext_radius: f64, half_width: f64 },

    #[error("invalid weight specification: {0}")]
    InvalidSpec(String),

    #[error("non-finite sample {value} at cell {cell}")]
    NonFiniteSample { cell: usize, value: f64 },

    /// A value that lies outside the admissible set of an operation
    /// (for instance a function with non-positive weighted mass).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("ball of radius {radius} is under-resolved on a grid of spacing {spacing}")]
    Unresolved { radius: f64, spacing: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
        last: Box<GridFunction>,
    },

    #[error("deflated iterate collapsed onto a previous eigenfunction (alignment {alignment:.4}); increase the penalty")]
    Collapse { alignment: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("check `{check}` failed to run: {source}")]
    Check { check: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative solver to reach its tolerance.
    pub fn is_convergence_failure(&self) -> bool {
        match self {
            Error::NotConverged { .. } | Error::Collapse { .. } => true,
            Error::Check { source, .. } => source.is_convergence_failure(),
            _ => false,
        }
    }
}
