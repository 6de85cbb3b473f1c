use thiserror::Error;

use crate::polar::IterationRecord;

/// Errors produced by the kernels, the polar iterations and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported Zolotarev order {0} (supported: 1..=8)")]
    UnsupportedOrder(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (pivot {index} = {pivot:.3e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is numerically singular (sigma_min estimate {0:.3e})")]
    Singular(f64),

    #[error("{method} did not converge within {iters} iterations")]
    NonConvergence {
        method: &'static str,
        iters: usize,
        log: Vec<IterationRecord>,
    },

    #[error("infeasible execution plan: {workers} workers cannot host {groups} groups")]
    InfeasiblePlan { workers: usize, groups: usize },

    #[error("term {group} failed: {source}")]
    Term {
        group: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("report serialization failed: {0}")]
    Report(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// Iteration log carried by a non-convergence error, if any.
    pub fn log(&self) -> Option<&[IterationRecord]> {
        match self {
            Error::NonConvergence { log, .. } => Some(log),
            Error::Term { source, .. } => source.log(),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
