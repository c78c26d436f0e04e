use std::path::PathBuf;

use crate::comparison::Pair;

/// Errors raised anywhere in the embedding pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid comparison at index {index}: {reason}")]
    InvalidComparison { index: usize, reason: String },

    #[error("constraint graph is cyclic: {}", format_cycle(.0))]
    Cyclic(Vec<Pair>),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid feature table: {0}")]
    InvalidFeatures(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range for {len} items")]
    OutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty comparison set: {0}")]
    EmptyComparisons(&'static str),

    #[error("solver diverged at iteration {iteration} (objective {objective})")]
    Diverged {
        iteration: usize,
        objective: f64,
        trace: Box<crate::solver::TraceLog>,
    },

    #[error("eigendecomposition failed for matrix {0}")]
    Eigen(usize),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status: 1 for validation/parse problems, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } | Error::Eigen(_) => 2,
            _ => 1,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_cycle(cycle: &[Pair]) -> String {
    let mut parts: Vec<String> = cycle.iter().map(|p| p.to_string()).collect();
    if let Some(first) = cycle.first() {
        parts.push(first.to_string());
    }
    parts.join(" -> ")
}

pub type Result<T> = std::result::Result<T, Error>;
