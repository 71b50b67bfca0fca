use std::path::PathBuf;

use thiserror::Error;

/// Node location on a tensor grid, x index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeIndex {
    pub i: usize,
    pub j: usize,
}

impl std::fmt::Display for NodeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(i={}, j={})", self.i, self.j)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    ConfigAt {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config not found: {0}")]
    ConfigNotFound(PathBuf),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("non-finite value at {0}")]
    NonFinite(NodeIndex),

    #[error("admissibility band violated at {location:?}: {detail}")]
    Admissibility {
        location: Option<NodeIndex>,
        detail: String,
    },

    #[error("outflow trace left the admissible band at t={t}, x={x}: {detail}")]
    TraceAdmissibility { t: f64, x: f64, detail: String },

    #[error("degenerate magnetic field at {location}: h1={value} < delta={delta}")]
    Degenerate {
        location: NodeIndex,
        value: f64,
        delta: f64,
    },

    #[error("target {target} beyond psi(y_max)={limit} in column {column}; clip the transformed grid to the smallest psi(y_max)")]
    Range {
        column: usize,
        target: f64,
        limit: f64,
    },

    #[error("time step {dt} exceeds the CFL bound {dt_max}")]
    Cfl { dt: f64, dt_max: f64 },

    #[error("singular tridiagonal operator: pivot {pivot:e} at row {row}")]
    SingularOperator { row: usize, pivot: f64 },

    #[error("Picard iteration lost admissibility at n={iteration}, t={t}, x={x}, y={y}: {detail}")]
    IterateAdmissibility {
        iteration: usize,
        t: f64,
        x: f64,
        y: f64,
        detail: String,
    },

    #[error("Picard iteration is not contracting (ratios {ratios:?}); use a smaller time window")]
    Divergence { ratios: Vec<f64> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("undefined ratio: {0}")]
    Undefined(String),

    #[error("schema error in {path}: {detail}")]
    Schema { path: String, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
