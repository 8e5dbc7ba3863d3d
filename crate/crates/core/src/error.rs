use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("config key `{key}`: {reason}")]
    ConfigKey { key: String, reason: String },

    #[error("degenerate triangle {triangle} (signed area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("conflicting Dirichlet values for node {node}: {first} vs {second}")]
    ConstraintConflict { node: usize, first: f64, second: f64 },

    #[error("matrix is not positive definite: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("solver failed: relative residual {residual:e}")]
    SolverFailure { residual: f64 },

    #[error("eigen decomposition failed: {0}")]
    Decomposition(String),

    #[error("coarse system is rank deficient at basis {basis} ({label})")]
    RankDeficient { basis: usize, label: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("norm is undefined: reference {0} vanishes")]
    UndefinedNorm(&'static str),

    #[error("basis cache rejected: {0}")]
    CacheInvalid(String),

    #[error("file is corrupt or truncated: {0}")]
    Corrupt(String),

    #[error("layer {layer}: {source}")]
    AtLayer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("neighborhood {omega}: {source}")]
    AtNeighborhood {
        omega: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at_layer(self, layer: usize) -> Self {
        Error::AtLayer {
            layer,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_neighborhood(self, omega: usize) -> Self {
        Error::AtNeighborhood {
            omega,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
