use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the clustering, validity, PCA and catalog routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("column '{column}' has zero standard deviation")]
    ConstantColumn { column: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite distance d({i},{j})")]
    NonFiniteDistance { i: usize, j: usize },

    #[error("undefined for one cluster")]
    SingleCluster,

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    #[error("neighbor count L={l} out of range 1..={max}")]
    NeighborCountOutOfRange { l: usize, max: usize },

    #[error("only {found} non-degenerate components, need {needed}")]
    DegenerateComponents { found: usize, needed: usize },

    #[error("input file not found: {}", .0.display())]
    InputNotFound(PathBuf),

    #[error("{}:{line}: {message}", path.display())]
    MalformedRow {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}:{line}: duplicate trigger_id {trigger_id}", path.display())]
    DuplicateTrigger {
        path: PathBuf,
        line: u64,
        trigger_id: u64,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
