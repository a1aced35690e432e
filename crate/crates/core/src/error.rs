use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target sparsity selects fewer than one voxel (pi * p = {0})")]
    TooSparse(f64),

    #[error("degenerate response: {0}")]
    DegenerateResponse(String),

    #[error("no feasible (a, b) region: {0}")]
    NoFeasibleRegion(String),

    #[error("hyperparameters outside the admissible region: {0}")]
    OutsideRegion(String),

    #[error("stick-breaking truncation violated: last fraction is {0}, expected 1")]
    TruncationViolation(f64),

    #[error("invalid chain state: {0}")]
    InvalidState(String),

    #[error("numerical failure at voxel {voxel}: {message}")]
    NumericalFailure { voxel: usize, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {what} at row {row}, column {column}")]
    NonFinite {
        what: String,
        row: usize,
        column: usize,
    },

    #[error("ground-truth coefficients are required for this operation")]
    MissingTruth,

    #[error("a coordinate file is required for Ising priors")]
    MissingCoordinates,

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("degenerate truth support: {0}")]
    DegenerateTruth(String),

    #[error("no kept sweeps in the supplied traces")]
    EmptyTraces,

    #[error("slice {index} out of range for axis {axis} (extent {extent})")]
    SliceOutOfRange {
        axis: usize,
        index: usize,
        extent: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema check failed for {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Process exit code: 2 validation, 3 numerical failure, 4 no feasible region.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalFailure { .. } | Error::DegenerateSeries(_) => 3,
            Error::NoFeasibleRegion(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Error {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Error {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
