use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not unitary: defect {defect:.3e} exceeds tolerance {tolerance:.3e}")]
    NonUnitary { defect: f64, tolerance: f64 },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("spectral decomposition failed: {0}")]
    DecompositionFailed(String),

    #[error("invalid spin j = {0}: 2j must be a positive integer")]
    InvalidSpin(f64),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("rotation symmetry broken: commutator norm {0:.3e}")]
    SymmetryBroken(f64),

    #[error("odd subspace for j = {j} has dimension {actual}, expected j")]
    DimensionUnexpected { j: f64, actual: usize },

    #[error("state is not normalized: norm {0}")]
    NotNormalized(f64),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("averaging window [{start}, {start}+{count}) exceeds series length {len}")]
    WindowOutOfRange { start: usize, count: usize, len: usize },

    #[error("too few points above the fit floor: {0} (need at least 5)")]
    InsufficientDecay(usize),

    #[error("too few points in fit window: {found} (need at least {needed})")]
    InsufficientPoints { found: usize, needed: usize },

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("curves do not share a delta grid")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid config: {0}")]
    Semantic(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("output directory {0} already holds results (pass --resume to continue)")]
    OutputExists(PathBuf),

    #[error("seed {seed}, delta {delta}: {source}")]
    Cell {
        seed: u64,
        delta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short stable identifier used in machine-readable error lines and FFI codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonUnitary { .. } => "non_unitary",
            Error::NotSquare { .. } => "not_square",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DecompositionFailed(_) => "decomposition_failed",
            Error::InvalidSpin(_) => "invalid_spin",
            Error::InvalidPerturbation(_) => "invalid_perturbation",
            Error::SymmetryBroken(_) => "symmetry_broken",
            Error::DimensionUnexpected { .. } => "dimension_unexpected",
            Error::NotNormalized(_) => "not_normalized",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::WindowOutOfRange { .. } => "window_out_of_range",
            Error::InsufficientDecay(_) => "insufficient_decay",
            Error::InsufficientPoints { .. } => "insufficient_points",
            Error::FitDiverged(_) => "fit_diverged",
            Error::GridMismatch => "grid_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Parse { .. } => "parse_error",
            Error::Semantic(_) => "semantic_error",
            Error::Format(_) => "format_error",
            Error::OutputExists(_) => "output_exists",
            Error::Cell { source, .. } => source.kind(),
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
        }
    }
}
