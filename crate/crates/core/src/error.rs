use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("roi {roi} exceeds map of {height}x{width}")]
    OutOfBounds {
        roi: String,
        height: usize,
        width: usize,
    },
    #[error("roi covers the whole {height}x{width} image; it must be strictly smaller")]
    RoiCoversWholeImage { height: usize, width: usize },
    #[error("invalid relevance map: {0}")]
    InvalidMap(String),
    #[error("total relevance {0:e} is too close to zero")]
    DegenerateDenominator(f64),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("need at least 2 samples, got {0}")]
    BatchTooSmall(usize),
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("contingency table has an empty row or column marginal")]
    DegenerateMarginal,
    #[error("no samples with pa={pa}, y_true={y_true}")]
    EmptyGroupCell { pa: u8, y_true: u8 },
    #[error("sample table is empty")]
    EmptyTable,
    #[error("no activations for pa={0}")]
    EmptyGroup(u8),
    #[error("group means coincide; concept direction is undefined")]
    ZeroDirection,
    #[error("layer {index} is not a valid intervention site (net has {layers} layers)")]
    InvalidLayer { index: usize, layers: usize },
    #[error("phi={target} is unreachable: {reason}")]
    InfeasiblePhi { target: f64, reason: String },
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("bad value: {0}")]
    BadValue(String),
    #[error("no debiased counterpart for {0}")]
    MissingPair(String),
    #[error("incomplete run: {0}")]
    IncompleteRun(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    AtPath {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach the offending file to an error.
    pub fn at(self, path: impl Into<PathBuf>) -> Error {
        Error::AtPath {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping path context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtPath { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        match self.root() {
            Error::OutOfBounds { .. }
            | Error::RoiCoversWholeImage { .. }
            | Error::InvalidMap(_)
            | Error::ShapeMismatch { .. }
            | Error::BadMagic { .. }
            | Error::Truncated(_)
            | Error::NonFinite(_)
            | Error::BadHeader(_)
            | Error::DuplicateId(_)
            | Error::BadValue(_)
            | Error::MissingPair(_)
            | Error::IncompleteRun(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::Csv(_) => true,
            _ => false,
        }
    }
}

pub(crate) fn shape_mismatch(expected: impl ToString, actual: impl ToString) -> Error {
    Error::ShapeMismatch {
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
