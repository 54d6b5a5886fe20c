use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, expected {expected}, got {actual}")]
    DimensionMismatch { op: &'static str, expected: String, actual: String },

    #[error("size must be a power of two, got {0}")]
    NotPowerOfTwo(usize),

    #[error("transform matrix is singular or ill-conditioned (residual {residual:e})")]
    SingularTransform { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative adjacency weight {value} at ({i}, {j}, {t})")]
    NegativeWeight { i: usize, j: usize, t: usize, value: f64 },

    #[error("non-finite value at stage `{stage}`")]
    NonFinite { stage: String },

    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e} at stage `{stage}`")]
    ImaginaryResidue { stage: String, residue: f64, tolerance: f64 },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: duplicate entry (t={t}, src={src}, dst={dst}), first seen on line {first}")]
    DuplicateEntry { line: usize, first: usize, t: usize, src: usize, dst: usize },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("empty evaluation set")]
    EmptySet,

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    #[error("{what} mismatch: expected {expected}, actual {actual}")]
    ShapeMismatch { what: &'static str, expected: usize, actual: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dims(op: &'static str, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::DimensionMismatch { op, expected: expected.into(), actual: actual.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
