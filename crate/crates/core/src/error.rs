use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for {bits}-bit binary expansion")]
    IndexOutOfRange { index: usize, bits: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("layer {layer} outside [2, {m}]")]
    LayerOutOfRange { layer: usize, m: usize },

    #[error("matrix-vector pair is malformed: {0}")]
    MalformedPair(String),

    #[error("length mismatch: expected {expected}, got {got} ({what})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("zero correlation peak, polarity is ambiguous")]
    AmbiguousPolarity,

    #[error("delay {tau:e} s exceeds the cyclic-prefix budget {limit:e} s")]
    DelayOutOfRange { tau: f64, limit: f64 },

    #[error("infeasible parity allocation: {0}")]
    InfeasibleAllocation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}
