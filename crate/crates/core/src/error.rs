//! Error type shared by all toolkit modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// Log map or parallel transport requested across the cut locus.
    #[error("cut locus: points are antipodal within tolerance (1 + <x,y> = {gap:.3e})")]
    CutLocus { gap: f64 },

    #[error("base points coincide; divergence ratio is undefined")]
    ZeroDistance,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel is not positive semidefinite: coefficient {index} = {value:.3e}")]
    NotPositiveSemidefinite { index: usize, value: f64 },

    #[error("parameter out of supported range: {0}")]
    ParameterRange(String),

    #[error("entropy undefined: density has nonpositive values (min = {min:.3e})")]
    EntropyUndefined { min: f64 },

    #[error("numerical instability at t = {time}: {detail}")]
    Instability { time: f64, detail: String },

    #[error("operation is only defined on the circle (n = 2), got n = {0}")]
    UnsupportedDimension(usize),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
