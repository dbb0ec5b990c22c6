use thiserror::Error;

use crate::hamspec::ParseError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spin magnitude {0}: must be a nonnegative half-integer")]
    InvalidSpin(f64),

    #[error("site index {site} out of range for a system of {sites} spins")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("Hamiltonian is not Hermitian at t = {time} (max deviation {defect:.3e})")]
    NonHermitianAt { time: f64, defect: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("unknown parameter `{name}` for model `{model}`")]
    UnknownParameter { model: String, name: String },

    #[error("invalid value for parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("time-reversed basis state {index} is not aligned with a single basis vector (largest component {largest:.6})")]
    NotBasisAligned { index: usize, largest: f64 },

    #[error("invalid basis labelling: {0}")]
    InvalidLabels(String),

    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub type Result<T> = std::result::Result<T, Error>;
