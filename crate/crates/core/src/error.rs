use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("x0 = {x0} is not on the position grid of size {n}; use -pi + 2*pi*j/{n}")]
    OffGrid { x0: f64, n: usize },

    #[error("state is in the {found:?} basis, expected {expected:?}")]
    WrongBasis {
        expected: crate::lattice::Basis,
        found: crate::lattice::Basis,
    },

    #[error("size mismatch: expected {expected}, got {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("fraction {0} outside (0, 1]")]
    Fraction(f64),

    #[error("dense matrices are capped at N = {cap}, requested N = {n}")]
    DenseCap { n: usize, cap: usize },

    #[error("realization index {index} out of range (ensemble has {count})")]
    RealizationIndex { index: usize, count: usize },

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("density of states falls to {min:.3e} (floor {floor:.1e}); lower t_max_spectral or raise the ensemble size")]
    DensityOfStatesFloor { min: f64, floor: f64 },

    #[error("too few points above the noise floor for a fit ({found} < {needed})")]
    InsufficientData { found: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
