use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("spectral field is not Hermitian-symmetric (residue {residue:.3e} at k = {mode})")]
    NotHermitian { mode: i64, residue: f64 },

    #[error("nonpositive diffusivity {value:.3e} at grid index {index}")]
    Domain { index: usize, value: f64 },

    #[error("simulation unstable at step {step}: |T_k| = {magnitude:.3e}")]
    Unstable { step: usize, magnitude: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("belief has kind {found:?}, expected {expected:?}")]
    WrongKind {
        expected: crate::kalman::BeliefKind,
        found: crate::kalman::BeliefKind,
    },

    #[error("generator is not Hurwitz; offending eigenvalues: {0:?}")]
    NotHurwitz(Vec<(f64, f64)>),

    #[error("calibration is underdetermined: {0}")]
    Underdetermined(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
