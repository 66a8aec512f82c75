//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulation, sampling, and optimization layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("register size mismatch: {left} vs {right} qubits")]
    SizeMismatch { left: usize, right: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("operator is not Hermitian (max imaginary coefficient {0:.3e})")]
    NonHermitian(f64),

    #[error("term {0} is not diagonal in the requested basis")]
    NonDiagonalTerm(String),

    #[error("distribution not normalized: total {0}")]
    Unnormalized(f64),

    #[error("expectation value has imaginary residue {0:.3e}")]
    ImaginaryResidue(f64),

    #[error("parameter count mismatch: expected {expected}, got {got}")]
    ParameterCount { expected: usize, got: usize },

    #[error("invalid qubit index {index} for {num_qubits}-qubit register")]
    QubitIndex { index: usize, num_qubits: usize },

    #[error("state norm vanished (below {0:.1e}); circuit and projector have negligible overlap")]
    VanishingNorm(f64),

    #[error("all reweighted counts are zero; the projector filtered out every measurement")]
    AllZeroWeight,

    #[error("vanishing denominator in transformed-energy ratio ({0:.3e})")]
    VanishingDenominator(f64),

    #[error("register too large: {got} qubits exceeds limit {limit}")]
    RegisterTooLarge { got: usize, limit: usize },

    #[error("eigensolver did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("objective returned a non-finite value at {0:?}")]
    NonFiniteObjective(Vec<f64>),

    #[error("inconsistent energies: {0}")]
    InconsistentEnergies(String),

    #[error("invalid class map: {0}")]
    InvalidClassMap(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
