use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not Hermitian (max |A - A\u{2020}| entry = {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Fast evolution path requested for a Hamiltonian without the
    /// required dephasing structure.
    #[error("structure violation: {0}")]
    StructureViolation(String),

    /// The dynamics left the correlated sector assumed by the model
    /// (branch mixing above tolerance).
    #[error("model violation: {0}")]
    ModelViolation(String),

    /// A numerical invariant (norm, trace, energy conservation) drifted
    /// beyond its tolerance.
    #[error("numerical invariant breach: {0}")]
    InvariantBreach(String),
}

pub type Result<T> = std::result::Result<T, Error>;
