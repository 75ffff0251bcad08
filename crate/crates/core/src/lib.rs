//! Closed-system quantum decoherence toolkit.
//!
//! Evolves composite system–apparatus–environment states unitarily,
//! tracks the decay of off-diagonal terms of reduced states, and checks
//! that the environment-selected pointer basis is the one singled out by
//! the total Hamiltonian (commutation plus degeneracy containment).
//!
//! Layers, bottom up:
//! - [`linalg`]: dense complex algebra on tensor-factorized spaces
//! - [`models`]: measurement states, spin-bath Hamiltonians, coarse-grained pointers
//! - [`evolution`]: unitary trajectories, branch extraction, reduced states
//! - [`analysis`]: decoherence factors, diagonality, convergence, trace distance
//! - [`pointer`]: preferred-context checks, stability norms, regimes, predictability sieve

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod models;
pub mod pointer;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
