//! Jastrow-projected quantum circuit (JQC) states for lattice ground-state
//! problems: an exact state-vector path, a shot-sampled entangled-copy
//! measurement-reweighting path, and a truncated-projector transformed-
//! Hamiltonian path, plus batch experiment drivers.

pub mod error;
pub mod experiments;
pub mod jastrow;
pub mod measurement;
pub mod optimize;
pub mod pauli;
pub mod statevector;

pub use error::{Error, Result};
