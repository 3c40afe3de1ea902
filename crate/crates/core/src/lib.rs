//! Classical simulator and benchmark harness for quantum reservoir computers
//! with kernel-optimized measurement readouts.
//!
//! The library covers the full pipeline: data encoding into qubit product
//! states, reservoir evolution (stateless QELM or stateful QRC with an
//! ancilla memory register), kernel ridge regression over the space of
//! Hermitian observables, construction of the optimal measurement operator,
//! its decomposition into implementable operator subsets (Pauli projection
//! or diagonalization with Z-string coefficients), and the benchmark tasks
//! used to evaluate the resulting models (Lorenz-63, Mackey-Glass, random
//! harmonic signals, digit classification).

pub mod decompose;
pub mod experiment;
pub mod numerics;
pub mod quantum;
pub mod tasks;
pub mod tol;
pub mod training;

mod error;

pub use error::Error;

/// Convenience result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
