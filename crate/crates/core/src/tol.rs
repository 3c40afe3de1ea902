//! Numerical tolerances used across the crate.
//!
//! Single configuration point: every Hermiticity check, eigensolver
//! convergence threshold and solver residual bound refers to one of these
//! constants instead of a local magic number.

/// Entrywise Hermiticity tolerance, max |A - A^dag|.
pub const HERMITICITY: f64 = 1e-12;

/// Relative tolerance for unitarity and eigen-reconstruction checks.
pub const RECONSTRUCTION: f64 = 1e-10;

/// Jacobi eigensolver convergence threshold on the off-diagonal norm,
/// relative to the Frobenius norm of the input.
pub const JACOBI_OFFDIAG: f64 = 1e-14;

/// Maximum number of Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 60;

/// Relative residual bound contract for SPD solves.
pub const SPD_RESIDUAL: f64 = 1e-8;

/// Allowed imaginary residue of a trace that must be real.
pub const REAL_TRACE: f64 = 1e-10;

/// Pure-state normalization tolerance.
pub const STATE_NORM: f64 = 1e-12;

/// Density matrix trace / eigenvalue tolerance.
pub const DENSITY: f64 = 1e-10;

/// Relative eigenvalue cutoff for pseudo-inverses.
pub const PINV_CUTOFF: f64 = 1e-10;
