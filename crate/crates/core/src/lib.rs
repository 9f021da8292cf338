//! Forced oscillations of time-periodic Hamiltonian systems on the torus.
//!
//! The pipeline truncates the loop space to finitely many Fourier modes in the
//! rotation basis, eliminates the high modes by a contraction (saddle-point
//! reduction), and searches the remaining finite-dimensional function for
//! critical points. Each critical loop is certified against the Hamiltonian
//! ODE, graded by a spectral index, and the resulting counts are checked
//! against the cup-length and Betti-sum lower bounds for `T^{2n}`.

pub mod action;
pub mod cli;
pub mod error;
pub mod hamiltonians;
pub mod homology;
pub mod indices;
pub mod invariant_counts;
pub mod loop_space;
pub mod ode;
pub mod reduction;
pub mod search;

pub use error::{Error, Result};
