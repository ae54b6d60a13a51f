//! Discrete eigenstates of one-dimensional open quantum systems.
//!
//! The crate covers the triple-delta continuum model and tight-binding
//! chains with semi-infinite leads: scattering, resonance poles, the
//! Feshbach effective Hamiltonian, the quadratic eigenvalue problem with its
//! biorthogonal completeness relation, and survival dynamics rebuilt from
//! the discrete states.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuum;
pub mod dynamics;
pub mod error;
pub mod feshbach;
pub mod lattice;
pub mod numerics;
pub mod qep;

pub use error::{OqsError, Result};
pub use num_complex::Complex64;
