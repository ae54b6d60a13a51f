//! Numerical kernels shared by the physics modules: polynomial roots,
//! two-dimensional Newton iteration, adaptive Gauss-Kronrod quadrature,
//! Bessel functions of the first kind and a dense complex eigensolver.
//!
//! Every routine is a pure function. Tolerances are passed explicitly.

mod bessel;
mod eig;
mod newton;
mod poly;
mod quad;

pub use bessel::{bessel_j1, bessel_j_sequence};
pub use eig::{char_poly, eig_dense, generalized_eig, EigenPair, PencilRoute};
pub use newton::{newton2d, Jacobian};
pub use poly::{poly_eval, poly_roots};
pub use quad::{quad_adaptive, quad_adaptive_panels};

use crate::error::{OqsError, Result};

pub use num_complex::Complex64;

/// Convergence controls. `max_iter` is the iteration budget of iterative
/// solvers and the subdivision budget of the quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs_tol: 1e-12, rel_tol: 1e-10, max_iter: 200 }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        let t = Tolerance { abs_tol, rel_tol, max_iter };
        t.validate()?;
        Ok(t)
    }

    /// Defaults suited to quadrature: same accuracy, larger subdivision budget.
    pub fn quad() -> Self {
        Tolerance { max_iter: 20_000, ..Tolerance::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol >= 0.0
            && self.rel_tol >= 0.0
            && self.abs_tol + self.rel_tol > 0.0
            && self.abs_tol.is_finite()
            && self.rel_tol.is_finite()
            && self.max_iter > 0;
        if ok {
            Ok(())
        } else {
            Err(OqsError::InvalidInput(format!("bad tolerance {self:?}")))
        }
    }
}
