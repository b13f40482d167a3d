//! Dense complex linear algebra sized for desk-scale operator experiments.
//!
//! Inner products are conjugate-linear in the second slot:
//! `<x, y> = sum_i x_i * conj(y_i)`. With that convention the rank-one map
//! `xi ⊗ eta : zeta -> <zeta, xi> eta` has the matrix `eta * xi^H`.

mod matrix;
mod norm;
mod scalar_dist;

pub use matrix::{CMatrix, CVector};
pub use norm::{jacobi_svd, op_norm, power_norm, Svd};
pub use scalar_dist::{distance_to_scalars, golden_section, ScalarDistance};

use num_complex::Complex64;
use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type CScalar = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("non-finite entry at position {0}")]
    NonFinite(usize),
    #[error("malformed matrix data: {0}")]
    Malformed(String),
}

/// The rank-one operator `xi ⊗ eta`, i.e. `zeta -> <zeta, xi> eta`.
///
/// Entry `(i, j)` is `eta_i * conj(xi_j)`.
pub fn rank_one(xi: &CVector, eta: &CVector) -> Result<CMatrix, LinalgError> {
    if xi.len() != eta.len() {
        return Err(LinalgError::DimensionMismatch {
            expected: xi.len(),
            found: eta.len(),
        });
    }
    let n = xi.len();
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = eta[i] * xi[j].conj();
        }
    }
    Ok(m)
}

/// Splits `a` into `lambda * I` plus a remainder, with `lambda = trace(a) / n`.
///
/// Returns `lambda` and `op_norm(a - lambda I)`; callers decide scalar-ness by
/// comparing the residual against their own tolerance.
pub fn scalar_identity_part(a: &CMatrix, tol: f64) -> (CScalar, f64) {
    let n = a.rows();
    if n == 0 {
        return (CScalar::new(0.0, 0.0), 0.0);
    }
    let lambda = a.trace() / n as f64;
    let residual = op_norm(&(a - &CMatrix::scalar(n, lambda)), tol);
    (lambda, residual)
}

/// Absolute tolerance scaled by the size of the operands.
pub fn scaled_tol(tol: f64, operands: &[&CMatrix]) -> f64 {
    let scale = operands
        .iter()
        .map(|m| op_norm(m, 1e-12))
        .fold(1.0_f64, f64::max);
    tol * scale
}
