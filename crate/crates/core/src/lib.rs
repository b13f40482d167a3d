//! Explicit implementing operators for bounded derivations on
//! finite-dimensional nest and triangular algebras.
//!
//! Given a derivation `delta` on a nest algebra `S ⊂ B(C^n)`, tabulated on the
//! matrix units of `S`, the [`construct`] module assembles operators
//! `b1, c1, b2 = b1 + c1, c2` and `b = b2 + c2` from values of `delta` alone,
//! and measures how well `d_b(a) = ba - ab` reproduces `delta` on the pieces
//! `Sp`, `p⊥Sp⊥` and `pSp⊥` of the algebra. The [`chain`] module runs the
//! per-projection construction along the whole invariant chain.

pub mod algebra;
pub mod chain;
pub mod cli;
pub mod construct;
pub mod derivation;
pub mod linalg;
pub mod random;

pub use algebra::{MatrixUnit, NestAlgebra};
pub use derivation::DerivationTable;
pub use linalg::{CMatrix, CScalar, CVector};
