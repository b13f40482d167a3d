//! Seeded generators for test and experiment inputs.
//!
//! Everything is driven by `ChaCha8Rng`, so a seed fixes the output on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::NestAlgebra;
use crate::linalg::{CMatrix, CScalar, CVector};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex standard normal: real and imaginary parts i.i.d. `N(0, 1/2)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> CScalar {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    CScalar::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let data = (0..n * n).map(|_| complex_normal(rng)).collect();
    CMatrix::from_row_major(n, n, data).expect("gaussian entries are finite")
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from((0..n).map(|_| complex_normal(rng)).collect::<Vec<_>>())
}

/// A uniformly random unit vector supported on `coords`.
pub fn unit_vector_in<R: Rng + ?Sized>(rng: &mut R, n: usize, coords: std::ops::Range<usize>) -> CVector {
    loop {
        let mut v = CVector::zeros(n);
        for i in coords.clone() {
            v[i] = complex_normal(rng);
        }
        if let Some(u) = v.normalized() {
            return u;
        }
    }
}

/// Haar-ish random unitary of size `n` via Gram-Schmidt on a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let mut columns: Vec<CVector> = Vec::with_capacity(n);
    while columns.len() < n {
        let mut v = gaussian_vector(rng, n);
        // Two passes keep the basis orthonormal to working precision.
        for _ in 0..2 {
            for u in &columns {
                let proj = v.inner(u);
                v = &v - &u.scale(proj);
            }
        }
        if let Some(u) = v.normalized() {
            if v.norm() > 1e-8 {
                columns.push(u);
            }
        }
    }
    CMatrix::from_columns(&columns)
}

/// Random element of the algebra: Gaussian entries on the admissible pattern.
pub fn algebra_element<R: Rng + ?Sized>(rng: &mut R, alg: &NestAlgebra) -> CMatrix {
    let n = alg.dim();
    let mut m = CMatrix::zeros(n, n);
    for u in alg.basis_units() {
        m[(u.i, u.j)] = complex_normal(rng);
    }
    m
}

/// Random nest chain on `C^n`: each cut point `1..n` is kept with probability 1/2.
pub fn random_chain<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut chain: Vec<usize> = (1..n).filter(|_| rng.random_bool(0.5)).collect();
    chain.push(n);
    chain
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = gaussian_matrix(&mut rng(11), 4);
        let b = gaussian_matrix(&mut rng(11), 4);
        assert_eq!(a, b);
        assert_ne!(a, gaussian_matrix(&mut rng(12), 4));
    }

    #[test]
    fn unitary_is_unitary() {
        let u = random_unitary(&mut rng(3), 6);
        let uhu = &u.adjoint() * &u;
        assert!((&uhu - &CMatrix::identity(6)).max_abs() < 1e-12);
    }

    #[test]
    fn unit_vectors_respect_support() {
        let v = unit_vector_in(&mut rng(5), 5, 2..5);
        assert!((v.norm() - 1.0).abs() < 1e-14);
        assert_eq!(v[0], CScalar::new(0.0, 0.0));
        assert_eq!(v[1], CScalar::new(0.0, 0.0));
    }

    #[test]
    fn random_chains_are_valid() {
        let mut r = rng(9);
        for n in 1..10 {
            for _ in 0..20 {
                let chain = random_chain(&mut r, n);
                assert!(NestAlgebra::new(n, chain).is_ok());
            }
        }
    }
}
