use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CMatrix, CScalar, CVector};

/// Matrices up to this size go straight to the Jacobi SVD.
const JACOBI_MAX_DIM: usize = 64;
const MAX_SWEEPS: usize = 80;
const POWER_SEED: u64 = 0x5eed_0f0b;
const POWER_MAX_ITERS: usize = 20_000;

/// Singular values (descending) and, on request, the right singular vectors.
#[derive(Debug, Clone)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    /// Columns are right singular vectors, ordered like `singular_values`.
    pub v: Option<CMatrix>,
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns of a working copy are rotated pairwise until mutually orthogonal;
/// the singular values are then the column norms.
pub fn jacobi_svd(a: &CMatrix, want_v: bool) -> Svd {
    let (m, n) = (a.rows(), a.cols());
    // Column-major working storage keeps each rotation on contiguous memory.
    let mut cols: Vec<Vec<CScalar>> = (0..n).map(|j| a.column(j).as_slice().to_vec()).collect();
    let mut v: Option<Vec<Vec<CScalar>>> = want_v.then(|| {
        (0..n)
            .map(|j| CVector::basis(n, j).as_slice().to_vec())
            .collect()
    });

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = CScalar::new(0.0, 0.0);
                    for i in 0..m {
                        alpha += cp[i].norm_sqr();
                        beta += cq[i].norm_sqr();
                        gamma += cp[i].conj() * cq[i];
                    }
                    (alpha, beta, gamma)
                };
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, phase, c, s);
                if let Some(v) = v.as_mut() {
                    rotate(v, p, q, phase, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (j, c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let v = v.map(|v| {
        let sorted: Vec<CVector> = order.iter().map(|(j, _)| CVector::from(v[*j].clone())).collect();
        CMatrix::from_columns(&sorted)
    });
    Svd {
        singular_values: order.into_iter().map(|(_, s)| s).collect(),
        v,
    }
}

/// Applies the rotation that orthogonalizes columns `p` and `q`, after
/// removing the phase of their inner product from column `q`.
fn rotate(cols: &mut [Vec<CScalar>], p: usize, q: usize, phase: CScalar, c: f64, s: f64) {
    let unphase = phase.conj();
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * unphase;
        let xp = *x;
        *x = xp * c - yq * s;
        *y = xp * s + yq * c;
    }
}

/// Largest singular value by power iteration on `A^H A`.
///
/// The start vector is drawn from a fixed-seed generator, so the result is
/// deterministic. Iteration stops once the Rayleigh estimate changes by less
/// than `tol` relatively.
pub fn power_norm(a: &CMatrix, tol: f64) -> f64 {
    let n = a.cols();
    if n == 0 || a.rows() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let start: Vec<CScalar> = (0..n)
        .map(|_| CScalar::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let Some(mut x) = CVector::from(start).normalized() else {
        return 0.0;
    };
    let ah = a.adjoint();
    let mut estimate = 0.0_f64;
    for _ in 0..POWER_MAX_ITERS {
        let y = ah.apply(&a.apply(&x));
        let lambda = y.norm();
        if lambda == 0.0 {
            return 0.0;
        }
        x = y.scale(CScalar::new(1.0 / lambda, 0.0));
        let converged = (lambda - estimate).abs() <= tol * lambda;
        estimate = lambda;
        if converged {
            break;
        }
    }
    estimate.sqrt()
}

/// Operator 2-norm (largest singular value).
///
/// Small matrices use the Jacobi SVD, which is accurate to working precision;
/// larger ones fall back to power iteration with relative tolerance `tol`.
pub fn op_norm(a: &CMatrix, tol: f64) -> f64 {
    if a.rows() == 0 || a.cols() == 0 {
        return 0.0;
    }
    if a.data().iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return 0.0;
    }
    if a.rows().max(a.cols()) <= JACOBI_MAX_DIM {
        jacobi_svd(a, false).singular_values[0]
    } else {
        power_norm(a, tol)
    }
}
