//! Independent reference computations for the integration tests.
//!
//! Everything here works on plain nested vectors and expands the inner
//! derivation `d_c(E_ij) = c E_ij - E_ij c` entry by entry, so it shares no
//! arithmetic with the library beyond reading matrix entries.
#![allow(dead_code)]

use nestderiv::{CMatrix, CScalar};

pub type Dense = Vec<Vec<CScalar>>;

pub fn zero() -> CScalar {
    CScalar::new(0.0, 0.0)
}

pub fn dense_zeros(n: usize) -> Dense {
    vec![vec![zero(); n]; n]
}

pub fn dense_unit(n: usize, i: usize, j: usize) -> Dense {
    let mut m = dense_zeros(n);
    m[i][j] = CScalar::new(1.0, 0.0);
    m
}

pub fn to_dense(m: &CMatrix) -> Dense {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn from_dense(m: &Dense) -> CMatrix {
    CMatrix::from_rows(m).expect("square finite oracle output")
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut out = dense_zeros(n);
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == zero() {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn sub(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect())
        .collect()
}

pub fn frobenius(a: &Dense) -> f64 {
    a.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `d_c(E_ij)`: `(c E_ij)[k][j] = c[k][i]`, `(E_ij c)[i][l] = c[j][l]`.
pub fn inner_on_unit(c: &Dense, i: usize, j: usize) -> Dense {
    let n = c.len();
    let mut out = dense_zeros(n);
    for k in 0..n {
        out[k][j] += c[k][i];
    }
    for l in 0..n {
        out[i][l] -= c[j][l];
    }
    out
}

/// Diagonal 0/1 projection onto the first `d` coordinates.
pub fn head_projection(n: usize, d: usize) -> Dense {
    let mut p = dense_zeros(n);
    for (i, row) in p.iter_mut().enumerate().take(d) {
        row[i] = CScalar::new(1.0, 0.0);
    }
    p
}

/// The construction for standard choices `xi0 = e_s`, `eta1 = e_t`, with
/// `p` the projection onto the first `d` coordinates, written out in
/// matrix units:
///
/// * `b1 e_i = d_c(E_is) e_s` for `i < d`,
/// * `c1 = -p d_c(p) p⊥` with `d_c(p) = sum_{i<d} d_c(E_ii)`,
/// * `c2 = sum_{a >= d} ( -E_at d_c(E_ta) p⊥ + E_at d_c(E_ts) E_sa )`.
pub struct OracleConstruction {
    pub b1: Dense,
    pub c1: Dense,
    pub c2: Dense,
    pub b: Dense,
}

pub fn oracle_construction(c: &Dense, d: usize, s: usize, t: usize) -> OracleConstruction {
    let n = c.len();
    let p = head_projection(n, d);
    let p_perp = sub(&head_projection(n, n), &p);

    let mut b1 = dense_zeros(n);
    for i in 0..d {
        let v = inner_on_unit(c, i, s);
        for (row, source) in b1.iter_mut().zip(&v) {
            row[i] = source[s];
        }
    }

    let mut dp = dense_zeros(n);
    for i in 0..d {
        dp = add(&dp, &inner_on_unit(c, i, i));
    }
    let c1 = sub(&dense_zeros(n), &mul(&mul(&p, &dp), &p_perp));

    let mut c2 = dense_zeros(n);
    let dq1 = inner_on_unit(c, t, s);
    for a in d..n {
        let e_at = dense_unit(n, a, t);
        let first = mul(&mul(&e_at, &inner_on_unit(c, t, a)), &p_perp);
        let second = mul(&mul(&e_at, &dq1), &dense_unit(n, s, a));
        c2 = add(&c2, &sub(&second, &first));
    }
    let b = add(&add(&b1, &c1), &c2);
    OracleConstruction { b1, c1, c2, b }
}

/// Largest Frobenius residual of the triple product rule for `d_c` with
/// standard choices, over `q = E_{eta, a}` (`eta < d <= a`):
/// `d(E_eta,a) - [ d(E_eta,s) E_sa + E_eta,t d(E_ta) - E_eta,t d(E_ts) E_sa ]`.
pub fn oracle_rule_residual(value: impl Fn(usize, usize) -> Dense, n: usize, d: usize, s: usize, t: usize) -> f64 {
    let mut worst = 0.0_f64;
    for a in d..n {
        for eta in 0..d {
            let e_sa = dense_unit(n, s, a);
            let e_et = dense_unit(n, eta, t);
            let rhs = add(
                &mul(&value(eta, s), &e_sa),
                &sub(&mul(&e_et, &value(t, a)), &mul(&mul(&e_et, &value(t, s)), &e_sa)),
            );
            worst = worst.max(frobenius(&sub(&value(eta, a), &rhs)));
        }
    }
    worst
}

/// Largest Frobenius residual of `d_b(E_ij)` against `value(i, j)` over
/// the upper-triangular units.
pub fn oracle_full_residual(value: impl Fn(usize, usize) -> Dense, b: &Dense) -> f64 {
    let n = b.len();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max(frobenius(&sub(&value(i, j), &inner_on_unit(b, i, j))));
        }
    }
    worst
}
