//! Explicit implementing operator for a derivation on a reducible nest algebra.
//!
//! Fix an interior lattice projection `p` (`0 < d_k < n`), a unit vector
//! `xi0 ∈ p⊥` and a unit vector `eta1 ∈ p`. Rank-one operators `xi ⊗ eta`
//! with `xi ∈ p⊥`, `eta ∈ p` lie in `p B(H) p⊥ ⊂ S`, so `delta` can be
//! evaluated on them. From those values:
//!
//! * `b1 eta = delta((xi0 ⊗ eta) p0) xi0` for `eta ∈ p`, `b1 p⊥ = 0`,
//!   where `p0 = xi0 ⊗ xi0`;
//! * `c1 = -p delta(p) p⊥`;
//! * `b2 = b1 + c1`, which implements `delta` on `Sp = pSp`;
//! * `c2 = sum_a p_a [ -q_a* delta(q_a) p⊥ + q_a* delta(q1) q1* q_a ]` over a
//!   basis `xi_a` of `p⊥`, with `q_a = xi_a ⊗ eta1`, `q1 = xi0 ⊗ eta1`;
//! * `b = b2 + c2`, which implements `delta` on `Sp` and `p⊥Sp⊥`.
//!
//! Whether `b` also implements `delta` on `pSp⊥` is equivalent to the triple
//! product rule measured by [`triple_rule_residual`]. In finite dimensions
//! every derivation is implemented, so the rule holds for every valid table;
//! tables that break it are necessarily not derivations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{complement, AlgebraError, MatrixUnit, NestAlgebra};
use crate::derivation::{DerivationError, DerivationTable};
use crate::linalg::{op_norm, rank_one, scalar_identity_part, CMatrix, CScalar, CVector};

const NORM_TOL: f64 = 1e-12;
const UNIT_VECTOR_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructError {
    #[error("irreducible model: construction inapplicable (chain has no interior projection)")]
    Irreducible,
    #[error("chain index {k} is not interior (need 1 <= k < {m})")]
    NotInterior { k: usize, m: usize },
    #[error("invalid choice vector: {0}")]
    BadChoice(String),
    #[error("algebra mismatch between table and artifacts")]
    Mismatch,
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Derivation(#[from] DerivationError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// The free choices of the construction: the lattice level `k` of `p` and the
/// unit vectors `xi0 ∈ p⊥`, `eta1 ∈ p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionChoices {
    pub k: usize,
    pub xi0: CVector,
    pub eta1: CVector,
}

impl ConstructionChoices {
    pub fn new(alg: &NestAlgebra, k: usize, xi0: CVector, eta1: CVector) -> Result<Self, ConstructError> {
        let d = interior_dim(alg, k)?;
        let n = alg.dim();
        for (name, v) in [("xi0", &xi0), ("eta1", &eta1)] {
            if v.len() != n {
                return Err(ConstructError::BadChoice(format!(
                    "{name} has length {}, expected {n}",
                    v.len()
                )));
            }
            if (v.norm() - 1.0).abs() > UNIT_VECTOR_TOL {
                return Err(ConstructError::BadChoice(format!("{name} is not a unit vector")));
            }
        }
        let zero = CScalar::new(0.0, 0.0);
        if (0..d).any(|i| xi0[i] != zero) {
            return Err(ConstructError::BadChoice("xi0 must lie in p⊥".into()));
        }
        if (d..n).any(|i| eta1[i] != zero) {
            return Err(ConstructError::BadChoice("eta1 must lie in p".into()));
        }
        Ok(Self { k, xi0, eta1 })
    }

    /// `xi0` and `eta1` taken from the standard bases of `p⊥` and `p`:
    /// `xi0 = e_{d_k + xi0_index}`, `eta1 = e_{eta1_index}`.
    pub fn standard(
        alg: &NestAlgebra,
        k: usize,
        xi0_index: usize,
        eta1_index: usize,
    ) -> Result<Self, ConstructError> {
        let d = interior_dim(alg, k)?;
        let n = alg.dim();
        if d + xi0_index >= n {
            return Err(ConstructError::BadChoice(format!(
                "xi0 index {xi0_index} exceeds dim p⊥ = {}",
                n - d
            )));
        }
        if eta1_index >= d {
            return Err(ConstructError::BadChoice(format!(
                "eta1 index {eta1_index} exceeds dim p = {d}"
            )));
        }
        Self::new(
            alg,
            k,
            CVector::basis(n, d + xi0_index),
            CVector::basis(n, eta1_index),
        )
    }

    /// Level closest to the middle of the chain with first basis vectors.
    pub fn default_for(alg: &NestAlgebra) -> Result<Self, ConstructError> {
        Self::standard(alg, default_level(alg)?, 0, 0)
    }

    pub fn p_dim(&self, alg: &NestAlgebra) -> usize {
        alg.chain()[self.k - 1]
    }
}

/// Interior level with `d_k = ceil(n/2)` on `T_n`; on coarser chains the first
/// interior level reaching `ceil(n/2)`, else the last interior level.
pub fn default_level(alg: &NestAlgebra) -> Result<usize, ConstructError> {
    let interior = alg.interior_levels();
    if interior.is_empty() {
        return Err(ConstructError::Irreducible);
    }
    let half = alg.dim().div_ceil(2);
    Ok(interior
        .clone()
        .find(|&k| alg.chain()[k - 1] >= half)
        .unwrap_or(interior.end - 1))
}

fn interior_dim(alg: &NestAlgebra, k: usize) -> Result<usize, ConstructError> {
    if alg.interior_levels().is_empty() {
        return Err(ConstructError::Irreducible);
    }
    if !alg.interior_levels().contains(&k) {
        return Err(ConstructError::NotInterior { k, m: alg.levels() });
    }
    Ok(alg.chain()[k - 1])
}

fn check_choices(table: &DerivationTable, choices: &ConstructionChoices) -> Result<(), ConstructError> {
    ConstructionChoices::new(
        table.algebra(),
        choices.k,
        choices.xi0.clone(),
        choices.eta1.clone(),
    )
    .map(|_| ())
}

/// Evaluation on arguments the construction guarantees lie in `S`; a
/// refusal here is a bug, not bad input.
fn eval_in_s(table: &DerivationTable, a: &CMatrix, what: &str) -> Result<CMatrix, ConstructError> {
    table.eval(a).map_err(|e| match e {
        DerivationError::NotInAlgebra { outside } => {
            ConstructError::Internal(format!("{what} left S (outside entry {outside:e})"))
        }
        other => other.into(),
    })
}

fn projections(alg: &NestAlgebra, k: usize) -> (CMatrix, CMatrix) {
    let p = alg.lattice_projection(k).expect("validated level");
    let p_perp = complement(&p);
    (p, p_perp)
}

/// `b1`: `b1 eta = delta((xi0 ⊗ eta) p0) xi0` on the standard basis of `p`,
/// and `b1 p⊥ = 0`.
pub fn build_b1(table: &DerivationTable, choices: &ConstructionChoices) -> Result<CMatrix, ConstructError> {
    check_choices(table, choices)?;
    let alg = table.algebra();
    let n = alg.dim();
    let d = choices.p_dim(alg);
    let xi0 = &choices.xi0;
    let p0 = rank_one(xi0, xi0).expect("same length");
    let columns = (0..n)
        .map(|i| {
            if i >= d {
                return Ok(CVector::zeros(n));
            }
            // a = xi0 ⊗ eta solves a xi0 = eta and lies in p B(H) p⊥.
            let a = rank_one(xi0, &CVector::basis(n, i)).expect("same length");
            let ap0 = &a * &p0;
            Ok(eval_in_s(table, &ap0, "a p0")?.apply(xi0))
        })
        .collect::<Result<Vec<_>, ConstructError>>()?;
    Ok(CMatrix::from_columns(&columns))
}

/// `c1 = -p delta(p) p⊥`, so `c1 p⊥ = -delta(p) p⊥` on `p` and `c1 p = 0`.
pub fn build_c1(table: &DerivationTable, choices: &ConstructionChoices) -> Result<CMatrix, ConstructError> {
    check_choices(table, choices)?;
    let (p, p_perp) = projections(table.algebra(), choices.k);
    let dp = eval_in_s(table, &p, "p")?;
    Ok(-&(&(&p * &dp) * &p_perp))
}

/// Standard basis of `p⊥` for level `k`.
pub fn standard_perp_basis(alg: &NestAlgebra, k: usize) -> Result<Vec<CVector>, ConstructError> {
    let d = interior_dim(alg, k)?;
    let n = alg.dim();
    Ok((d..n).map(|i| CVector::basis(n, i)).collect())
}

/// `c2` assembled over the standard basis of `p⊥`.
pub fn build_c2(table: &DerivationTable, choices: &ConstructionChoices) -> Result<CMatrix, ConstructError> {
    let basis = standard_perp_basis(table.algebra(), choices.k)?;
    build_c2_with_basis(table, choices, &basis)
}

/// `c2 = sum_a p_a [ -q_a* delta(q_a) p⊥ + q_a* delta(q1) q1* q_a ]` over an
/// orthonormal basis `xi_a` of `p⊥`.
pub fn build_c2_with_basis(
    table: &DerivationTable,
    choices: &ConstructionChoices,
    basis: &[CVector],
) -> Result<CMatrix, ConstructError> {
    check_choices(table, choices)?;
    let alg = table.algebra();
    let n = alg.dim();
    let d = choices.p_dim(alg);
    if basis.len() != n - d {
        return Err(ConstructError::BadChoice(format!(
            "basis of p⊥ needs {} vectors, got {}",
            n - d,
            basis.len()
        )));
    }
    let (_, p_perp) = projections(alg, choices.k);
    let q1 = rank_one(&choices.xi0, &choices.eta1).expect("same length");
    let dq1 = eval_in_s(table, &q1, "q1")?;
    let q1_adj = q1.adjoint();

    let mut c2 = CMatrix::zeros(n, n);
    for xi in basis {
        if xi.len() != n || (0..d).any(|i| xi[i].norm() > UNIT_VECTOR_TOL) {
            return Err(ConstructError::BadChoice("basis vector outside p⊥".into()));
        }
        let q = rank_one(xi, &choices.eta1).expect("same length");
        let q_adj = q.adjoint();
        let p_xi = rank_one(xi, xi).expect("same length");
        let dq = eval_in_s(table, &q, "q_a")?;
        let first = &(&q_adj * &dq) * &p_perp;
        let second = &(&(&q_adj * &dq1) * &q1_adj) * &q;
        c2 += &(&p_xi * &(&second - &first));
    }
    Ok(c2)
}

/// The operators of the construction together with the choices behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionArtifacts {
    pub b1: CMatrix,
    pub c1: CMatrix,
    pub b2: CMatrix,
    pub c2: CMatrix,
    pub b: CMatrix,
    pub choices: ConstructionChoices,
}

pub fn build_b(table: &DerivationTable, choices: &ConstructionChoices) -> Result<ConstructionArtifacts, ConstructError> {
    let b1 = build_b1(table, choices)?;
    let c1 = build_c1(table, choices)?;
    let c2 = build_c2(table, choices)?;
    let b2 = &b1 + &c1;
    let b = &b2 + &c2;
    Ok(ConstructionArtifacts {
        b1,
        c1,
        b2,
        c2,
        b,
        choices: choices.clone(),
    })
}

/// `(I - 2p) delta(p)` for the lattice projection at level `k` (any level,
/// including the top). Its commutator with `p` reproduces `delta(p)`.
pub fn two_projection_b(table: &DerivationTable, k: usize) -> Result<CMatrix, ConstructError> {
    let alg = table.algebra();
    let p = alg.lattice_projection(k)?;
    let dp = eval_in_s(table, &p, "p")?;
    let reflect = &CMatrix::identity(alg.dim()) - &p.scale_re(2.0);
    Ok(&reflect * &dp)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleEntry {
    /// Coordinate of `xi_a = e_alpha` in `p⊥`.
    pub alpha: usize,
    /// Coordinate of `eta = e_eta` in `p`.
    pub eta: usize,
    pub residual: f64,
}

/// Triple-product-rule residuals over the standard bases of `p⊥` and `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleResidual {
    pub entries: Vec<RuleEntry>,
    pub max_residual: f64,
}

/// For every `xi_a` in the standard basis of `p⊥` and `eta` in that of `p`,
/// with `q = xi_a ⊗ eta`, `q_a = xi_a ⊗ eta1`, `q1 = xi0 ⊗ eta1`:
///
/// `|| delta(q) - [ delta(q q_a* q1) q1* q_a + q q_a* delta(q_a)
///                  - q q_a* delta(q1) q1* q_a ] ||`.
pub fn triple_rule_residual(
    table: &DerivationTable,
    choices: &ConstructionChoices,
) -> Result<RuleResidual, ConstructError> {
    check_choices(table, choices)?;
    let alg = table.algebra();
    let n = alg.dim();
    let d = choices.p_dim(alg);
    let q1 = rank_one(&choices.xi0, &choices.eta1).expect("same length");
    let q1_adj = q1.adjoint();
    let dq1 = eval_in_s(table, &q1, "q1")?;

    let mut entries = Vec::with_capacity(d * (n - d));
    let mut max_residual = 0.0_f64;
    for alpha in d..n {
        let xi = CVector::basis(n, alpha);
        let qa = rank_one(&xi, &choices.eta1).expect("same length");
        let qa_adj = qa.adjoint();
        let dqa = eval_in_s(table, &qa, "q_a")?;
        // q1* q_a = xi0 ⊗ xi_a, shared by two terms.
        let tail = &q1_adj * &qa;
        for eta in 0..d {
            let q = rank_one(&xi, &CVector::basis(n, eta)).expect("same length");
            let q_qa_adj = &q * &qa_adj;
            let q2 = &q_qa_adj * &q1;
            let lhs = eval_in_s(table, &q, "q")?;
            let mut rhs = &eval_in_s(table, &q2, "q q_a* q1")? * &tail;
            rhs += &(&q_qa_adj * &dqa);
            rhs -= &(&(&q_qa_adj * &dq1) * &tail);
            let residual = op_norm(&(&lhs - &rhs), NORM_TOL);
            max_residual = max_residual.max(residual);
            entries.push(RuleEntry {
                alpha,
                eta,
                residual,
            });
        }
    }
    Ok(RuleResidual {
        entries,
        max_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub b1: f64,
    pub b2: f64,
    pub b: f64,
    pub delta_lower: f64,
    pub delta_upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub lambda: [f64; 2],
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassFlags {
    pub thm11: bool,
    pub thm12: bool,
    pub thm13: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    #[serde(rename = "residual_pSp")]
    pub residual_psp: f64,
    pub residual_corner: f64,
    pub residual_full: f64,
    pub rule_max: f64,
    pub norms: NormReport,
    pub gauge: Option<GaugeReport>,
    pub pass: PassFlags,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Absolute acceptance tolerance for every residual.
    pub tol: f64,
    /// Generator `c` when the table is known to be `d_c`.
    pub generator: Option<CMatrix>,
    pub norm_samples: usize,
    pub seed: u64,
}

impl VerifyOptions {
    /// Tolerance `1e-9 * (1 + max ||delta(E_u)||)`, 32 norm samples, seed 0.
    pub fn for_table(table: &DerivationTable) -> Self {
        Self {
            tol: crate::derivation::default_tol(table.entries().map(|(_, v)| v)),
            generator: None,
            norm_samples: 32,
            seed: 0,
        }
    }

    pub fn with_generator(mut self, c: CMatrix) -> Self {
        self.generator = Some(c);
        self
    }
}

/// `|| delta(E_u) - [x, E_u] ||`.
fn unit_residual(table: &DerivationTable, x: &CMatrix, u: MatrixUnit) -> f64 {
    let value = table.value(u.i, u.j).expect("basis unit");
    let implemented = &x.mul_unit(u.i, u.j) - &x.unit_mul(u.i, u.j);
    op_norm(&(value - &implemented), NORM_TOL)
}

/// Largest implementation residual of `x` over the basis units selected by `keep`.
pub fn implementation_residual<F: Fn(MatrixUnit) -> bool>(table: &DerivationTable, x: &CMatrix, keep: F) -> f64 {
    table
        .units()
        .iter()
        .copied()
        .filter(|&u| keep(u))
        .map(|u| unit_residual(table, x, u))
        .fold(0.0, f64::max)
}

/// Residuals of the construction on `pSp`, `p⊥Sp⊥` and all of `S`, the
/// triple-rule residual, norm bounds and (for inner tables) the gauge scalar.
pub fn verify(
    table: &DerivationTable,
    artifacts: &ConstructionArtifacts,
    opts: &VerifyOptions,
) -> Result<VerificationReport, ConstructError> {
    let alg = table.algebra();
    let n = alg.dim();
    for m in [&artifacts.b1, &artifacts.c1, &artifacts.b2, &artifacts.c2, &artifacts.b] {
        if m.rows() != n || m.cols() != n {
            return Err(ConstructError::Mismatch);
        }
    }
    if let Some(c) = &opts.generator {
        if c.rows() != n || c.cols() != n {
            return Err(ConstructError::Mismatch);
        }
    }
    let choices = &artifacts.choices;
    check_choices(table, choices)?;
    let d = choices.p_dim(alg);
    let in_p = |u: MatrixUnit| u.i < d && u.j < d;
    let in_perp = |u: MatrixUnit| u.i >= d && u.j >= d;

    let residual_psp = implementation_residual(table, &artifacts.b2, in_p)
        .max(implementation_residual(table, &artifacts.b, in_p));
    let residual_corner = implementation_residual(table, &artifacts.b, in_perp);
    let residual_full = implementation_residual(table, &artifacts.b, |_| true);
    let rule = triple_rule_residual(table, choices)?;

    let estimate = table.norm_estimate(opts.norm_samples, opts.seed, opts.generator.as_ref());
    let norms = NormReport {
        b1: op_norm(&artifacts.b1, NORM_TOL),
        b2: op_norm(&artifacts.b2, NORM_TOL),
        b: op_norm(&artifacts.b, NORM_TOL),
        delta_lower: estimate.lower,
        delta_upper: estimate.upper,
    };
    let gauge = opts.generator.as_ref().map(|c| {
        let (lambda, residual) = scalar_identity_part(&(&artifacts.b - c), NORM_TOL);
        GaugeReport {
            lambda: [lambda.re, lambda.im],
            residual,
        }
    });

    let tol = opts.tol;
    let within = |norm: f64, factor: f64| norms.delta_upper.is_none_or(|ub| norm <= factor * ub + tol);
    let pass = PassFlags {
        thm11: residual_psp <= tol && within(norms.b1, 1.0) && within(norms.b2, 2.0),
        thm12: residual_psp <= tol && residual_corner <= tol && within(norms.b, 4.0),
        thm13: rule.max_residual <= tol && residual_full <= tol,
    };
    Ok(VerificationReport {
        residual_psp,
        residual_corner,
        residual_full,
        rule_max: rule.max_residual,
        norms,
        gauge,
        pass,
    })
}

/// Scalar part of `b(first) - b(second)`: how the constructed operator moves
/// when `xi0`, `eta1` (and possibly `p`) change.
pub fn choice_gauge(
    table: &DerivationTable,
    first: &ConstructionChoices,
    second: &ConstructionChoices,
) -> Result<(CScalar, f64), ConstructError> {
    let a = build_b(table, first)?;
    let b = build_b(table, second)?;
    Ok(scalar_identity_part(&(&a.b - &b.b), NORM_TOL))
}
