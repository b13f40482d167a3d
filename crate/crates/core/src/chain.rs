//! The per-projection construction run along the whole invariant chain.
//!
//! For each interior level `k` an operator `b_k` with `b_k = b_k p_k` is built
//! as `b1` is in [`crate::construct`], with `xi0` the first standard basis
//! vector of `p_k⊥`. Each `b_k` implements `delta` on `p_k`, and since the
//! commutant is trivial, `(b_k - b_l) p_k` is a scalar multiple of `p_k` for
//! `k < l`. Normalizing those scalars against the smallest interior level
//! makes the family consistent, and a finite chain stabilizes at its top
//! interior level. No limit is taken: in finite dimensions every chain is
//! discrete at the identity, so the continuity hypothesis that would give
//! `delta = d_b` on all of `S` never applies; only the consistency mechanics
//! are exercised here.

use serde::{Deserialize, Serialize};

use crate::algebra::NestAlgebra;
use crate::construct::{
    build_b, build_b1, implementation_residual, ConstructError, ConstructionChoices,
};
use crate::derivation::DerivationTable;
use crate::linalg::{op_norm, scalar_identity_part, CMatrix, CScalar};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainMember {
    pub k: usize,
    pub b: CMatrix,
    pub choices: ConstructionChoices,
}

/// `(b_alpha - b_beta) p_alpha ≈ value * p_alpha`, with the size of the miss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyScalar {
    pub alpha: usize,
    pub beta: usize,
    pub value: CScalar,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainFamily {
    alg: NestAlgebra,
    members: Vec<ChainMember>,
    scalars: Vec<ConsistencyScalar>,
}

impl ChainFamily {
    /// Builds a family from explicit members and computes its scalars.
    pub fn from_members(alg: NestAlgebra, members: Vec<ChainMember>) -> Self {
        let scalars = consistency_scalars(&alg, &members);
        Self {
            alg,
            members,
            scalars,
        }
    }

    pub fn algebra(&self) -> &NestAlgebra {
        &self.alg
    }

    pub fn members(&self) -> &[ChainMember] {
        &self.members
    }

    pub fn scalars(&self) -> &[ConsistencyScalar] {
        &self.scalars
    }

    pub fn into_members(self) -> Vec<ChainMember> {
        self.members
    }

    pub fn max_scalar_residual(&self) -> f64 {
        self.scalars.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    /// Largest `||(b_alpha - b_beta) p_alpha||` over pairs.
    pub fn max_pair_gap(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, a) in self.members.iter().enumerate() {
            let p = self.alg.lattice_projection(a.k).expect("member level");
            for b in &self.members[i + 1..] {
                worst = worst.max(op_norm(&(&(&a.b - &b.b) * &p), 1e-12));
            }
        }
        worst
    }

    pub fn max_scalar_modulus(&self) -> f64 {
        self.scalars.iter().map(|s| s.value.norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Vec<FamilyEntryJson> {
        self.members
            .iter()
            .map(|m| FamilyEntryJson {
                k: m.k,
                b: m.b.clone(),
                lambdas: self
                    .scalars
                    .iter()
                    .filter(|s| s.alpha == m.k)
                    .map(|s| LambdaJson {
                        beta: s.beta,
                        value: [s.value.re, s.value.im],
                        residual: s.residual,
                    })
                    .collect(),
            })
            .collect()
    }
}

/// `{"beta": int, "value": [re, im], "residual": real}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaJson {
    pub beta: usize,
    pub value: [f64; 2],
    pub residual: f64,
}

/// `{"k": int, "b": <matrix>, "lambdas": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntryJson {
    pub k: usize,
    pub b: CMatrix,
    pub lambdas: Vec<LambdaJson>,
}

fn consistency_scalars(alg: &NestAlgebra, members: &[ChainMember]) -> Vec<ConsistencyScalar> {
    let mut out = Vec::new();
    for (i, a) in members.iter().enumerate() {
        let d = alg.chain()[a.k - 1];
        let p = alg.lattice_projection(a.k).expect("member level");
        for b in &members[i + 1..] {
            let diff = &(&a.b - &b.b) * &p;
            let mut compressed = CMatrix::zeros(d, d);
            for r in 0..d {
                for s in 0..d {
                    compressed[(r, s)] = diff[(r, s)];
                }
            }
            let (value, _) = scalar_identity_part(&compressed, 1e-12);
            let residual = op_norm(&(&diff - &p.scale(value)), 1e-12);
            out.push(ConsistencyScalar {
                alpha: a.k,
                beta: b.k,
                value,
                residual,
            });
        }
    }
    out
}

/// One `b_k` per interior level, with consistency scalars for every pair.
pub fn chain_family(table: &DerivationTable) -> Result<ChainFamily, ConstructError> {
    let alg = table.algebra();
    if alg.interior_levels().is_empty() {
        return Err(ConstructError::Irreducible);
    }
    let members = alg
        .interior_levels()
        .map(|k| {
            let choices = ConstructionChoices::standard(alg, k, 0, 0)?;
            let b = build_b1(table, &choices)?;
            Ok(ChainMember { k, b, choices })
        })
        .collect::<Result<Vec<_>, ConstructError>>()?;
    Ok(ChainFamily::from_members(alg.clone(), members))
}

/// Shifts each `b_beta` by `lambda(alpha0, beta) p_beta`, where `alpha0` is the
/// smallest interior level, so that `(b_alpha0 - b_beta) p_alpha0 = 0`.
/// Adding a multiple of `p_beta` keeps `b_beta = b_beta p_beta` and does not
/// change `d_{b_beta}(a) p_beta` for `a ∈ S`.
pub fn normalize_chain(family: &ChainFamily) -> ChainFamily {
    let Some(first) = family.members.first() else {
        return family.clone();
    };
    let alpha0 = first.k;
    let members = family
        .members
        .iter()
        .map(|m| {
            let shift = family
                .scalars
                .iter()
                .find(|s| s.alpha == alpha0 && s.beta == m.k)
                .map(|s| s.value);
            match shift {
                Some(lambda) => {
                    let p = family.alg.lattice_projection(m.k).expect("member level");
                    let mut b = m.b.clone();
                    b.axpy(lambda, &p);
                    ChainMember {
                        k: m.k,
                        b,
                        choices: m.choices.clone(),
                    }
                }
                None => m.clone(),
            }
        })
        .collect();
    ChainFamily::from_members(family.alg.clone(), members)
}

/// The member at the largest interior level: a finite chain stabilizes there.
pub fn stabilized_b(family: &ChainFamily) -> CMatrix {
    family
        .members
        .last()
        .map(|m| m.b.clone())
        .unwrap_or_else(|| CMatrix::zeros(family.alg.dim(), family.alg.dim()))
}

/// How the stabilized operator behaves at the top interior projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizedReport {
    pub k: usize,
    /// `max_u || (delta(E_u) - [b, E_u]) p_top ||`.
    pub residual: f64,
    /// Scalar part of `(b_construct - b_stabilized)` compressed to `p_top`.
    pub gauge_lambda: [f64; 2],
    /// `|| (b_construct - b_stabilized - lambda) p_top ||`.
    pub gauge_residual: f64,
    pub norm: f64,
}

/// Checks that the stabilized operator implements `delta` on `p_top`, and
/// compares it with [`build_b`] at the same level.
pub fn stabilized_report(table: &DerivationTable, family: &ChainFamily) -> Result<StabilizedReport, ConstructError> {
    let alg = table.algebra();
    let top = family.members.last().ok_or(ConstructError::Irreducible)?;
    let b = &top.b;
    let p = alg.lattice_projection(top.k)?;
    let d = alg.chain()[top.k - 1];

    let residual = table
        .units()
        .iter()
        .map(|u| {
            let value = table.value(u.i, u.j).expect("basis unit");
            let implemented = &b.mul_unit(u.i, u.j) - &b.unit_mul(u.i, u.j);
            op_norm(&(&(value - &implemented) * &p), 1e-12)
        })
        .fold(0.0, f64::max);

    let built = build_b(table, &top.choices)?;
    let diff = &(&built.b - b) * &p;
    let mut compressed = CMatrix::zeros(d, d);
    for r in 0..d {
        for s in 0..d {
            compressed[(r, s)] = diff[(r, s)];
        }
    }
    let (lambda, _) = scalar_identity_part(&compressed, 1e-12);
    let gauge_residual = op_norm(&(&diff - &p.scale(lambda)), 1e-12);
    Ok(StabilizedReport {
        k: top.k,
        residual,
        gauge_lambda: [lambda.re, lambda.im],
        gauge_residual,
        norm: op_norm(b, 1e-12),
    })
}

/// Residual of `b` as an implementer on `S p` (units in the first `d` columns).
pub fn residual_on_sp(table: &DerivationTable, b: &CMatrix, d: usize) -> f64 {
    implementation_residual(table, b, |u| u.j < d)
}
