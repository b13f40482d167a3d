//! Derivations `delta: S -> B(H)` tabulated on the matrix units of `S`.
//!
//! A derivation is linear, so its values on the admissible units determine it
//! on all of `S`. It is never evaluated outside `S`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, MatrixUnit, NestAlgebra};
use crate::linalg::{distance_to_scalars, op_norm, CMatrix, CScalar};
use crate::random;

/// Base tolerance; tables scale it by `1 + max ||delta(E_u)||`.
pub const BASE_TOL: f64 = 1e-9;

/// How many failing pairs a validation report keeps verbatim.
const MAX_REPORTED_FAILURES: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DerivationError {
    #[error("no value given for basis unit ({}, {})", .0.i, .0.j)]
    MissingEntry(MatrixUnit),
    #[error("unit ({}, {}) is not in the algebra", .0.i, .0.j)]
    NotAdmissible(MatrixUnit),
    #[error("unit ({}, {}) given more than once", .0.i, .0.j)]
    DuplicateEntry(MatrixUnit),
    #[error("derivation undefined outside S (entry of modulus {outside:e} below the pattern)")]
    NotInAlgebra { outside: f64 },
    #[error("product rule fails: max residual {:e} over {} pairs", .0.max_residual, .0.pairs_checked)]
    Invalid(Box<ValidationReport>),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairFailure {
    pub left: MatrixUnit,
    pub right: MatrixUnit,
    pub residual: f64,
}

/// Product-rule check over every ordered pair of basis units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub tol: f64,
    pub pairs_checked: usize,
    pub max_residual: f64,
    pub failure_count: usize,
    /// First few failing pairs, in enumeration order.
    pub failures: Vec<PairFailure>,
}

/// Bounds on `||delta||` (the norm of `delta` restricted to `S`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    /// Best sampled `||delta(a)||` over unit-norm `a ∈ S`.
    pub lower: f64,
    /// `2 * min_lambda ||c - lambda I||` for an inner derivation `d_c`.
    pub upper: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DerivationTable {
    alg: NestAlgebra,
    units: Vec<MatrixUnit>,
    values: Vec<CMatrix>,
    /// `n*n` lookup from `(i, j)` to the position in `units`.
    index: Vec<Option<usize>>,
    tol: f64,
    validated: bool,
}

/// `BASE_TOL * (1 + max ||value||)`.
pub fn default_tol<'a>(values: impl IntoIterator<Item = &'a CMatrix>) -> f64 {
    let biggest = values
        .into_iter()
        .map(|m| op_norm(m, 1e-12))
        .fold(0.0, f64::max);
    BASE_TOL * (1.0 + biggest)
}

impl DerivationTable {
    /// Builds a table from explicit `(unit, delta(unit))` pairs. Every basis
    /// unit must appear exactly once.
    pub fn from_entries(
        alg: NestAlgebra,
        entries: Vec<(MatrixUnit, CMatrix)>,
        tol: f64,
    ) -> Result<Self, DerivationError> {
        let n = alg.dim();
        let units = alg.basis_units();
        let mut index = vec![None; n * n];
        for (pos, u) in units.iter().enumerate() {
            index[u.i * n + u.j] = Some(pos);
        }
        let mut slots: Vec<Option<CMatrix>> = vec![None; units.len()];
        for (u, value) in entries {
            if !alg.is_admissible(u.i, u.j) {
                return Err(DerivationError::NotAdmissible(u));
            }
            alg.check_shape(&value)?;
            let pos = index[u.i * n + u.j].expect("admissible units are indexed");
            if slots[pos].replace(value).is_some() {
                return Err(DerivationError::DuplicateEntry(u));
            }
        }
        let values = slots
            .into_iter()
            .zip(&units)
            .map(|(v, u)| v.ok_or(DerivationError::MissingEntry(*u)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            alg,
            units,
            values,
            index,
            tol,
            validated: false,
        })
    }

    /// The zero derivation; trivially valid.
    pub fn zero(alg: NestAlgebra) -> Self {
        let n = alg.dim();
        let entries = alg
            .basis_units()
            .into_iter()
            .map(|u| (u, CMatrix::zeros(n, n)))
            .collect();
        let mut table = Self::from_entries(alg, entries, BASE_TOL).expect("complete table");
        table.validated = true;
        table
    }

    /// The inner derivation `d_c(a) = ca - ac` tabulated on `alg`.
    pub fn inner_from(alg: NestAlgebra, c: &CMatrix) -> Result<Self, DerivationError> {
        alg.check_shape(c)?;
        let entries: Vec<(MatrixUnit, CMatrix)> = alg
            .basis_units()
            .into_iter()
            .map(|u| (u, &c.mul_unit(u.i, u.j) - &c.unit_mul(u.i, u.j)))
            .collect();
        let tol = default_tol(entries.iter().map(|(_, v)| v));
        Self::from_entries(alg, entries, tol)
    }

    pub fn algebra(&self) -> &NestAlgebra {
        &self.alg
    }

    pub fn dim(&self) -> usize {
        self.alg.dim()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self.validated = false;
        self
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    pub fn units(&self) -> &[MatrixUnit] {
        &self.units
    }

    pub fn entries(&self) -> impl Iterator<Item = (MatrixUnit, &CMatrix)> {
        self.units.iter().copied().zip(&self.values)
    }

    pub fn value(&self, i: usize, j: usize) -> Option<&CMatrix> {
        let n = self.dim();
        if i >= n || j >= n {
            return None;
        }
        self.index[i * n + j].map(|pos| &self.values[pos])
    }

    /// Copy of the table with `delta(E_u)` replaced; the copy is unvalidated.
    pub fn with_value(&self, u: MatrixUnit, value: CMatrix) -> Result<Self, DerivationError> {
        let n = self.dim();
        if !self.alg.is_admissible(u.i, u.j) {
            return Err(DerivationError::NotAdmissible(u));
        }
        self.alg.check_shape(&value)?;
        let mut out = self.clone();
        let pos = self.index[u.i * n + u.j].expect("admissible units are indexed");
        out.values[pos] = value;
        out.validated = false;
        Ok(out)
    }

    /// Largest operator norm among the tabulated values.
    pub fn max_value_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|m| op_norm(m, 1e-12))
            .fold(0.0, f64::max)
    }

    /// Checks `delta(E_ij E_kl) = delta(E_ij) E_kl + E_ij delta(E_kl)` for every
    /// ordered pair of basis units, where `E_ij E_kl` is `E_il` when `j = k`
    /// and zero otherwise. Pair residuals are Frobenius norms, which bound
    /// the operator norm from above.
    pub fn validate(&self) -> ValidationReport {
        let n = self.dim();
        let mut report = ValidationReport {
            valid: true,
            tol: self.tol,
            pairs_checked: 0,
            max_residual: 0.0,
            failure_count: 0,
            failures: Vec::new(),
        };
        for (a, da) in self.entries() {
            for (b, db) in self.entries() {
                let mut residual = if a.j == b.i {
                    self.value(a.i, b.j).expect("products of units stay in S").clone()
                } else {
                    CMatrix::zeros(n, n)
                };
                for r in 0..n {
                    residual[(r, b.j)] -= da[(r, b.i)];
                }
                for s in 0..n {
                    residual[(a.i, s)] -= db[(a.j, s)];
                }
                let norm = residual.frobenius_norm();
                report.pairs_checked += 1;
                report.max_residual = report.max_residual.max(norm);
                if norm > self.tol {
                    report.valid = false;
                    report.failure_count += 1;
                    if report.failures.len() < MAX_REPORTED_FAILURES {
                        report.failures.push(PairFailure {
                            left: a,
                            right: b,
                            residual: norm,
                        });
                    }
                }
            }
        }
        report
    }

    /// Validates and marks the table, or returns the failing report.
    pub fn into_validated(mut self) -> Result<Self, DerivationError> {
        let report = self.validate();
        if report.valid {
            self.validated = true;
            Ok(self)
        } else {
            Err(DerivationError::Invalid(Box::new(report)))
        }
    }

    /// `delta(a) = sum_u a_u delta(E_u)` for `a ∈ S`.
    pub fn eval(&self, a: &CMatrix) -> Result<CMatrix, DerivationError> {
        self.alg.check_shape(a)?;
        let outside = self.alg.max_outside(a);
        if outside > self.tol {
            return Err(DerivationError::NotInAlgebra { outside });
        }
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (u, value) in self.entries() {
            let coeff = a[(u.i, u.j)];
            if coeff != CScalar::new(0.0, 0.0) {
                out.axpy(coeff, value);
            }
        }
        Ok(out)
    }

    /// Sampled lower bound and, given the generator of an inner derivation,
    /// the analytic upper bound on `||delta||`.
    ///
    /// The lower bound starts from every basis unit and `samples` random
    /// unit-norm elements of `S`, then hill-climbs from the best one.
    pub fn norm_estimate(&self, samples: usize, seed: u64, generator: Option<&CMatrix>) -> NormEstimate {
        let n = self.dim();
        let mut rng = random::rng(seed);
        let gain = |a: &CMatrix| -> f64 {
            let norm = op_norm(a, 1e-12);
            if norm == 0.0 {
                return 0.0;
            }
            op_norm(&self.eval(a).expect("sampled inside S"), 1e-12) / norm
        };

        let mut best_a = CMatrix::zeros(n, n);
        let mut best = 0.0_f64;
        for (u, value) in self.entries() {
            let g = op_norm(value, 1e-12);
            if g > best {
                best = g;
                best_a = u.matrix(n);
            }
        }
        for _ in 0..samples.max(1) {
            let a = random::algebra_element(&mut rng, &self.alg);
            let g = gain(&a);
            if g > best {
                best = g;
                best_a = a;
            }
        }
        if best > 0.0 {
            let mut step = 0.5 * op_norm(&best_a, 1e-12);
            let mut misses = 0;
            for _ in 0..(4 * samples.max(8)) {
                let mut trial = best_a.clone();
                trial.axpy(
                    CScalar::new(step, 0.0),
                    &random::algebra_element(&mut rng, &self.alg),
                );
                let g = gain(&trial);
                if g > best {
                    best = g;
                    best_a = trial;
                    misses = 0;
                } else {
                    misses += 1;
                    if misses >= 4 {
                        step *= 0.5;
                        misses = 0;
                    }
                }
            }
        }

        NormEstimate {
            lower: best,
            upper: generator.map(|c| 2.0 * distance_to_scalars(c, 1e-10).distance),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EntryRepr {
    i: usize,
    j: usize,
    value: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    algebra: NestAlgebra,
    entries: Vec<EntryRepr>,
    tol: f64,
}

impl Serialize for DerivationTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TableRepr {
            algebra: self.alg.clone(),
            entries: self
                .entries()
                .map(|(u, v)| EntryRepr {
                    i: u.i,
                    j: u.j,
                    value: v.clone(),
                })
                .collect(),
            tol: self.tol,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DerivationTable {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = TableRepr::deserialize(deserializer)?;
        if !(repr.tol.is_finite() && repr.tol > 0.0) {
            return Err(serde::de::Error::custom("tol must be positive and finite"));
        }
        let entries = repr
            .entries
            .into_iter()
            .map(|e| (MatrixUnit::new(e.i, e.j), e.value))
            .collect();
        DerivationTable::from_entries(repr.algebra, entries, repr.tol).map_err(serde::de::Error::custom)
    }
}
