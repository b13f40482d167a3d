//! Finite-dimensional nest algebras.
//!
//! A nest on `C^n` is recorded by the dimensions `d_1 < d_2 < ... < d_m = n`
//! of its nonzero invariant subspaces `span(e_0, ..., e_{d_k - 1})`. The
//! algebra is every operator leaving all of them invariant, i.e. the
//! block-upper-triangular matrices for the partition the chain induces.
//! The chain `(1, 2, ..., n)` gives the upper-triangular algebra `T_n`, the
//! finite-dimensional model of a maximal triangular algebra whose diagonal
//! is maximal abelian. Totality of the invariant lattice holds by
//! construction. Irreducible triangular algebras have no nontrivial
//! invariant projection and are not modelled.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{jacobi_svd, rank_one, scalar_identity_part, CMatrix, CScalar, CVector, LinalgError};
use crate::random;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("dimension must be at least 1")]
    EmptySpace,
    #[error("invalid chain {chain:?} for n = {n}: {reason}")]
    InvalidChain {
        n: usize,
        chain: Vec<usize>,
        reason: &'static str,
    },
    #[error("chain index {k} out of range 1..={m}")]
    LevelOutOfRange { k: usize, m: usize },
    #[error("expected a {expected}x{expected} matrix, found {rows}x{cols}")]
    WrongShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// An admissible matrix unit `E_ij` (0-based row `i`, column `j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatrixUnit {
    pub i: usize,
    pub j: usize,
}

impl MatrixUnit {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    pub fn matrix(&self, n: usize) -> CMatrix {
        CMatrix::unit(n, self.i, self.j)
    }
}

#[derive(Serialize, Deserialize)]
struct AlgebraRepr {
    n: usize,
    chain: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AlgebraRepr", into = "AlgebraRepr")]
pub struct NestAlgebra {
    n: usize,
    chain: Vec<usize>,
    /// `block[r]` = index of the least chain segment containing coordinate `r`.
    block: Vec<usize>,
}

impl TryFrom<AlgebraRepr> for NestAlgebra {
    type Error = AlgebraError;
    fn try_from(r: AlgebraRepr) -> Result<Self, AlgebraError> {
        NestAlgebra::new(r.n, r.chain)
    }
}

impl From<NestAlgebra> for AlgebraRepr {
    fn from(a: NestAlgebra) -> Self {
        AlgebraRepr {
            n: a.n,
            chain: a.chain,
        }
    }
}

impl NestAlgebra {
    pub fn new(n: usize, chain: Vec<usize>) -> Result<Self, AlgebraError> {
        let invalid = |reason| AlgebraError::InvalidChain {
            n,
            chain: chain.clone(),
            reason,
        };
        if n == 0 {
            return Err(AlgebraError::EmptySpace);
        }
        if chain.is_empty() {
            return Err(invalid("chain is empty"));
        }
        if chain.iter().any(|&d| d == 0 || d > n) {
            return Err(invalid("dimensions must lie in 1..=n"));
        }
        if chain.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("dimensions must be strictly increasing"));
        }
        if *chain.last().unwrap() != n {
            return Err(invalid("last dimension must equal n"));
        }
        let mut block = Vec::with_capacity(n);
        let mut seg = 0;
        for r in 0..n {
            while r >= chain[seg] {
                seg += 1;
            }
            block.push(seg);
        }
        Ok(Self { n, chain, block })
    }

    /// The upper-triangular algebra `T_n`.
    pub fn triangular(n: usize) -> Self {
        Self::new(n, (1..=n).collect()).expect("1..=n is a valid chain")
    }

    /// All of `B(C^n)`: the trivial nest.
    pub fn full(n: usize) -> Self {
        Self::new(n, vec![n]).expect("(n) is a valid chain")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn chain(&self) -> &[usize] {
        &self.chain
    }

    /// Number of nonzero lattice projections, `m`.
    pub fn levels(&self) -> usize {
        self.chain.len()
    }

    pub fn is_maximal_triangular(&self) -> bool {
        self.chain.len() == self.n
    }

    /// Chain indices `k` (1-based) with `0 < d_k < n`.
    pub fn interior_levels(&self) -> std::ops::Range<usize> {
        1..self.chain.len()
    }

    /// `d_k` for the 1-based chain index `k`.
    pub fn level_dim(&self, k: usize) -> Result<usize, AlgebraError> {
        self.check_level(k)?;
        Ok(self.chain[k - 1])
    }

    fn check_level(&self, k: usize) -> Result<(), AlgebraError> {
        if k == 0 || k > self.chain.len() {
            Err(AlgebraError::LevelOutOfRange {
                k,
                m: self.chain.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn block_of(&self, r: usize) -> usize {
        self.block[r]
    }

    pub fn is_admissible(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.block[i] <= self.block[j]
    }

    pub fn check_shape(&self, a: &CMatrix) -> Result<(), AlgebraError> {
        if a.rows() != self.n || a.cols() != self.n {
            return Err(AlgebraError::WrongShape {
                expected: self.n,
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        Ok(())
    }

    /// Membership: every entry outside the admissible pattern has modulus `<= tol`.
    pub fn contains(&self, a: &CMatrix, tol: f64) -> Result<bool, AlgebraError> {
        self.check_shape(a)?;
        Ok(self.max_outside(a) <= tol)
    }

    /// Largest modulus among entries outside the admissible pattern.
    pub fn max_outside(&self, a: &CMatrix) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..self.n {
                if !self.is_admissible(i, j) {
                    worst = worst.max(a[(i, j)].norm());
                }
            }
        }
        worst
    }

    /// Projection onto the first `d_k` coordinates.
    pub fn lattice_projection(&self, k: usize) -> Result<CMatrix, AlgebraError> {
        let d = self.level_dim(k)?;
        Ok(coordinate_projection(self.n, 0..d))
    }

    /// Admissible units in lexicographic `(i, j)` order.
    pub fn basis_units(&self) -> Vec<MatrixUnit> {
        let mut units = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.is_admissible(i, j) {
                    units.push(MatrixUnit::new(i, j));
                }
            }
        }
        units
    }

    pub fn project_onto(&self, a: &CMatrix) -> CMatrix {
        let mut out = a.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                if !self.is_admissible(i, j) {
                    out[(i, j)] = CScalar::new(0.0, 0.0);
                }
            }
        }
        out
    }
}

/// Diagonal 0/1 projection onto the coordinates in `range`.
pub fn coordinate_projection(n: usize, range: std::ops::Range<usize>) -> CMatrix {
    let mut p = CMatrix::zeros(n, n);
    for i in range {
        p[(i, i)] = CScalar::new(1.0, 0.0);
    }
    p
}

/// `I - p`.
pub fn complement(p: &CMatrix) -> CMatrix {
    &CMatrix::identity(p.rows()) - p
}

/// Outcome of the randomized structure checks.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StructureReport {
    pub assertions: usize,
    pub failures: Vec<String>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.assertions += 1;
        if !ok {
            self.failures.push(what());
        }
    }
}

const STRUCTURE_TOL: f64 = 1e-10;

/// Basis (as `n x n` matrices) of the commutant of the algebra, computed as the
/// numerical null space of `X -> ([X, E_u])_u` over admissible units `E_u`.
pub fn commutant_basis(alg: &NestAlgebra) -> Vec<CMatrix> {
    let n = alg.dim();
    let nn = n * n;
    // Gram matrix of the stacked commutator maps; each column of a single map
    // has at most two nonzero entries, so it is accumulated sparsely.
    let mut gram = vec![0.0_f64; nn * nn];
    for u in alg.basis_units() {
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nn];
        for r in 0..n {
            for s in 0..n {
                let col = &mut columns[r * n + s];
                // X E_ij picks X[r][i] into (r, j).
                if s == u.i {
                    col.push((r * n + u.j, 1.0));
                }
                // E_ij X picks X[j][s] into (i, s).
                if r == u.j {
                    col.push((u.i * n + s, -1.0));
                }
            }
        }
        for c1 in 0..nn {
            for &(row1, v1) in &columns[c1] {
                for c2 in 0..nn {
                    for &(row2, v2) in &columns[c2] {
                        if row1 == row2 {
                            gram[c1 * nn + c2] += v1 * v2;
                        }
                    }
                }
            }
        }
    }
    let g = CMatrix::from_row_major(
        nn,
        nn,
        gram.into_iter().map(|x| CScalar::new(x, 0.0)).collect(),
    )
    .expect("gram entries are finite");
    let svd = jacobi_svd(&g, true);
    let top = svd.singular_values.first().copied().unwrap_or(0.0);
    let v = svd.v.expect("requested right vectors");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= 1e-9 * top.max(1.0))
        .map(|(k, _)| {
            let col = v.column(k);
            CMatrix::from_row_major(n, n, col.as_slice().to_vec()).expect("finite")
        })
        .collect()
}

/// Randomized checks of the structural facts the construction relies on:
/// `p B(H) p⊥ ⊂ S`, `S xi ⊇ p` for `xi ∈ p⊥`, the chain projections are
/// nested and lie in `S ∩ S*`, and the commutant of `S` is `C I`.
pub fn check_structure(alg: &NestAlgebra, trials: usize, seed: u64) -> StructureReport {
    let n = alg.dim();
    let mut rng = random::rng(seed);
    let mut report = StructureReport::default();

    let commutant = commutant_basis(alg);
    report.check(commutant.len() == 1, || {
        format!("commutant has dimension {}, expected 1", commutant.len())
    });
    for x in &commutant {
        let (_, residual) = scalar_identity_part(x, 1e-14);
        report.check(residual <= STRUCTURE_TOL, || {
            format!("commutant element is not scalar (residual {residual:e})")
        });
    }

    for trial in 0..trials.max(1) {
        let k = rng.random_range(1..=alg.levels());
        let p = alg.lattice_projection(k).expect("k drawn in range");
        let p_perp = complement(&p);
        let d = alg.chain()[k - 1];

        // Lattice projections sit in the diagonal S ∩ S*.
        let in_both = alg.contains(&p, 0.0).unwrap() && alg.contains(&p.adjoint(), 0.0).unwrap();
        report.check(in_both && p.is_projection(0.0), || {
            format!("trial {trial}: lattice projection k={k} not a self-adjoint member")
        });

        // Totally ordered: p_k p_l = p_min(k,l).
        let l = rng.random_range(1..=alg.levels());
        let q = alg.lattice_projection(l).unwrap();
        let expected = if l < k { &q } else { &p };
        report.check(&(&p * &q) == expected, || {
            format!("trial {trial}: projections {k} and {l} are not nested")
        });

        // p B(H) p⊥ ⊂ S.
        let m = random::gaussian_matrix(&mut rng, n);
        let corner = &(&p * &m) * &p_perp;
        report.check(alg.contains(&corner, 0.0).unwrap(), || {
            format!("trial {trial}: p M p⊥ left the algebra at k={k}")
        });

        // p⊥ S p = 0.
        let a = random::algebra_element(&mut rng, alg);
        let lower = &(&p_perp * &a) * &p;
        report.check(lower.max_abs() == 0.0, || {
            format!("trial {trial}: p⊥ a p nonzero at k={k}")
        });

        // S xi0 ⊇ p, witnessed by a = xi0 ⊗ eta.
        if d < n {
            let xi0 = random::unit_vector_in(&mut rng, n, d..n);
            let mut targets: Vec<CVector> = (0..d).map(|i| CVector::basis(n, i)).collect();
            targets.push(random::unit_vector_in(&mut rng, n, 0..d));
            for eta in &targets {
                let a = rank_one(&xi0, eta).expect("same length");
                let hits = (&a.apply(&xi0) - eta).norm() <= STRUCTURE_TOL;
                report.check(alg.contains(&a, 0.0).unwrap() && hits, || {
                    format!("trial {trial}: xi0 ⊗ eta fails to map xi0 onto eta at k={k}")
                });
            }
        }

        // A random matrix projected onto the commutant is scalar.
        if !commutant.is_empty() {
            let x = random::gaussian_matrix(&mut rng, n);
            let mut projected = CMatrix::zeros(n, n);
            for basis in &commutant {
                let coeff: CScalar = x
                    .data()
                    .iter()
                    .zip(basis.data())
                    .map(|(a, b)| a * b.conj())
                    .sum();
                projected.axpy(coeff, basis);
            }
            let (_, residual) = scalar_identity_part(&projected, 1e-14);
            report.check(residual <= STRUCTURE_TOL * (1.0 + x.frobenius_norm()), || {
                format!("trial {trial}: commutant projection not scalar ({residual:e})")
            });
        }
    }
    report
}
