use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CScalar, LinalgError};

const ZERO: CScalar = CScalar::new(0.0, 0.0);
const ONE: CScalar = CScalar::new(1.0, 0.0);

/// A column vector in `C^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CVector(Vec<CScalar>);

impl CVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![ZERO; n])
    }

    /// The standard basis vector `e_i` of `C^n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = ONE;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[CScalar] {
        &self.0
    }

    /// `<self, other>`, conjugate-linear in `other`.
    pub fn inner(&self, other: &CVector) -> CScalar {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: CScalar) -> CVector {
        CVector(self.0.iter().map(|z| z * s).collect())
    }

    pub fn normalized(&self) -> Option<CVector> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(CScalar::new(1.0 / n, 0.0)))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl From<Vec<CScalar>> for CVector {
    fn from(v: Vec<CScalar>) -> Self {
        Self(v)
    }
}

impl Index<usize> for CVector {
    type Output = CScalar;
    fn index(&self, i: usize) -> &CScalar {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut CScalar {
        &mut self.0[i]
    }
}

impl Add for &CVector {
    type Output = CVector;
    fn add(self, rhs: &CVector) -> CVector {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &CVector {
    type Output = CVector;
    fn sub(self, rhs: &CVector) -> CVector {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<CScalar>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, ONE)
    }

    pub fn scalar(n: usize, s: CScalar) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    /// The matrix unit `E_ij` (0-based) of size `n`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = ONE;
        m
    }

    pub fn from_diag(diag: &[CScalar]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_row_major(
        rows: usize,
        cols: usize,
        data: Vec<CScalar>,
    ) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Malformed(format!(
                "expected {} entries for a {rows}x{cols} matrix, found {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(LinalgError::NonFinite(pos));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<CScalar>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::Malformed("ragged rows".into()));
        }
        Self::from_row_major(r, c, rows.concat())
    }

    /// Builds a real matrix from nested rows; convenient in tests.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let data: Vec<Vec<CScalar>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| CScalar::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&data).expect("real rows must be rectangular and finite")
    }

    /// Assembles a matrix from its columns.
    pub fn from_columns(columns: &[CVector]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, CVector::len);
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            for i in 0..rows {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[CScalar] {
        &self.data
    }

    pub fn column(&self, j: usize) -> CVector {
        CVector((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> CScalar {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: CScalar) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> CMatrix {
        self.scale(CScalar::new(s, 0.0))
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: CScalar, other: &CMatrix) {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "matrix shape mismatch"
        );
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        CVector(
            (0..self.rows)
                .map(|i| {
                    self.data[i * self.cols..(i + 1) * self.cols]
                        .iter()
                        .zip(&v.0)
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect(),
        )
    }

    pub fn try_mul(&self, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::ShapeMismatch(
                self.rows, self.cols, rhs.rows, rhs.cols,
            ));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * E_kl`: column `k` of `self` moved to column `l`.
    pub fn mul_unit(&self, k: usize, l: usize) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            out[(i, l)] = self[(i, k)];
        }
        out
    }

    /// `E_ij * self`: row `j` of `self` moved to row `i`.
    pub fn unit_mul(&self, i: usize, j: usize) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows, self.cols);
        for c in 0..self.cols {
            out[(i, c)] = self[(j, c)];
        }
        out
    }

    /// `self * other - other * self`.
    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        &(self * other) - &(other * self)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `P = P^2 = P^*` within `tol` (entrywise).
    pub fn is_projection(&self, tol: f64) -> bool {
        self.is_square()
            && (&(self * self) - self).max_abs() <= tol
            && (&self.adjoint() - self).max_abs() <= tol
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = CScalar;
    fn index(&self, (i, j): (usize, usize)) -> &CScalar {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut CScalar {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.try_mul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        self.axpy(ONE, rhs);
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        self.axpy(-ONE, rhs);
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(-ONE)
    }
}

/// Vectors encode as a list of `[re, im]` pairs.
impl Serialize for CVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.0.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        let v = CVector(pairs.into_iter().map(|[re, im]| CScalar::new(re, im)).collect());
        if !v.is_finite() {
            return Err(D::Error::custom("non-finite vector entry"));
        }
        Ok(v)
    }
}

/// `{"rows": n, "cols": n, "data": [[re, im], ...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        let data = repr
            .data
            .into_iter()
            .map(|[re, im]| CScalar::new(re, im))
            .collect();
        CMatrix::from_row_major(repr.rows, repr.cols, data).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_products_shift_rows_and_columns() {
        let m = CMatrix::from_real_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]);
        for k in 0..3 {
            for l in 0..3 {
                assert_eq!(m.mul_unit(k, l), &m * &CMatrix::unit(3, k, l));
                assert_eq!(m.unit_mul(k, l), &CMatrix::unit(3, k, l) * &m);
            }
        }
    }

    #[test]
    fn json_layout_is_row_major_pairs() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = CScalar::new(1.5, -2.0);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"rows":2,"cols":2,"data":[[0.0,0.0],[1.5,-2.0],[0.0,0.0],[0.0,0.0]]}"#
        );
        let back: CMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_rejects_wrong_entry_count() {
        let err = serde_json::from_str::<CMatrix>(r#"{"rows":2,"cols":2,"data":[[1.0,0.0]]}"#);
        assert!(err.is_err());
    }

    #[test]
    fn non_finite_entries_are_refused() {
        let err = CMatrix::from_row_major(1, 1, vec![CScalar::new(f64::NAN, 0.0)]).unwrap_err();
        assert_eq!(err, LinalgError::NonFinite(0));
    }

    #[test]
    fn projection_predicate() {
        let p = CMatrix::from_diag(&[ONE, ZERO]);
        assert!(p.is_projection(0.0));
        assert!(!CMatrix::unit(2, 0, 1).is_projection(1e-12));
    }
}
