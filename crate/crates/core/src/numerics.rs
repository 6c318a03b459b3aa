//! Small dense linear algebra kernel.
//!
//! Everything here is `f64`, row-major and sized for problems with at most a
//! few thousand rows. Inverses are never formed: covariance solves go through
//! a Cholesky factorization and least-squares problems through Householder QR.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative tolerance used when checking symmetry of covariance inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Ratio `|r_jj| / max |r_ii|` below which a QR factor is declared rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Dense real vector, never empty, finite on construction.
#[derive(Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("vector must have at least one entry".into()));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { data })
    }

    pub fn from_slice(data: &[f64]) -> Result<Self> {
        Self::new(data.to_vec())
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1, "vector length must be positive");
        Self { data: vec![0.0; len] }
    }

    /// Unit vector `e_index` of length `len`.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.data[index] = 1.0;
        v
    }

    /// Wraps computed data without the finiteness check.
    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        debug_assert!(!data.is_empty());
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "vector lengths {} and {} differ",
                self.len(),
                other.len()
            )));
        }
        Ok(Self::from_vec_unchecked(
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn scale(&self, factor: f64) -> Vector {
        Self::from_vec_unchecked(self.data.iter().map(|v| v * factor).collect())
    }

    /// Element-wise squared magnitude, `|x|^2`.
    pub fn abs_sq(&self) -> Vector {
        Self::from_vec_unchecked(self.data.iter().map(|v| v * v).collect())
    }

    /// Copy of `self` followed by zeros up to `len` entries.
    pub fn zero_padded(&self, len: usize) -> Vector {
        let mut data = self.data.clone();
        data.resize(len.max(self.len()), 0.0);
        Self::from_vec_unchecked(data)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.data).finish()
    }
}

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix shape {rows}x{cols} must be at least 1x1"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(n_rows, n_cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
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

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector::from_vec_unchecked((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    /// A matrix with the single column `v`.
    pub fn from_column(v: &Vector) -> Self {
        Self { rows: v.len(), cols: 1, data: v.as_slice().to_vec() }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// True if every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (0..self.cols).all(|j| i == j || self[(i, j)] == 0.0))
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        mat_mul(self, other)
    }

    pub fn mul_vec(&self, v: &Vector) -> Result<Vector> {
        if self.cols != v.len() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(Vector::from_vec_unchecked(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        ))
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "shapes {:?} and {:?} differ",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry magnitude.
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// Errors unless square and symmetric within [`SYMMETRY_TOL`].
    pub fn check_symmetric(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let asymmetry = self.relative_asymmetry();
        if asymmetry > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(())
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        debug_assert!(self.is_square());
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| self.row(i)).collect();
        f.debug_list().entries(rows).finish()
    }
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Dimension(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            let b_row = b.row(k);
            let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factors `a` after checking symmetry and symmetrizing it.
    pub fn factor(a: &Matrix) -> Result<Self> {
        a.check_symmetric()?;
        let mut l = a.symmetrized();
        let n = l.rows;
        for j in 0..n {
            let mut pivot = l[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            if pivot <= 0.0 || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { row: j, pivot });
            }
            let d = pivot.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = l[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
            for k in (j + 1)..n {
                l[(j, k)] = 0.0;
            }
        }
        Ok(Self { l })
    }

    pub fn factor_matrix(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L Z = B` in place (forward substitution, every column of `b`).
    pub fn solve_lower_in_place(&self, b: &mut Matrix) {
        let n = self.l.rows;
        debug_assert_eq!(b.rows, n);
        for c in 0..b.cols {
            for i in 0..n {
                let mut s = b[(i, c)];
                for k in 0..i {
                    s -= self.l[(i, k)] * b[(k, c)];
                }
                b[(i, c)] = s / self.l[(i, i)];
            }
        }
    }

    /// Solves `L^T Z = B` in place (back substitution).
    pub fn solve_upper_in_place(&self, b: &mut Matrix) {
        let n = self.l.rows;
        debug_assert_eq!(b.rows, n);
        for c in 0..b.cols {
            for i in (0..n).rev() {
                let mut s = b[(i, c)];
                for k in (i + 1)..n {
                    s -= self.l[(k, i)] * b[(k, c)];
                }
                b[(i, c)] = s / self.l[(i, i)];
            }
        }
    }

    /// `L^{-1} B`, the whitening transform for a covariance factor.
    pub fn whiten(&self, b: &Matrix) -> Result<Matrix> {
        self.check_rows(b)?;
        let mut out = b.clone();
        self.solve_lower_in_place(&mut out);
        Ok(out)
    }

    pub fn whiten_vec(&self, v: &Vector) -> Result<Vector> {
        let m = self.whiten(&Matrix::from_column(v))?;
        Ok(Vector::from_vec_unchecked(m.data))
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        self.check_rows(b)?;
        let mut out = b.clone();
        self.solve_lower_in_place(&mut out);
        self.solve_upper_in_place(&mut out);
        Ok(out)
    }

    fn check_rows(&self, b: &Matrix) -> Result<()> {
        if b.rows != self.l.rows {
            return Err(Error::Dimension(format!(
                "right-hand side has {} rows, factor is {}x{}",
                b.rows, self.l.rows, self.l.rows
            )));
        }
        Ok(())
    }
}

/// Solves `a X = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Cholesky::factor(a)?.solve(b)
}

/// Householder QR of a tall matrix, stored compactly.
#[derive(Debug, Clone)]
struct HouseholderQr {
    qr: Matrix,
    tau: Vec<f64>,
    r_diag: Vec<f64>,
}

impl HouseholderQr {
    fn factor(a: &Matrix) -> Self {
        let (m, n) = a.shape();
        let mut qr = a.clone();
        let mut tau = vec![0.0; n];
        let mut r_diag = vec![0.0; n];
        for k in 0..n {
            let norm = (k..m).map(|i| qr[(i, k)] * qr[(i, k)]).sum::<f64>().sqrt();
            if norm == 0.0 {
                r_diag[k] = 0.0;
                continue;
            }
            let alpha = if qr[(k, k)] > 0.0 { -norm } else { norm };
            // v = x - alpha e_1, stored in column k with v_0 kept separately.
            let v0 = qr[(k, k)] - alpha;
            let mut vtv = v0 * v0;
            for i in (k + 1)..m {
                vtv += qr[(i, k)] * qr[(i, k)];
            }
            qr[(k, k)] = v0;
            tau[k] = if vtv == 0.0 { 0.0 } else { 2.0 / vtv };
            for j in (k + 1)..n {
                let s: f64 = (k..m).map(|i| qr[(i, k)] * qr[(i, j)]).sum();
                let f = tau[k] * s;
                for i in k..m {
                    let vik = qr[(i, k)];
                    qr[(i, j)] -= f * vik;
                }
            }
            r_diag[k] = alpha;
        }
        Self { qr, tau, r_diag }
    }

    fn check_rank(&self) -> Result<()> {
        let largest = self.r_diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        for (column, d) in self.r_diag.iter().enumerate() {
            if largest == 0.0 || d.abs() < RANK_TOL * largest {
                return Err(Error::RankDeficient { column, diagonal: d.abs(), largest });
            }
        }
        Ok(())
    }

    fn solve(&self, y: &Vector) -> Vec<f64> {
        let (m, n) = self.qr.shape();
        let mut b = y.as_slice().to_vec();
        for k in 0..n {
            let s: f64 = (k..m).map(|i| self.qr[(i, k)] * b[i]).sum();
            let f = self.tau[k] * s;
            for (i, bi) in b.iter_mut().enumerate().take(m).skip(k) {
                *bi -= f * self.qr[(i, k)];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                s -= self.qr[(i, j)] * xj;
            }
            x[i] = s / self.r_diag[i];
        }
        x
    }
}

/// Least-squares solution `argmin ||a x - y||_2` via Householder QR.
pub fn lstsq(a: &Matrix, y: &Vector) -> Result<Vector> {
    if a.rows < a.cols {
        return Err(Error::Dimension(format!(
            "least squares needs rows >= cols, got {}x{}",
            a.rows, a.cols
        )));
    }
    if a.rows != y.len() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows but right-hand side has {} entries",
            a.rows,
            y.len()
        )));
    }
    let qr = HouseholderQr::factor(a);
    qr.check_rank()?;
    Ok(Vector::from_vec_unchecked(qr.solve(y)))
}

/// Eigen-decomposition of a symmetric matrix, `A = V diag(values) V^T`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    /// Cyclic Jacobi rotations; intended for the small covariance matrices
    /// this crate handles.
    pub fn new(a: &Matrix) -> Result<Self> {
        a.check_symmetric()?;
        let n = a.rows;
        let mut m = a.symmetrized();
        let mut v = Matrix::identity(n);
        let scale = m.max_abs();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)] * m[(i, j)])
                .sum();
            if off.sqrt() <= f64::EPSILON * scale * 1e-3 || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        Ok(Self { values: m.diag(), vectors: v })
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Errors unless `a` is symmetric with eigenvalues `>= -1e-12 * trace`.
pub fn check_psd(a: &Matrix) -> Result<SymmetricEigen> {
    let eig = SymmetricEigen::new(a)?;
    let floor = -1e-12 * a.trace().abs();
    let min = eig.min_value();
    if min < floor {
        return Err(Error::NotPositiveSemidefinite { eigenvalue: min });
    }
    Ok(eig)
}

/// A factor `F` with `F F^T = a` for positive semidefinite `a`.
///
/// Negative round-off eigenvalues are clamped to zero. A diagonal input
/// yields exactly `diag(sqrt(a_ii))`.
pub fn psd_factor(a: &Matrix) -> Result<Matrix> {
    let eig = check_psd(a)?;
    let roots: Vec<f64> = eig.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(Matrix::from_fn(a.rows, a.cols, |i, j| eig.vectors[(i, j)] * roots[j]))
}
