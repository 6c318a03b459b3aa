//! Measurement-matrix uncertainty models and the overall-noise covariance.
//!
//! The measurement is `y = Ĥ x + w` with `w = B x + n`, where `B` is the
//! zero-mean error of the estimated matrix `Ĥ`. The covariance of `w`
//! depends on the unknown `x`:
//!
//! * unstructured, independent entry errors with variances `V`:
//!   `C_ww = diag(V |x|²) + C_nn`
//! * convolution structure, where `Ĥ` is built from an estimated impulse
//!   response with error covariance `C_ee`:
//!   `C_ww = P(x) C_b P(x)^T + C_nn`, with `B x = P(x) b₁` and `C_b` the
//!   zero-padded embedding of `C_ee`.

use crate::error::{Error, Result};
use crate::numerics::{check_psd, Matrix, Vector};

/// How the error of the estimated measurement matrix is described.
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintyModel {
    /// Independent entry errors with per-entry variances `v` (`N_y x N_x`).
    Unstructured { v: Matrix },
    /// `Ĥ` is a convolution matrix of an impulse-response estimate whose
    /// error has covariance `c_ee` (`N_h x N_h`).
    Convolution { c_ee: Matrix, n_x: usize },
}

impl UncertaintyModel {
    pub fn unstructured(v: Matrix) -> Result<Self> {
        if let Some(index) = v.as_slice().iter().position(|&e| e < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "variance matrix entry {index} is negative"
            )));
        }
        Ok(Self::Unstructured { v })
    }

    pub fn convolution(c_ee: Matrix, n_x: usize) -> Result<Self> {
        if n_x == 0 {
            return Err(Error::InvalidArgument("n_x must be positive".into()));
        }
        check_psd(&c_ee)?;
        Ok(Self::Convolution { c_ee, n_x })
    }

    /// `(N_y, N_x)` implied by the model.
    pub fn dims(&self) -> ModelDims {
        match self {
            Self::Unstructured { v } => ModelDims { n_y: v.rows(), n_x: v.cols(), n_h: None },
            Self::Convolution { c_ee, n_x } => ModelDims {
                n_y: c_ee.rows() + n_x - 1,
                n_x: *n_x,
                n_h: Some(c_ee.rows()),
            },
        }
    }

    /// Covariance of the overall noise `w` evaluated at `x`.
    pub fn covariance(&self, x: &Vector, c_nn: &Matrix) -> Result<Matrix> {
        match self {
            Self::Unstructured { v } => cov_unstructured(v, x, c_nn),
            Self::Convolution { c_ee, .. } => cov_convolution(c_ee, x, c_nn),
        }
    }

    /// True when the model carries no uncertainty at all.
    pub fn is_exact(&self) -> bool {
        match self {
            Self::Unstructured { v } => v.max_abs() == 0.0,
            Self::Convolution { c_ee, .. } => c_ee.max_abs() == 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub n_y: usize,
    pub n_x: usize,
    /// Impulse-response length, convolution models only.
    pub n_h: Option<usize>,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.n_y <= self.n_x {
            return Err(Error::Dimension(format!(
                "need more measurements than unknowns, got n_y = {} and n_x = {}",
                self.n_y, self.n_x
            )));
        }
        if let Some(n_h) = self.n_h {
            if self.n_y != self.n_x + n_h - 1 {
                return Err(Error::Dimension(format!(
                    "convolution needs n_y = n_x + n_h - 1, got {} != {} + {} - 1",
                    self.n_y, self.n_x, n_h
                )));
            }
        }
        Ok(())
    }
}

/// The `(len(h) + n_x - 1) x n_x` linear-convolution matrix of `h`.
///
/// Column `i` holds `h` shifted down by `i` rows.
pub fn conv_matrix(h: &Vector, n_x: usize) -> Result<Matrix> {
    if n_x == 0 {
        return Err(Error::InvalidArgument("n_x must be positive".into()));
    }
    let n_y = h.len() + n_x - 1;
    let mut m = Matrix::zeros(n_y, n_x);
    for col in 0..n_x {
        for (k, hk) in h.iter().enumerate() {
            m[(col + k, col)] = *hk;
        }
    }
    Ok(m)
}

/// `diag(v |x|²) + c_nn`.
pub fn cov_unstructured(v: &Matrix, x: &Vector, c_nn: &Matrix) -> Result<Matrix> {
    let (n_y, n_x) = v.shape();
    if x.len() != n_x {
        return Err(Error::Dimension(format!(
            "x has length {} but the variance matrix has {n_x} columns",
            x.len()
        )));
    }
    if c_nn.shape() != (n_y, n_y) {
        return Err(Error::Dimension(format!(
            "noise covariance is {:?}, expected {n_y}x{n_y}",
            c_nn.shape()
        )));
    }
    let model_var = v.mul_vec(&x.abs_sq())?;
    let mut c = c_nn.clone();
    for i in 0..n_y {
        c[(i, i)] += model_var[i];
    }
    Ok(c)
}

/// The `n x n` down-shift matrix (ones on the first subdiagonal).
pub fn shift_matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
}

/// `P(x) = Σ_k x_k D^k` of size `n_y x n_y`, placed band by band.
pub fn build_px(x: &Vector, n_y: usize) -> Result<Matrix> {
    if n_y < x.len() {
        return Err(Error::Dimension(format!(
            "n_y = {n_y} is smaller than len(x) = {}",
            x.len()
        )));
    }
    let mut p = Matrix::zeros(n_y, n_y);
    for col in 0..n_y {
        for (k, xk) in x.iter().enumerate() {
            if col + k < n_y {
                p[(col + k, col)] = *xk;
            }
        }
    }
    Ok(p)
}

/// Overall-noise covariance for the convolution model.
///
/// Only the first `N_h` columns of `P(x)` meet the nonzero block of the
/// embedded error covariance, so the product is formed over that block.
pub fn cov_convolution(c_ee: &Matrix, x: &Vector, c_nn: &Matrix) -> Result<Matrix> {
    if !c_ee.is_square() {
        return Err(Error::Dimension(format!(
            "impulse-response error covariance must be square, got {:?}",
            c_ee.shape()
        )));
    }
    let n_h = c_ee.rows();
    let n_y = n_h + x.len() - 1;
    if c_nn.shape() != (n_y, n_y) {
        return Err(Error::Dimension(format!(
            "noise covariance is {:?}, expected {n_y}x{n_y} for n_h = {n_h}, n_x = {}",
            c_nn.shape(),
            x.len()
        )));
    }
    // First n_h columns of P(x): entry (j + k, j) = x_k.
    let mut p_block = Matrix::zeros(n_y, n_h);
    for j in 0..n_h {
        for (k, xk) in x.iter().enumerate() {
            p_block[(j + k, j)] = *xk;
        }
    }
    let model = p_block.mul(c_ee)?.mul(&p_block.transpose())?;
    model.symmetrized().add(c_nn)
}

/// Per-entry variance matrix of a convolution matrix built from an impulse
/// response whose taps have variances `diag(c_ee)`.
pub fn convolution_variances(c_ee: &Matrix, n_x: usize) -> Matrix {
    let tap_var = c_ee.diag();
    let n_h = tap_var.len();
    Matrix::from_fn(n_h + n_x - 1, n_x, |i, j| {
        if i >= j && i - j < n_h {
            tap_var[i - j]
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(data: &[f64]) -> Vector {
        Vector::from_slice(data).unwrap()
    }

    #[test]
    fn conv_matrix_identity_impulse() {
        assert_eq!(conv_matrix(&v(&[1.0]), 3).unwrap(), Matrix::identity(3));
    }

    #[test]
    fn conv_matrix_hand_built() {
        let m = conv_matrix(&v(&[1.0, 2.0]), 2).unwrap();
        assert_eq!(m, Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0], [0.0, 2.0]]).unwrap());
    }

    #[test]
    fn conv_matrix_matches_direct_convolution() {
        let h = [0.3, -1.2, 0.7, 2.0, -0.4];
        let x = [1.0, -0.5, 0.25];
        let direct: Vec<f64> = (0..7)
            .map(|n| {
                (0..3)
                    .filter(|&k| n >= k && n - k < 5)
                    .map(|k| x[k] * h[n - k])
                    .sum()
            })
            .collect();
        let y = conv_matrix(&v(&h), 3).unwrap().mul_vec(&v(&x)).unwrap();
        for (a, b) in y.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cov_unstructured_cases() {
        let vm = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let c_nn = Matrix::identity(2).scale(0.1);
        let c = cov_unstructured(&vm, &v(&[1.0, 0.5]), &c_nn).unwrap();
        assert!((c[(0, 0)] - 1.6).abs() < 1e-15);
        assert!((c[(1, 1)] - 4.1).abs() < 1e-15);
        assert_eq!(c[(0, 1)], 0.0);
        assert_eq!(c[(1, 0)], 0.0);

        // no model error
        let c = cov_unstructured(&Matrix::zeros(2, 2), &v(&[1.0, 0.5]), &c_nn).unwrap();
        assert_eq!(c, c_nn);

        // unit vector selects one column
        let c = cov_unstructured(&vm, &Vector::unit(2, 1), &Matrix::zeros(2, 2)).unwrap();
        assert_eq!(c, Matrix::from_diag(&[2.0, 4.0]));
    }

    #[test]
    fn cov_unstructured_dimension_errors() {
        let vm = Matrix::zeros(3, 2);
        assert!(cov_unstructured(&vm, &Vector::zeros(3), &Matrix::zeros(3, 3)).is_err());
        assert!(cov_unstructured(&vm, &Vector::zeros(2), &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn shift_matrix_behaviour() {
        assert_eq!(shift_matrix(1), Matrix::zeros(1, 1));
        let d = shift_matrix(3);
        assert_eq!(d.mul_vec(&v(&[1.0, 2.0, 3.0])).unwrap(), v(&[0.0, 1.0, 2.0]));
        let n = 5;
        let d = shift_matrix(n);
        let mut e = Vector::unit(n, 0);
        for k in 1..n {
            e = d.mul_vec(&e).unwrap();
            assert_eq!(e, Vector::unit(n, k));
        }
        assert_eq!(d.mul_vec(&e).unwrap(), Vector::zeros(n));
    }

    #[test]
    fn build_px_special_cases() {
        assert_eq!(build_px(&v(&[1.0, 0.0, 0.0]), 5).unwrap(), Matrix::identity(5));
        assert_eq!(build_px(&v(&[0.0, 1.0, 0.0]), 5).unwrap(), shift_matrix(5));
        assert!(build_px(&v(&[1.0, 2.0, 3.0]), 2).is_err());
    }

    #[test]
    fn build_px_equals_power_series_of_shift() {
        let x = v(&[0.7, -1.1, 0.4]);
        let n_y = 6;
        let d = shift_matrix(n_y);
        let mut power = Matrix::identity(n_y);
        let mut sum = Matrix::zeros(n_y, n_y);
        for xk in x.iter() {
            sum = sum.add(&power.scale(*xk)).unwrap();
            power = power.mul(&d).unwrap();
        }
        assert_eq!(build_px(&x, n_y).unwrap(), sum);
    }

    #[test]
    fn cov_convolution_special_cases() {
        let c_nn = Matrix::identity(7).scale(1e-6);
        let c = cov_convolution(&Matrix::zeros(5, 5), &v(&[1.0, 0.5, 0.25]), &c_nn).unwrap();
        assert_eq!(c, c_nn);

        let c_ee = Matrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap();
        let c_nn = Matrix::identity(2).scale(0.1);
        let c = cov_convolution(&c_ee, &v(&[1.0]), &c_nn).unwrap();
        assert_eq!(c, c_ee.add(&c_nn).unwrap());
    }

    #[test]
    fn cov_convolution_matches_full_px_product() {
        let c_ee = Matrix::from_rows(&[
            [2.0, 0.3, 0.1],
            [0.3, 1.0, -0.2],
            [0.1, -0.2, 0.5],
        ])
        .unwrap();
        let x = v(&[1.0, -0.5, 2.0, 0.3]);
        let n_y = 6;
        let mut c_b = Matrix::zeros(n_y, n_y);
        for i in 0..3 {
            for j in 0..3 {
                c_b[(i, j)] = c_ee[(i, j)];
            }
        }
        let p = build_px(&x, n_y).unwrap();
        let c_nn = Matrix::identity(n_y).scale(0.01);
        let full = p.mul(&c_b).unwrap().mul(&p.transpose()).unwrap().add(&c_nn).unwrap();
        let fast = cov_convolution(&c_ee, &x, &c_nn).unwrap();
        assert!(fast.sub(&full).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn cov_convolution_dimension_error() {
        let err = cov_convolution(&Matrix::identity(5), &Vector::zeros(3), &Matrix::identity(6));
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn model_validation() {
        assert!(UncertaintyModel::unstructured(Matrix::from_diag(&[1.0, -1.0])).is_err());
        let bad = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            UncertaintyModel::convolution(bad, 3),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
        let asym = Matrix::from_rows(&[[1.0, 0.1], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            UncertaintyModel::convolution(asym, 3),
            Err(Error::NotSymmetric { .. })
        ));
        let m = UncertaintyModel::convolution(Matrix::identity(5), 3).unwrap();
        assert_eq!(m.dims(), ModelDims { n_y: 7, n_x: 3, n_h: Some(5) });
        assert!(m.dims().validate().is_ok());
        assert!(ModelDims { n_y: 3, n_x: 3, n_h: None }.validate().is_err());
        assert!(ModelDims { n_y: 8, n_x: 3, n_h: Some(5) }.validate().is_err());
    }

    #[test]
    fn convolution_variances_follow_band() {
        let v = convolution_variances(&Matrix::from_diag(&[1.0, 2.0]), 2);
        assert_eq!(v, Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0], [0.0, 2.0]]).unwrap());
    }
}
