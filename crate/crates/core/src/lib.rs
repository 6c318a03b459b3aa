//! Parameter estimation for linear models whose measurement matrix is itself
//! uncertain.
//!
//! The measurement `y = H x + n` is observed through an estimate `Ĥ` of the
//! true matrix. Writing `y = Ĥ x + w` folds the matrix error into an overall
//! noise `w` whose covariance depends on `x`. [`iterative_blue`] starts from
//! least squares and alternates between evaluating that covariance at the
//! current estimate and re-solving the best linear unbiased estimator.
//!
//! Two uncertainty models are supported, see [`UncertaintyModel`]:
//! independent per-entry variances, and convolution matrices built from an
//! impulse-response estimate with a full error covariance.
//!
//! ```
//! use iblue::{conv_matrix, iterative_blue, IterationConfig, LinearProblem, Matrix,
//!             UncertaintyModel, Vector};
//!
//! let h_hat = Vector::new(vec![0.9, -0.4, 1.3, 0.2, -0.6]).unwrap();
//! let h_hat = conv_matrix(&h_hat, 3).unwrap();
//! let y = h_hat.mul_vec(&Vector::new(vec![1.0, 0.5, 0.25]).unwrap()).unwrap();
//! let model = UncertaintyModel::convolution(
//!     Matrix::from_diag(&[1e-4, 1e-5, 1e-6, 1e-6, 1e-6]), 3).unwrap();
//! let problem = LinearProblem::new(y, h_hat, Matrix::identity(7).scale(1e-6), model).unwrap();
//!
//! let trace = iterative_blue(&problem, &IterationConfig::fixed(3)).unwrap();
//! assert_eq!(trace.estimates.len(), 4);
//! ```
//!
//! The [`sim`] module runs seeded Monte Carlo campaigns over random
//! deconvolution scenarios; [`config`] and [`report`] handle their text
//! input and CSV output.

pub mod config;
pub mod error;
pub mod estimators;
pub mod numerics;
pub mod report;
pub mod sim;
pub mod uncertainty;

pub use error::{Error, Result};
pub use estimators::{
    blue, iterative_blue, ls_estimate, oracle_blue_perfect_cww, oracle_blue_perfect_model,
    Estimate, EstimateTrace, Estimator, EstimatorSet, IterationConfig, LinearProblem, Truth,
};
pub use numerics::{lstsq, mat_mul, solve_spd, Matrix, Vector};
pub use uncertainty::{
    build_px, conv_matrix, cov_convolution, cov_unstructured, shift_matrix, UncertaintyModel,
};
