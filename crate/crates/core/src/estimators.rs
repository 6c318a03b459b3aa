//! Least squares, weighted BLUE and the iterative BLUE.
//!
//! The iterative estimator starts from the least-squares solution, evaluates
//! the overall-noise covariance at the current estimate and re-solves the
//! BLUE with that weighting. The two oracle estimators use information that
//! is unavailable in practice (the true matrix, or the covariance evaluated
//! at the true parameters) and serve as performance bounds.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{lstsq, Cholesky, Matrix, Vector};
use crate::uncertainty::UncertaintyModel;

/// Norm growth beyond which an iterate counts as diverged.
pub const DIVERGENCE_GROWTH: f64 = 1e12;

/// `y = Ĥ x + w` together with everything needed to describe `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProblem {
    y: Vector,
    h_hat: Matrix,
    c_nn: Matrix,
    uncertainty: UncertaintyModel,
}

impl LinearProblem {
    /// Checks shapes and symmetry. Rank and definiteness are checked when
    /// solving.
    pub fn new(
        y: Vector,
        h_hat: Matrix,
        c_nn: Matrix,
        uncertainty: UncertaintyModel,
    ) -> Result<Self> {
        let (n_y, n_x) = h_hat.shape();
        if y.len() != n_y {
            return Err(Error::Dimension(format!(
                "{} measurements for a {n_y}x{n_x} matrix",
                y.len()
            )));
        }
        if c_nn.shape() != (n_y, n_y) {
            return Err(Error::Dimension(format!(
                "noise covariance is {:?}, expected {n_y}x{n_y}",
                c_nn.shape()
            )));
        }
        c_nn.check_symmetric()?;
        let dims = uncertainty.dims();
        dims.validate()?;
        if (dims.n_y, dims.n_x) != (n_y, n_x) {
            return Err(Error::Dimension(format!(
                "uncertainty model describes a {}x{} matrix, estimate is {n_y}x{n_x}",
                dims.n_y, dims.n_x
            )));
        }
        Ok(Self { y, h_hat, c_nn, uncertainty })
    }

    pub fn y(&self) -> &Vector {
        &self.y
    }

    pub fn h_hat(&self) -> &Matrix {
        &self.h_hat
    }

    pub fn c_nn(&self) -> &Matrix {
        &self.c_nn
    }

    pub fn uncertainty(&self) -> &UncertaintyModel {
        &self.uncertainty
    }

    pub fn n_x(&self) -> usize {
        self.h_hat.cols()
    }

    /// Overall-noise covariance evaluated at `x`.
    pub fn noise_covariance(&self, x: &Vector) -> Result<Matrix> {
        self.uncertainty.covariance(x, &self.c_nn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConfig {
    /// Maximum number of reweighting steps; 0 returns the LS estimate.
    pub n_iter: usize,
    /// Relative change `||x_{k+1} - x_k|| / ||x_k||` at or below which the
    /// iteration stops. 0 disables early stopping.
    pub stop_tol: f64,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self { n_iter: 10, stop_tol: 0.0 }
    }
}

impl IterationConfig {
    pub fn fixed(n_iter: usize) -> Self {
        Self { n_iter, stop_tol: 0.0 }
    }
}

/// Every iterate `x̂_0 … x̂_K` of one run; `x̂_0` is the LS solution.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTrace {
    pub estimates: Vec<Vector>,
    pub stopped_early: bool,
    pub iterations_run: usize,
}

impl EstimateTrace {
    pub fn last(&self) -> &Vector {
        self.estimates.last().expect("trace always holds the initial estimate")
    }

    pub fn initial(&self) -> &Vector {
        &self.estimates[0]
    }
}

/// Ordinary least squares, the starting point of the iteration.
pub fn ls_estimate(h_hat: &Matrix, y: &Vector) -> Result<Vector> {
    lstsq(h_hat, y)
}

/// `(H^T C^{-1} H)^{-1} H^T C^{-1} y`, computed by whitening with the
/// Cholesky factor of `c` and solving the whitened least-squares problem.
pub fn blue(h: &Matrix, c: &Matrix, y: &Vector) -> Result<Vector> {
    if c.shape() != (h.rows(), h.rows()) {
        return Err(Error::Dimension(format!(
            "weighting matrix is {:?}, expected {}x{}",
            c.shape(),
            h.rows(),
            h.rows()
        )));
    }
    let chol = Cholesky::factor(c)?;
    let h_w = chol.whiten(h)?;
    let y_w = chol.whiten_vec(y)?;
    lstsq(&h_w, &y_w)
}

/// BLUE using the true measurement matrix.
pub fn oracle_blue_perfect_model(h_true: &Matrix, c_nn: &Matrix, y: &Vector) -> Result<Vector> {
    blue(h_true, c_nn, y)
}

/// BLUE using `Ĥ` with the overall-noise covariance at the true parameters.
pub fn oracle_blue_perfect_cww(h_hat: &Matrix, c_ww_true: &Matrix, y: &Vector) -> Result<Vector> {
    blue(h_hat, c_ww_true, y)
}

/// Iterative BLUE: re-estimate the overall-noise covariance from the current
/// iterate and re-solve.
///
/// On failure the returned error carries the iterates computed so far.
pub fn iterative_blue(problem: &LinearProblem, config: &IterationConfig) -> Result<EstimateTrace> {
    let x0 = ls_estimate(&problem.h_hat, &problem.y)?;
    let x0_norm = x0.norm();
    let mut trace = EstimateTrace {
        estimates: vec![x0],
        stopped_early: false,
        iterations_run: 0,
    };

    for k in 0..config.n_iter {
        let step = problem
            .noise_covariance(trace.last())
            .and_then(|c_ww| {
                debug_assert!(c_ww.relative_asymmetry() <= crate::numerics::SYMMETRY_TOL);
                blue(&problem.h_hat, &c_ww, &problem.y)
            });
        let next = match step {
            Ok(x) => x,
            Err(source) => {
                return Err(Error::Iteration {
                    iteration: k + 1,
                    source: Box::new(source),
                    trace: Box::new(trace),
                })
            }
        };

        let diverged = !next.is_finite()
            || next.norm() > DIVERGENCE_GROWTH * x0_norm.max(f64::MIN_POSITIVE);
        let change = next.sub(trace.last())?.norm();
        let reference = trace.last().norm().max(1e-300);
        trace.estimates.push(next);
        trace.iterations_run = k + 1;
        if diverged {
            return Err(Error::Diverged { iteration: k + 1, trace: Box::new(trace) });
        }
        if config.stop_tol > 0.0 && change <= config.stop_tol * reference {
            trace.stopped_early = true;
            break;
        }
    }
    Ok(trace)
}

/// What an estimator may see besides the problem itself. Only the oracle
/// estimators look at it.
#[derive(Debug, Clone, Copy)]
pub struct Truth<'a> {
    pub h_true: &'a Matrix,
    pub x_true: &'a Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub x_hat: Vector,
    /// Present for iterative estimators.
    pub trace: Option<EstimateTrace>,
}

impl Estimate {
    fn single(x_hat: Vector) -> Self {
        Self { x_hat, trace: None }
    }
}

/// A named estimator that can be benchmarked by the simulation harness.
pub trait Estimator: Send + Sync {
    fn name(&self) -> &str;

    fn estimate(&self, problem: &LinearProblem, truth: &Truth<'_>, n_iter: usize) -> Result<Estimate>;
}

/// Least squares on `Ĥ`, ignoring all noise statistics.
#[derive(Debug, Clone, Copy, Default)]
pub struct LeastSquares;

impl Estimator for LeastSquares {
    fn name(&self) -> &str {
        "ls"
    }

    fn estimate(&self, problem: &LinearProblem, _: &Truth<'_>, _: usize) -> Result<Estimate> {
        ls_estimate(problem.h_hat(), problem.y()).map(Estimate::single)
    }
}

/// BLUE on `Ĥ` weighted by the measurement noise only.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoiseOnlyBlue;

impl Estimator for NoiseOnlyBlue {
    fn name(&self) -> &str {
        "blue_cnn"
    }

    fn estimate(&self, problem: &LinearProblem, _: &Truth<'_>, _: usize) -> Result<Estimate> {
        blue(problem.h_hat(), problem.c_nn(), problem.y()).map(Estimate::single)
    }
}

/// The iterative BLUE.
#[derive(Debug, Clone, Copy, Default)]
pub struct IterativeBlue {
    pub stop_tol: f64,
}

impl Estimator for IterativeBlue {
    fn name(&self) -> &str {
        "proposed"
    }

    fn estimate(&self, problem: &LinearProblem, _: &Truth<'_>, n_iter: usize) -> Result<Estimate> {
        let config = IterationConfig { n_iter, stop_tol: self.stop_tol };
        let trace = iterative_blue(problem, &config)?;
        Ok(Estimate { x_hat: trace.last().clone(), trace: Some(trace) })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectModelBlue;

impl Estimator for PerfectModelBlue {
    fn name(&self) -> &str {
        "blue_perfect_model"
    }

    fn estimate(&self, problem: &LinearProblem, truth: &Truth<'_>, _: usize) -> Result<Estimate> {
        oracle_blue_perfect_model(truth.h_true, problem.c_nn(), problem.y()).map(Estimate::single)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectCovarianceBlue;

impl Estimator for PerfectCovarianceBlue {
    fn name(&self) -> &str {
        "blue_perfect_cww"
    }

    fn estimate(&self, problem: &LinearProblem, truth: &Truth<'_>, _: usize) -> Result<Estimate> {
        let c_ww = problem.noise_covariance(truth.x_true)?;
        oracle_blue_perfect_cww(problem.h_hat(), &c_ww, problem.y()).map(Estimate::single)
    }
}

pub const BUILTIN_ESTIMATORS: [&str; 5] =
    ["ls", "proposed", "blue_cnn", "blue_perfect_model", "blue_perfect_cww"];

/// Looks up a built-in estimator by name.
pub fn builtin(name: &str) -> Option<Arc<dyn Estimator>> {
    let e: Arc<dyn Estimator> = match name {
        "ls" => Arc::new(LeastSquares),
        "proposed" => Arc::new(IterativeBlue::default()),
        "blue_cnn" => Arc::new(NoiseOnlyBlue),
        "blue_perfect_model" => Arc::new(PerfectModelBlue),
        "blue_perfect_cww" => Arc::new(PerfectCovarianceBlue),
        _ => return None,
    };
    Some(e)
}

/// An ordered set of uniquely named estimators.
#[derive(Clone, Default)]
pub struct EstimatorSet {
    members: Vec<Arc<dyn Estimator>>,
}

impl EstimatorSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut set = Self::new();
        for name in names {
            let name = name.as_ref();
            let e = builtin(name).ok_or_else(|| Error::UnknownEstimator(name.to_string()))?;
            set.register(e)?;
        }
        Ok(set)
    }

    /// Adds an estimator; names must be unique and CSV-safe.
    pub fn register(&mut self, estimator: Arc<dyn Estimator>) -> Result<()> {
        let name = estimator.name();
        if !is_valid_name(name) {
            return Err(Error::InvalidArgument(format!(
                "estimator name `{name}` must be non-empty [A-Za-z0-9_-]"
            )));
        }
        if self.members.iter().any(|e| e.name() == name) {
            return Err(Error::InvalidArgument(format!("estimator `{name}` registered twice")));
        }
        self.members.push(estimator);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn Estimator>> {
        self.members.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.members.iter().map(|e| e.name().to_string()).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl fmt::Debug for EstimatorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

pub(crate) fn is_valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}
