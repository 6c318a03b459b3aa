//! Seeded Monte Carlo campaigns over randomly drawn deconvolution scenarios.
//!
//! Each trial draws a true impulse response `h ~ N(h_mean, C_hh)`, an
//! estimation error `e ~ N(0, C_ee)` (so `ĥ = h - e`) and measurement noise
//! `n ~ N(0, σ² I)`, then evaluates every estimator on the same draw.
//! Trial seeds depend only on the master seed, the noise level and the trial
//! index, so results do not depend on thread count or on which other grid
//! points are part of the sweep.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{EstimatorSet, Truth};
use crate::numerics::{psd_factor, Matrix, Vector};
use crate::uncertainty::{conv_matrix, convolution_variances, UncertaintyModel};
use crate::LinearProblem;

/// Largest tolerated fraction of divergent trials in a campaign.
pub const MAX_DIVERGENCE_RATE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// `Ĥ` is the convolution matrix of `ĥ = h - e`.
    Convolution,
    /// `Ĥ = H - B` with independent entry errors whose variances tile
    /// `diag(C_ee)` along the convolution bands.
    Unstructured,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Convolution => "convolution",
            Self::Unstructured => "unstructured",
        }
    }
}

/// Everything about a scenario except the noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTemplate {
    pub model: ModelKind,
    pub n_h: usize,
    pub n_x: usize,
    pub x_true: Vector,
    pub h_mean: Vector,
    pub c_hh: Matrix,
    pub c_ee: Matrix,
    pub seed: u64,
}

impl Default for ScenarioTemplate {
    /// Length-5 impulse response drawn from `N(0, I)`, `x = [1, 0.5, 0.25]`
    /// and tap error variances `1e-4, 1e-5, 1e-6, 1e-6, 1e-6`.
    fn default() -> Self {
        Self {
            model: ModelKind::Convolution,
            n_h: 5,
            n_x: 3,
            x_true: Vector::from_vec_unchecked(vec![1.0, 0.5, 0.25]),
            h_mean: Vector::zeros(5),
            c_hh: Matrix::identity(5),
            c_ee: Matrix::from_diag(&[1e-4, 1e-5, 1e-6, 1e-6, 1e-6]),
            seed: 0x1B1E_5EED,
        }
    }
}

impl ScenarioTemplate {
    pub fn at(&self, sigma_n_sq: f64) -> ScenarioConfig {
        ScenarioConfig { template: self.clone(), sigma_n_sq }
    }

    pub fn n_y(&self) -> usize {
        self.n_h + self.n_x - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_h < 2 {
            return Err(Error::InvalidArgument(format!(
                "need n_x >= 1 and n_h >= 2, got n_x = {}, n_h = {}",
                self.n_x, self.n_h
            )));
        }
        if self.x_true.len() != self.n_x {
            return Err(Error::Dimension(format!(
                "x_true has {} entries, n_x = {}",
                self.x_true.len(),
                self.n_x
            )));
        }
        if self.h_mean.len() != self.n_h {
            return Err(Error::Dimension(format!(
                "h_mean has {} entries, n_h = {}",
                self.h_mean.len(),
                self.n_h
            )));
        }
        for (name, m) in [("c_hh", &self.c_hh), ("c_ee", &self.c_ee)] {
            if m.shape() != (self.n_h, self.n_h) {
                return Err(Error::Dimension(format!(
                    "{name} is {:?}, expected {}x{}",
                    m.shape(),
                    self.n_h,
                    self.n_h
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub template: ScenarioTemplate,
    pub sigma_n_sq: f64,
}

/// One random draw of the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub h_true: Vector,
    /// The estimated impulse response; `None` for unstructured scenarios.
    pub h_hat: Option<Vector>,
    pub h_true_matrix: Matrix,
    pub h_hat_matrix: Matrix,
    pub problem: LinearProblem,
    pub x_true: Vector,
}

/// Pre-factored sampling distributions of a template.
#[derive(Debug, Clone)]
pub struct ScenarioSampler {
    template: ScenarioTemplate,
    hh_factor: Matrix,
    ee_factor: Matrix,
    entry_std: Matrix,
    model: UncertaintyModel,
}

impl ScenarioSampler {
    pub fn new(template: &ScenarioTemplate) -> Result<Self> {
        template.validate()?;
        let hh_factor = psd_factor(&template.c_hh)?;
        let ee_factor = psd_factor(&template.c_ee)?;
        let variances = convolution_variances(&template.c_ee, template.n_x);
        let entry_std = Matrix::from_fn(variances.rows(), variances.cols(), |i, j| {
            variances[(i, j)].max(0.0).sqrt()
        });
        let model = match template.model {
            ModelKind::Convolution => {
                UncertaintyModel::convolution(template.c_ee.clone(), template.n_x)?
            }
            ModelKind::Unstructured => UncertaintyModel::unstructured(variances)?,
        };
        Ok(Self { template: template.clone(), hh_factor, ee_factor, entry_std, model })
    }

    pub fn template(&self) -> &ScenarioTemplate {
        &self.template
    }

    /// Draws a scenario; identical `(sigma_n_sq, seed)` give identical output.
    pub fn sample(&self, sigma_n_sq: f64, seed: u64) -> Result<Scenario> {
        if sigma_n_sq < 0.0 || !sigma_n_sq.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be finite and non-negative, got {sigma_n_sq}"
            )));
        }
        let t = &self.template;
        let n_y = t.n_y();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let z_h = standard_normals(&mut rng, t.n_h);
        let h_true = add(&t.h_mean, &mul_factor(&self.hh_factor, &z_h));
        let h_true_matrix = conv_matrix(&h_true, t.n_x)?;

        let (h_hat, h_hat_matrix) = match t.model {
            ModelKind::Convolution => {
                let z_e = standard_normals(&mut rng, t.n_h);
                let e = mul_factor(&self.ee_factor, &z_e);
                let h_hat = h_true.sub(&e)?;
                let m = conv_matrix(&h_hat, t.n_x)?;
                (Some(h_hat), m)
            }
            ModelKind::Unstructured => {
                let z_b = standard_normals(&mut rng, n_y * t.n_x);
                let b = Matrix::from_fn(n_y, t.n_x, |i, j| {
                    self.entry_std[(i, j)] * z_b[i * t.n_x + j]
                });
                (None, h_true_matrix.sub(&b)?)
            }
        };

        let sigma = sigma_n_sq.sqrt();
        let z_n = standard_normals(&mut rng, n_y);
        let clean = h_true_matrix.mul_vec(&t.x_true)?;
        let y = Vector::new(clean.iter().zip(&z_n).map(|(c, z)| c + sigma * z).collect())?;

        let problem = LinearProblem::new(
            y,
            h_hat_matrix.clone(),
            Matrix::identity(n_y).scale(sigma_n_sq),
            self.model.clone(),
        )?;
        Ok(Scenario {
            h_true,
            h_hat,
            h_true_matrix,
            h_hat_matrix,
            problem,
            x_true: t.x_true.clone(),
        })
    }
}

fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn mul_factor(f: &Matrix, z: &[f64]) -> Vector {
    Vector::from_vec_unchecked(
        (0..f.rows()).map(|i| f.row(i).iter().zip(z).map(|(a, b)| a * b).sum()).collect(),
    )
}

fn add(a: &Vector, b: &Vector) -> Vector {
    Vector::from_vec_unchecked(a.iter().zip(b.iter()).map(|(x, y)| x + y).collect())
}

/// Draws one scenario from a fully specified configuration.
pub fn gen_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    ScenarioSampler::new(&cfg.template)?.sample(cfg.sigma_n_sq, cfg.template.seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at noise level `sigma_n_sq`.
pub fn trial_seed(master: u64, sigma_n_sq: f64, trial: u64) -> u64 {
    master ^ splitmix64(sigma_n_sq.to_bits() ^ splitmix64(trial))
}

/// Result of one estimator on one trial.
#[derive(Debug, Clone)]
pub enum Outcome {
    Ok {
        /// `|x̂ - x|²` per component.
        sq_err: Vec<f64>,
        /// Per-iterate squared errors for estimators that produce a trace.
        trace_sq_err: Option<Vec<Vec<f64>>>,
    },
    /// Divergence or a solver failure; the trial is excluded for this
    /// estimator only.
    Failed(Error),
}

impl Outcome {
    pub fn sq_err(&self) -> Option<&[f64]> {
        match self {
            Outcome::Ok { sq_err, .. } => Some(sq_err),
            Outcome::Failed(_) => None,
        }
    }

    pub fn mse(&self) -> Option<f64> {
        self.sq_err().map(|e| e.iter().sum::<f64>() / e.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    /// `(estimator name, outcome)` in estimator-set order.
    pub outcomes: Vec<(String, Outcome)>,
}

impl TrialResult {
    pub fn get(&self, name: &str) -> Option<&Outcome> {
        self.outcomes.iter().find(|(n, _)| n == name).map(|(_, o)| o)
    }
}

fn sq_err(x_hat: &Vector, x_true: &Vector) -> Vec<f64> {
    x_hat.iter().zip(x_true.iter()).map(|(a, b)| (a - b) * (a - b)).collect()
}

/// Evaluates every estimator on the same scenario.
pub fn run_trial(s: &Scenario, estimators: &EstimatorSet, n_iter: usize) -> TrialResult {
    let truth = Truth { h_true: &s.h_true_matrix, x_true: &s.x_true };
    let outcomes = estimators
        .iter()
        .map(|e| {
            let outcome = match e.estimate(&s.problem, &truth, n_iter) {
                Ok(est) => Outcome::Ok {
                    sq_err: sq_err(&est.x_hat, &s.x_true),
                    trace_sq_err: est.trace.map(|t| {
                        t.estimates.iter().map(|x| sq_err(x, &s.x_true)).collect()
                    }),
                },
                Err(err) => Outcome::Failed(err),
            };
            (e.name().to_string(), outcome)
        })
        .collect();
    TrialResult { outcomes }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub scenario: ScenarioTemplate,
    pub sigma_grid: Vec<f64>,
    pub trials: usize,
    pub n_iter: usize,
    pub stop_tol: f64,
    pub estimators: Vec<String>,
    /// Noise level used by single-scenario runs and convergence curves
    /// when no other level is given.
    pub sigma_n_sq: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioTemplate::default(),
            sigma_grid: logspace(1e-8, 1e-3, 31),
            trials: 10_000,
            n_iter: 10,
            stop_tol: 0.0,
            estimators: ["ls", "proposed", "blue_perfect_model", "blue_perfect_cww"]
                .map(String::from)
                .to_vec(),
            sigma_n_sq: 1e-6,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.validate_run()?;
        self.estimator_set().map(drop)
    }

    /// Everything but the estimator names.
    fn validate_run(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.sigma_grid.iter().any(|s| *s <= 0.0 || !s.is_finite()) {
            return Err(Error::InvalidArgument("sigma_grid entries must be positive".into()));
        }
        if self.sigma_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("sigma_grid must be strictly increasing".into()));
        }
        if self.stop_tol < 0.0 || !self.stop_tol.is_finite() {
            return Err(Error::InvalidArgument("stop_tol must be non-negative".into()));
        }
        if self.sigma_n_sq <= 0.0 || !self.sigma_n_sq.is_finite() {
            return Err(Error::InvalidArgument("sigma_n_sq must be positive".into()));
        }
        Ok(())
    }

    /// The configured estimators, with the iterative one using `stop_tol`.
    pub fn estimator_set(&self) -> Result<EstimatorSet> {
        let mut set = EstimatorSet::new();
        for name in &self.estimators {
            if name == "proposed" {
                set.register(std::sync::Arc::new(crate::estimators::IterativeBlue {
                    stop_tol: self.stop_tol,
                }))?;
            } else {
                let e = crate::estimators::builtin(name)
                    .ok_or_else(|| Error::UnknownEstimator(name.clone()))?;
                set.register(e)?;
            }
        }
        if set.is_empty() {
            return Err(Error::InvalidArgument("at least one estimator is required".into()));
        }
        Ok(set)
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive; integer decades are
/// hit exactly.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| {
            let e = if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
            let rounded = e.round();
            if (e - rounded).abs() < 1e-12 {
                10f64.powi(rounded as i32)
            } else {
                10f64.powf(e)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowKey {
    Sigma(f64),
    Iteration(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Sweep,
    Convergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub estimator: String,
    pub key: RowKey,
    /// Mean over non-divergent trials of the component-averaged squared error.
    pub mse: f64,
    /// Sample standard deviation of per-trial MSE over `sqrt(n)`.
    pub mc_stderr: f64,
    pub trials: usize,
    pub divergent: usize,
    /// Per-component mean squared error.
    pub component_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    pub kind: ReportKind,
    pub rows: Vec<MseRow>,
    pub seed: u64,
    pub trials: usize,
    /// Effective configuration as `(key, value)` pairs.
    pub metadata: Vec<(String, String)>,
}

impl MseReport {
    pub fn row(&self, estimator: &str, key: RowKey) -> Option<&MseRow> {
        self.rows.iter().find(|r| {
            r.estimator == estimator
                && match (r.key, key) {
                    (RowKey::Sigma(a), RowKey::Sigma(b)) => (a - b).abs() <= 1e-12 * b.abs(),
                    (a, b) => a == b,
                }
        })
    }

    pub fn rows_for<'a>(&'a self, estimator: &'a str) -> impl Iterator<Item = &'a MseRow> + 'a {
        self.rows.iter().filter(move |r| r.estimator == estimator)
    }

    pub fn total_divergent(&self) -> usize {
        self.rows.iter().map(|r| r.divergent).sum()
    }

    /// Divergent evaluations over all evaluations in the report.
    pub fn divergence_rate(&self) -> f64 {
        let total: usize = self.rows.iter().map(|r| r.trials).sum();
        if total == 0 {
            0.0
        } else {
            self.total_divergent() as f64 / total as f64
        }
    }
}

/// Running mean and variance of per-trial MSE, accumulated in trial order.
#[derive(Debug, Clone)]
struct Accumulator {
    n: usize,
    divergent: usize,
    mean: f64,
    m2: f64,
    component_sum: Vec<f64>,
}

impl Accumulator {
    fn new(n_x: usize) -> Self {
        Self { n: 0, divergent: 0, mean: 0.0, m2: 0.0, component_sum: vec![0.0; n_x] }
    }

    fn push(&mut self, sq_err: Option<&[f64]>) {
        let Some(sq_err) = sq_err else {
            self.divergent += 1;
            return;
        };
        let value = sq_err.iter().sum::<f64>() / sq_err.len() as f64;
        self.n += 1;
        let delta = value - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (value - self.mean);
        for (s, e) in self.component_sum.iter_mut().zip(sq_err) {
            *s += e;
        }
    }

    fn finish(self, estimator: &str, key: RowKey) -> MseRow {
        let n = self.n;
        let mc_stderr = if n > 1 {
            (self.m2 / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        MseRow {
            estimator: estimator.to_string(),
            key,
            mse: if n > 0 { self.mean } else { f64::NAN },
            mc_stderr,
            trials: n + self.divergent,
            divergent: self.divergent,
            component_mse: self
                .component_sum
                .iter()
                .map(|s| if n > 0 { s / n as f64 } else { f64::NAN })
                .collect(),
        }
    }
}

fn run_cell(
    sampler: &ScenarioSampler,
    estimators: &EstimatorSet,
    cfg: &SweepConfig,
    sigma_n_sq: f64,
) -> Result<Vec<TrialResult>> {
    let seed = cfg.scenario.seed;
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = sampler.sample(sigma_n_sq, trial_seed(seed, sigma_n_sq, t))?;
            Ok(run_trial(&s, estimators, cfg.n_iter))
        })
        .collect()
}

/// Average MSE of every estimator at every noise level of the grid.
pub fn mse_sweep(cfg: &SweepConfig) -> Result<MseReport> {
    cfg.validate()?;
    mse_sweep_with(cfg, &cfg.estimator_set()?)
}

/// Like [`mse_sweep`] but with an explicit estimator set, which may hold
/// user-defined estimators. `cfg.estimators` is ignored.
pub fn mse_sweep_with(cfg: &SweepConfig, estimators: &EstimatorSet) -> Result<MseReport> {
    let cfg = &with_names(cfg, estimators)?;
    let sampler = ScenarioSampler::new(&cfg.scenario)?;
    let names = estimators.names();
    let mut rows = Vec::new();
    let mut cells = Vec::with_capacity(cfg.sigma_grid.len());
    for &sigma in &cfg.sigma_grid {
        cells.push((sigma, run_cell(&sampler, estimators, cfg, sigma)?));
    }
    for name in &names {
        for (sigma, trials) in &cells {
            let mut acc = Accumulator::new(cfg.scenario.n_x);
            for trial in trials {
                acc.push(trial.get(name).and_then(Outcome::sq_err));
            }
            rows.push(acc.finish(name, RowKey::Sigma(*sigma)));
        }
    }
    Ok(MseReport {
        kind: ReportKind::Sweep,
        rows,
        seed: cfg.scenario.seed,
        trials: cfg.trials,
        metadata: crate::config::config_pairs(cfg),
    })
}

/// Per-iteration average MSE of every trace-producing estimator at the
/// single noise level in `cfg.sigma_grid`. Iteration 0 is the LS start.
pub fn convergence_curve(cfg: &SweepConfig) -> Result<MseReport> {
    cfg.validate()?;
    convergence_curve_with(cfg, &cfg.estimator_set()?)
}

/// Like [`convergence_curve`] with an explicit estimator set.
pub fn convergence_curve_with(cfg: &SweepConfig, estimators: &EstimatorSet) -> Result<MseReport> {
    if cfg.sigma_grid.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "convergence curves need exactly one noise level, got {}",
            cfg.sigma_grid.len()
        )));
    }
    let cfg = &with_names(cfg, estimators)?;
    let sigma = cfg.sigma_grid[0];
    let sampler = ScenarioSampler::new(&cfg.scenario)?;
    let trials = run_cell(&sampler, estimators, cfg, sigma)?;

    let mut rows = Vec::new();
    for name in estimators.names() {
        let has_trace = trials.iter().any(|t| {
            matches!(t.get(&name), Some(Outcome::Ok { trace_sq_err: Some(_), .. }))
        });
        if !has_trace {
            continue;
        }
        let mut accs = vec![Accumulator::new(cfg.scenario.n_x); cfg.n_iter + 1];
        for trial in &trials {
            match trial.get(&name) {
                Some(Outcome::Ok { trace_sq_err: Some(trace), .. }) => {
                    // An early-stopped trace holds its last iterate.
                    for (k, acc) in accs.iter_mut().enumerate() {
                        let step = trace.get(k).or(trace.last()).map(Vec::as_slice);
                        acc.push(step);
                    }
                }
                _ => accs.iter_mut().for_each(|a| a.push(None)),
            }
        }
        rows.extend(
            accs.into_iter()
                .enumerate()
                .map(|(k, acc)| acc.finish(&name, RowKey::Iteration(k))),
        );
    }
    Ok(MseReport {
        kind: ReportKind::Convergence,
        rows,
        seed: cfg.scenario.seed,
        trials: cfg.trials,
        metadata: crate::config::config_pairs(cfg),
    })
}

/// Copy of `cfg` whose estimator list matches `set`, so report metadata
/// names what actually ran.
fn with_names(cfg: &SweepConfig, set: &EstimatorSet) -> Result<SweepConfig> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("estimator set is empty".into()));
    }
    let mut cfg = cfg.clone();
    cfg.estimators = set.names();
    cfg.validate_run()?;
    Ok(cfg)
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
