//! Plugging a user-defined estimator into the Monte Carlo harness.
//!
//! cargo run --release --example custom_estimator

use std::sync::Arc;

use iblue::sim::{mse_sweep_with, RowKey, SweepConfig};
use iblue::{blue, ls_estimate, Estimate, Estimator, EstimatorSet, LinearProblem, Truth};

/// One reweighting step from LS, nothing more.
struct OneStep;

impl Estimator for OneStep {
    fn name(&self) -> &str {
        "one_step"
    }

    fn estimate(&self, problem: &LinearProblem, _: &Truth<'_>, _: usize) -> iblue::Result<Estimate> {
        let x0 = ls_estimate(problem.h_hat(), problem.y())?;
        let c_ww = problem.noise_covariance(&x0)?;
        let x_hat = blue(problem.h_hat(), &c_ww, problem.y())?;
        Ok(Estimate { x_hat, trace: None })
    }
}

fn main() -> iblue::Result<()> {
    let cfg = SweepConfig { trials: 1000, sigma_grid: vec![1e-8, 1e-6, 1e-4], ..Default::default() };
    let mut set = EstimatorSet::from_names(&["ls", "proposed", "blue_perfect_cww"])?;
    set.register(Arc::new(OneStep))?;

    let report = mse_sweep_with(&cfg, &set)?;
    println!("{:>8} {}", "sigma^2", set.names().iter().map(|n| format!("{n:>17}")).collect::<String>());
    for &s in &cfg.sigma_grid {
        let cells: String = set
            .names()
            .iter()
            .map(|n| format!("{:>17.3e}", report.row(n, RowKey::Sigma(s)).unwrap().mse))
            .collect();
        println!("{s:>8.0e} {cells}");
    }
    Ok(())
}
