//! Average MSE per iteration at one noise level. Nearly all of the gain
//! shows up after the first reweighting.
//!
//! cargo run --release --example convergence -- [sigma_n_sq]

use iblue::sim::{convergence_curve, mse_sweep, RowKey, SweepConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1e-6);
    let cfg = SweepConfig {
        sigma_grid: vec![sigma],
        sigma_n_sq: sigma,
        trials: 2000,
        estimators: vec!["proposed".into(), "blue_perfect_cww".into()],
        ..Default::default()
    };
    let report = convergence_curve(&cfg)?;
    // the oracle has no iterations; same trials through the sweep
    let oracle = mse_sweep(&cfg)?.row("blue_perfect_cww", RowKey::Sigma(sigma)).unwrap().mse;

    println!("sigma^2 = {sigma:e}, perfect-C_ww MSE = {oracle:.4e}");
    for row in report.rows_for("proposed") {
        if let RowKey::Iteration(k) = row.key {
            println!("k = {k:>2}  mse = {:.4e}  +/- {:.1e}", row.mse, row.mc_stderr);
        }
    }
    Ok(())
}
