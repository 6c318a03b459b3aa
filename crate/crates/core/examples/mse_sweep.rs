//! MSE against noise variance for each estimator, written as CSV.
//!
//! cargo run --release --example mse_sweep -- [trials] > sweep.csv

use std::io;

use iblue::report::emit_report;
use iblue::sim::{logspace, mse_sweep, SweepConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let cfg = SweepConfig { trials, sigma_grid: logspace(1e-8, 1e-3, 11), ..Default::default() };
    let report = mse_sweep(&cfg)?;

    eprintln!("{:>10} {:>11} {:>11} {:>11}", "sigma^2", "LS", "proposed", "perfect C_ww");
    for &s in &cfg.sigma_grid {
        let mse = |name| report.row(name, iblue::sim::RowKey::Sigma(s)).map_or(f64::NAN, |r| r.mse);
        eprintln!(
            "{s:>10.1e} {:>11.3e} {:>11.3e} {:>11.3e}",
            mse("ls"),
            mse("proposed"),
            mse("blue_perfect_cww")
        );
    }
    emit_report(&report, &mut io::stdout().lock())?;
    Ok(())
}
