//! Parsing an experiment file, running it, and echoing the effective
//! configuration back as canonical text.
//!
//! cargo run --release --example config_file

use iblue::config::{parse_config, to_config_text};
use iblue::report::emit_report;
use iblue::sim::mse_sweep;

const EXPERIMENT: &str = "\
# unstructured variant of the default scenario, short run
model = unstructured
trials = 500
sigma_grid = logspace(1e-7, 1e-4, 4)
estimators = [ls, blue_cnn, proposed]
seed = 0xC0FFEE
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = parse_config(EXPERIMENT)?;
    print!("{}", to_config_text(&cfg));
    assert_eq!(parse_config(&to_config_text(&cfg))?, cfg);

    let report = mse_sweep(&cfg)?;
    println!();
    emit_report(&report, &mut std::io::stdout().lock())?;

    match parse_config("trials = 100\nn_iter = lots\n") {
        Err(e) => println!("\nrejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
