//! CSV output of MSE reports.

use std::io::{self, Write};

use crate::sim::{MseReport, ReportKind, RowKey};

pub const CSV_HEADER: &str = "estimator,sigma_n_sq_or_iter,mse,mc_stderr,trials,divergent";

/// Writes a `# key = value` comment block followed by the CSV table.
///
/// Reals are written in shortest round-trip scientific notation, so parsing
/// the table back yields the in-memory values exactly.
pub fn emit_report<W: Write>(report: &MseReport, sink: &mut W) -> io::Result<()> {
    let kind = match report.kind {
        ReportKind::Sweep => "sweep",
        ReportKind::Convergence => "convergence",
    };
    writeln!(sink, "# report = {kind}")?;
    for (key, value) in &report.metadata {
        writeln!(sink, "# {key} = {value}")?;
    }
    writeln!(sink, "{CSV_HEADER}")?;
    for row in &report.rows {
        let key = match row.key {
            RowKey::Sigma(s) => format!("{s:e}"),
            RowKey::Iteration(k) => k.to_string(),
        };
        writeln!(
            sink,
            "{},{},{:e},{:e},{},{}",
            row.estimator, key, row.mse, row.mc_stderr, row.trials, row.divergent
        )?;
    }
    sink.flush()
}
