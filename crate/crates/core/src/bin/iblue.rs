use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use iblue::config::{config_pairs, parse_config, ConfigError};
use iblue::report::emit_report;
use iblue::sim::{self, MseReport, SweepConfig, MAX_DIVERGENCE_RATE};
use iblue::{iterative_blue, Error, IterationConfig};

const EXIT_PARSE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_DIVERGENCE: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "iblue", version, about = "Iterative BLUE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average MSE of each estimator over the noise-variance grid.
    Sweep(Common),
    /// Average MSE per iteration at a single noise variance.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Noise variance; defaults to `sigma_n_sq` from the config.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Print the iterates for one random scenario.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sigma: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Key-value experiment file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file, stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "n-iter")]
    n_iter: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Omit the timestamp line so identical runs produce identical bytes.
    #[arg(long)]
    deterministic: bool,
}

enum Failure {
    Parse(String),
    Numerical(Error),
    Divergence(String),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged { .. } => Failure::Divergence(e.to_string()),
            e => Failure::Numerical(e),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Parse(e.to_string())
    }
}

fn load_config(common: &Common) -> Result<SweepConfig, Failure> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Failure::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(s) = common.seed {
        cfg.scenario.seed = s;
    }
    if let Some(n) = common.n_iter {
        cfg.n_iter = n;
    }
    cfg.validate().map_err(|e| Failure::Parse(format!("after overrides: {e}")))?;
    Ok(cfg)
}

fn open_sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(io::BufWriter::new(fs::File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_parallel<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> iblue::Result<T> + Send,
) -> Result<T, Failure> {
    let result = match threads {
        Some(n) => sim::with_threads(n, f)?,
        None => f(),
    };
    Ok(result?)
}

fn write_report(common: &Common, report: &MseReport) -> Result<(), Failure> {
    let mut sink = open_sink(common.out.as_deref())?;
    if !common.deterministic {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        writeln!(sink, "# generated_unix_time = {now}")?;
    }
    emit_report(report, &mut sink)?;
    let rate = report.divergence_rate();
    if rate > MAX_DIVERGENCE_RATE {
        return Err(Failure::Divergence(format!(
            "{} divergent evaluations ({:.3}%) exceed the {:.1}% limit",
            report.total_divergent(),
            100.0 * rate,
            100.0 * MAX_DIVERGENCE_RATE
        )));
    }
    Ok(())
}

fn estimate(common: &Common, sigma: Option<f64>) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let sigma = sigma.unwrap_or(cfg.sigma_n_sq);
    let scenario = sim::gen_scenario(&cfg.scenario.at(sigma))?;
    let mut sink = open_sink(common.out.as_deref())?;
    for (k, v) in config_pairs(&cfg) {
        writeln!(sink, "# {k} = {v}")?;
    }
    writeln!(sink, "# sigma_n_sq_used = {sigma:e}")?;
    writeln!(sink, "x_true = {:?}", scenario.x_true)?;
    writeln!(sink, "h_true = {:?}", scenario.h_true)?;
    if let Some(h_hat) = &scenario.h_hat {
        writeln!(sink, "h_hat = {h_hat:?}")?;
    }
    let config = IterationConfig { n_iter: cfg.n_iter, stop_tol: cfg.stop_tol };
    let (trace, failure) = match iterative_blue(&scenario.problem, &config) {
        Ok(trace) => (trace, None),
        Err(e) => match e.trace().cloned() {
            Some(trace) => (trace, Some(e)),
            None => return Err(e.into()),
        },
    };
    writeln!(sink, "iteration,mse,estimate")?;
    for (k, x) in trace.estimates.iter().enumerate() {
        let mse = x
            .iter()
            .zip(scenario.x_true.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / x.len() as f64;
        let entries: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
        writeln!(sink, "{k},{mse:e},\"{}\"", entries.join(" "))?;
    }
    sink.flush()?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sweep(common) => {
            let cfg = load_config(&common)?;
            let report = run_parallel(common.threads, || sim::mse_sweep(&cfg))?;
            write_report(&common, &report)
        }
        Command::Converge { common, sigma } => {
            let mut cfg = load_config(&common)?;
            let sigma = sigma.unwrap_or(cfg.sigma_n_sq);
            if sigma <= 0.0 || !sigma.is_finite() {
                return Err(Failure::Parse(format!("--sigma must be positive, got {sigma}")));
            }
            cfg.sigma_grid = vec![sigma];
            cfg.sigma_n_sq = sigma;
            let report = run_parallel(common.threads, || sim::convergence_curve(&cfg))?;
            write_report(&common, &report)
        }
        Command::Estimate { common, sigma } => estimate(&common, sigma),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (code, msg) = match failure {
                Failure::Parse(m) => (EXIT_PARSE, format!("config error: {m}")),
                Failure::Numerical(e) => (EXIT_NUMERICAL, format!("numerical error: {e}")),
                Failure::Divergence(m) => (EXIT_DIVERGENCE, format!("divergence: {m}")),
                Failure::Io(e) => (EXIT_IO, format!("i/o error: {e}")),
            };
            eprintln!("iblue: {msg}");
            ExitCode::from(code)
        }
    }
}
