//! Plain-text experiment configuration.
//!
//! One `key = value` per line, `#` starts a comment. Vectors are bracketed
//! comma lists, matrices are nested lists or `diag(...)`, and the noise grid
//! may be given as `logspace(lo, hi, n)`. Missing keys take the default
//! experiment's values.
//!
//! ```text
//! # default experiment, fewer trials
//! trials = 2000
//! c_ee = diag(1e-4, 1e-5, 1e-6, 1e-6, 1e-6)
//! sigma_grid = logspace(1e-8, 1e-3, 11)
//! estimators = [ls, proposed, blue_perfect_cww]
//! ```

use std::collections::HashMap;

use thiserror::Error;

use crate::numerics::{Matrix, Vector};
use crate::sim::{logspace, ModelKind, SweepConfig};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}: `{key}`: {message}", line.map_or("config".to_string(), |l| format!("line {l}")))]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, key: &str, message: impl Into<String>) -> Self {
        Self { line: Some(line), key: key.to_string(), message: message.into() }
    }
}

const KEYS: [&str; 14] = [
    "model",
    "n_h",
    "n_x",
    "x_true",
    "h_mean",
    "c_hh",
    "c_ee",
    "sigma_grid",
    "sigma_n_sq",
    "trials",
    "n_iter",
    "stop_tol",
    "seed",
    "estimators",
];

/// Parses and validates a configuration, filling in defaults.
pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let mut entries: HashMap<&str, (usize, &str)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::at(line_no, line, "expected `key = value`"));
        };
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(ConfigError::at(line_no, key, "unknown key"));
        };
        if let Some((first, _)) = entries.insert(known, (line_no, value.trim())) {
            return Err(ConfigError::at(
                line_no,
                key,
                format!("duplicate key, first set on line {first}"),
            ));
        }
    }

    let mut cfg = SweepConfig::default();
    let get = |key: &str| entries.get(key).copied();

    if let Some((l, v)) = get("model") {
        cfg.scenario.model = match v {
            "convolution" => ModelKind::Convolution,
            "unstructured" => ModelKind::Unstructured,
            _ => return Err(ConfigError::at(l, "model", "expected `convolution` or `unstructured`")),
        };
    }
    if let Some((l, v)) = get("n_h") {
        cfg.scenario.n_h = parse_count(v).map_err(|m| ConfigError::at(l, "n_h", m))?;
    }
    if let Some((l, v)) = get("n_x") {
        cfg.scenario.n_x = parse_count(v).map_err(|m| ConfigError::at(l, "n_x", m))?;
    }
    let (n_h, n_x) = (cfg.scenario.n_h, cfg.scenario.n_x);
    if n_h == 0 || n_x == 0 {
        let key = if n_h == 0 { "n_h" } else { "n_x" };
        return Err(invariant(&entries, key, "must be positive"));
    }
    cfg.scenario.h_mean = Vector::zeros(n_h);
    cfg.scenario.c_hh = Matrix::identity(n_h);

    if let Some((l, v)) = get("x_true") {
        cfg.scenario.x_true = parse_vector(v).map_err(|m| ConfigError::at(l, "x_true", m))?;
    }
    if let Some((l, v)) = get("h_mean") {
        cfg.scenario.h_mean = parse_vector(v).map_err(|m| ConfigError::at(l, "h_mean", m))?;
    }
    if let Some((l, v)) = get("c_hh") {
        cfg.scenario.c_hh = parse_matrix(v).map_err(|m| ConfigError::at(l, "c_hh", m))?;
    }
    if let Some((l, v)) = get("c_ee") {
        cfg.scenario.c_ee = parse_matrix(v).map_err(|m| ConfigError::at(l, "c_ee", m))?;
    }
    if let Some((l, v)) = get("sigma_grid") {
        cfg.sigma_grid = parse_grid(v).map_err(|m| ConfigError::at(l, "sigma_grid", m))?;
    }
    if let Some((l, v)) = get("sigma_n_sq") {
        cfg.sigma_n_sq = parse_real(v).map_err(|m| ConfigError::at(l, "sigma_n_sq", m))?;
    }
    if let Some((l, v)) = get("trials") {
        cfg.trials = parse_count(v).map_err(|m| ConfigError::at(l, "trials", m))?;
    }
    if let Some((l, v)) = get("n_iter") {
        cfg.n_iter = parse_count(v).map_err(|m| ConfigError::at(l, "n_iter", m))?;
    }
    if let Some((l, v)) = get("stop_tol") {
        cfg.stop_tol = parse_real(v).map_err(|m| ConfigError::at(l, "stop_tol", m))?;
    }
    if let Some((l, v)) = get("seed") {
        cfg.scenario.seed = parse_seed(v).map_err(|m| ConfigError::at(l, "seed", m))?;
    }
    if let Some((l, v)) = get("estimators") {
        cfg.estimators = parse_names(v).map_err(|m| ConfigError::at(l, "estimators", m))?;
    }

    validate(&cfg, &entries)?;
    Ok(cfg)
}

fn invariant(entries: &HashMap<&str, (usize, &str)>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: entries.get(key).map(|(l, _)| *l),
        key: key.to_string(),
        message: message.into(),
    }
}

fn validate(cfg: &SweepConfig, entries: &HashMap<&str, (usize, &str)>) -> Result<(), ConfigError> {
    let s = &cfg.scenario;
    let check = |ok: bool, key: &str, msg: String| if ok { Ok(()) } else { Err(invariant(entries, key, msg)) };
    check(s.n_h >= 2, "n_h", format!("must be at least 2, got {}", s.n_h))?;
    check(
        s.x_true.len() == s.n_x,
        "x_true",
        format!("has {} entries but n_x = {}", s.x_true.len(), s.n_x),
    )?;
    check(
        s.h_mean.len() == s.n_h,
        "h_mean",
        format!("has {} entries but n_h = {}", s.h_mean.len(), s.n_h),
    )?;
    for (key, m) in [("c_hh", &s.c_hh), ("c_ee", &s.c_ee)] {
        check(
            m.shape() == (s.n_h, s.n_h),
            key,
            format!("is {}x{} but n_h = {}", m.rows(), m.cols(), s.n_h),
        )?;
        crate::numerics::check_psd(m).map_err(|e| invariant(entries, key, e.to_string()))?;
    }
    check(cfg.trials >= 1, "trials", "must be at least 1".into())?;
    check(
        cfg.sigma_grid.iter().all(|v| *v > 0.0),
        "sigma_grid",
        "entries must be positive".into(),
    )?;
    check(
        cfg.sigma_grid.windows(2).all(|w| w[0] < w[1]),
        "sigma_grid",
        "must be strictly increasing".into(),
    )?;
    check(cfg.sigma_n_sq > 0.0, "sigma_n_sq", "must be positive".into())?;
    check(cfg.stop_tol >= 0.0, "stop_tol", "must be non-negative".into())?;
    cfg.estimator_set().map_err(|e| invariant(entries, "estimators", e.to_string()))?;
    Ok(())
}

fn parse_real(v: &str) -> Result<f64, String> {
    let x: f64 = v.trim().parse().map_err(|_| format!("malformed number `{}`", v.trim()))?;
    if !x.is_finite() {
        return Err(format!("number `{}` is not finite", v.trim()));
    }
    Ok(x)
}

fn parse_count(v: &str) -> Result<usize, String> {
    let v = v.trim();
    if let Ok(n) = v.parse::<usize>() {
        return Ok(n);
    }
    // also accept integral reals such as `1e4`
    let x = parse_real(v)?;
    if x >= 0.0 && x.fract() == 0.0 && x <= usize::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(format!("expected a non-negative integer, got `{v}`"))
    }
}

fn parse_seed(v: &str) -> Result<u64, String> {
    let v = v.trim();
    let parsed = match v.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => v.parse(),
    };
    parsed.map_err(|_| format!("malformed seed `{v}`"))
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    let inner = v
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("expected a bracketed list, got `{}`", v.trim()))?;
    split_items(inner).into_iter().map(parse_real).collect()
}

fn split_items(inner: &str) -> Vec<&str> {
    if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    }
}

fn parse_vector(v: &str) -> Result<Vector, String> {
    Vector::new(parse_list(v)?).map_err(|e| e.to_string())
}

fn parse_call<'a>(v: &'a str, name: &str) -> Option<&'a str> {
    v.trim()
        .strip_prefix(name)
        .map(str::trim_start)
        .and_then(|s| s.strip_prefix('('))
        .and_then(|s| s.strip_suffix(')'))
}

fn parse_matrix(v: &str) -> Result<Matrix, String> {
    if let Some(args) = parse_call(v, "diag") {
        let d: Vec<f64> = split_items(args).into_iter().map(parse_real).collect::<Result<_, _>>()?;
        if d.is_empty() {
            return Err("diag() needs at least one entry".into());
        }
        return Ok(Matrix::from_diag(&d));
    }
    let inner = v
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("expected `diag(...)` or `[[...], ...]`, got `{}`", v.trim()))?;
    let mut rows = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let end = rest.find(']').ok_or("unterminated matrix row")?;
        rows.push(parse_list(&rest[..=end])?);
        rest = rest[end + 1..].trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Matrix::from_rows(&rows).map_err(|e| e.to_string())
}

fn parse_grid(v: &str) -> Result<Vec<f64>, String> {
    if let Some(args) = parse_call(v, "logspace") {
        let items = split_items(args);
        if items.len() != 3 {
            return Err("logspace takes (lo, hi, n)".into());
        }
        let lo = parse_real(items[0])?;
        let hi = parse_real(items[1])?;
        let n = parse_count(items[2])?;
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err("logspace needs 0 < lo < hi and n >= 2".into());
        }
        return Ok(logspace(lo, hi, n));
    }
    let grid = parse_list(v)?;
    if grid.is_empty() {
        return Err("grid must not be empty".into());
    }
    Ok(grid)
}

fn parse_names(v: &str) -> Result<Vec<String>, String> {
    let inner = v
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("expected a bracketed list, got `{}`", v.trim()))?;
    let names: Vec<String> = split_items(inner).into_iter().map(String::from).collect();
    if names.is_empty() {
        return Err("at least one estimator is required".into());
    }
    Ok(names)
}

fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| fmt_real(*x)).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_matrix(m: &Matrix) -> String {
    if m.is_diagonal() {
        let d: Vec<String> = m.diag().iter().map(|x| fmt_real(*x)).collect();
        return format!("diag({})", d.join(", "));
    }
    let rows: Vec<String> = (0..m.rows()).map(|i| fmt_list(m.row(i))).collect();
    format!("[{}]", rows.join(", "))
}

fn fmt_grid(grid: &[f64]) -> String {
    if grid.len() >= 2 {
        let (lo, hi) = (grid[0], grid[grid.len() - 1]);
        if logspace(lo, hi, grid.len()) == grid {
            return format!("logspace({}, {}, {})", fmt_real(lo), fmt_real(hi), grid.len());
        }
    }
    fmt_list(grid)
}

/// Effective configuration as canonical `(key, value)` pairs.
pub fn config_pairs(cfg: &SweepConfig) -> Vec<(String, String)> {
    let s = &cfg.scenario;
    let values = [
        s.model.as_str().to_string(),
        s.n_h.to_string(),
        s.n_x.to_string(),
        fmt_list(s.x_true.as_slice()),
        fmt_list(s.h_mean.as_slice()),
        fmt_matrix(&s.c_hh),
        fmt_matrix(&s.c_ee),
        fmt_grid(&cfg.sigma_grid),
        fmt_real(cfg.sigma_n_sq),
        cfg.trials.to_string(),
        cfg.n_iter.to_string(),
        fmt_real(cfg.stop_tol),
        s.seed.to_string(),
        format!("[{}]", cfg.estimators.join(", ")),
    ];
    KEYS.iter().zip(values).map(|(k, v)| (k.to_string(), v)).collect()
}

/// Canonical text form; `parse_config` of the output reproduces `cfg`.
pub fn to_config_text(cfg: &SweepConfig) -> String {
    config_pairs(cfg).iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default_experiment() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, SweepConfig::default());
        assert_eq!(cfg.scenario.x_true.as_slice(), &[1.0, 0.5, 0.25]);
        assert_eq!(cfg.scenario.c_ee.diag(), vec![1e-4, 1e-5, 1e-6, 1e-6, 1e-6]);
        assert_eq!(cfg.scenario.c_hh, Matrix::identity(5));
        assert_eq!(cfg.n_iter, 10);
        assert_eq!(cfg.sigma_grid.len(), 31);
        assert_eq!(cfg.sigma_grid[0], 1e-8);
        assert_eq!(cfg.sigma_grid[30], 1e-3);
    }

    #[test]
    fn zero_trials_rejected() {
        let err = parse_config("# comment\ntrials = 0\n").unwrap_err();
        assert_eq!(err.key, "trials");
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn errors_name_key_and_line() {
        let err = parse_config("trials = 10\nbogus = 1").unwrap_err();
        assert_eq!((err.key.as_str(), err.line), ("bogus", Some(2)));
        let err = parse_config("n_iter = ten").unwrap_err();
        assert_eq!((err.key.as_str(), err.line), ("n_iter", Some(1)));
        let err = parse_config("seed = 1\nseed = 2").unwrap_err();
        assert_eq!((err.key.as_str(), err.line), ("seed", Some(2)));
        let err = parse_config("sigma_grid = [1e-6, 1e-7]").unwrap_err();
        assert_eq!(err.key, "sigma_grid");
        let err = parse_config("c_ee = diag(1, -1, 1, 1, 1)").unwrap_err();
        assert_eq!(err.key, "c_ee");
        let err = parse_config("estimators = [ls, magic]").unwrap_err();
        assert_eq!(err.key, "estimators");
        let err = parse_config("n_h = 4").unwrap_err();
        assert_eq!((err.key.as_str(), err.line), ("c_ee", None));
        assert!(parse_config("just text").is_err());
    }

    #[test]
    fn literal_forms() {
        let text = "n_h = 2\nn_x = 2\nx_true = [1, -2]\nc_ee = [[1e-4, 1e-5], [1e-5, 2e-4]]\n\
                    c_hh = diag(2, 3)\nsigma_grid = [1e-6]\ntrials = 1e3\nseed = 0xff\n\
                    estimators = [proposed]\nmodel = unstructured";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.scenario.c_ee[(0, 1)], 1e-5);
        assert_eq!(cfg.scenario.c_hh, Matrix::from_diag(&[2.0, 3.0]));
        assert_eq!(cfg.trials, 1000);
        assert_eq!(cfg.scenario.seed, 255);
        assert_eq!(cfg.scenario.model, ModelKind::Unstructured);
        assert_eq!(cfg.scenario.h_mean, Vector::zeros(2));
    }

    #[test]
    fn canonical_text_round_trips() {
        let cfg = SweepConfig::default();
        let text = to_config_text(&cfg);
        assert!(text.contains("sigma_grid = logspace(1e-8, 0.001, 31)"));
        assert!(text.contains("c_ee = diag(0.0001, 1e-5, 1e-6, 1e-6, 1e-6)"));
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
