//! Command-line front end: `simulate`, `analytic`, `estimate-m`,
//! `busy-sample` and `compare`.
//!
//! Settings come from an optional `key=value` file (`--config`) overridden by
//! flags. Output goes to `--out` or stdout; diagnostics go to stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytics::bessel::DEFAULT_SWITCH_POINT;
use crate::analytics::{AnalyticError, AnalyticLaw, LimitingLaw, DEFAULT_QUAD_TOL, DEFAULT_SERIES_TOL};
use crate::model::{CustomerOutcome, Parameters, SamplePath};
use crate::sim::{self, SimError, SimOptions};
use crate::stats::EcdfView;
use crate::tau::{self, CiMethod, EstimateOptions, ReturnLawEstimate, TauError, DEFAULT_CONFIDENCE};
use crate::util::{fmt_g17, parse_extended_f64};

pub const OUTCOMES_HEADER: &str = "index,arrival_time,wait,service_start,served_rank";
pub const ANALYTIC_HEADER: &str = "x,F_T,f_rho";
pub const BUSY_HEADER: &str = "index,duration,tau3";
pub const ESTIMATE_HEADER: &str = "m_hat,ci_low,ci_high,confidence,replications,std_dev";
pub const COMPARE_HEADER: &str = "m_hat,ci_low,ci_high,ks,n,pass";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_COMPARE_FAILED: i32 = 3;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_CUSTOMERS: u64 = 110_000;
pub const DEFAULT_REPLICATIONS: u64 = 10_000;
pub const DEFAULT_GRID_POINTS: usize = 101;
pub const DEFAULT_BUSY_CEILING: u64 = 1_000_000;
/// Served-wait samples below which `compare` cannot pass.
pub const MIN_COMPARE_SAMPLES: usize = 10_000;
pub const KS_THRESHOLD: f64 = 0.02;
pub const ZERO_WAIT_SIGMAS: f64 = 4.0;

/// Offsets the seed used for estimating `M` so that it does not reuse the
/// streams of the simulated path.
const ESTIMATE_SEED_MASK: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Params(p) => invalid(p.to_string()),
            SimError::NoCustomers => invalid(e.to_string()),
            other => runtime(other),
        }
    }
}

impl From<TauError> for CliError {
    fn from(e: TauError) -> Self {
        match e {
            TauError::Params(_)
            | TauError::InfiniteDeadline
            | TauError::NotPositiveRecurrent { .. }
            | TauError::TooFewReplications { .. }
            | TauError::BadConfidence(_) => invalid(e.to_string()),
            other => runtime(other),
        }
    }
}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::SeriesBudget { .. } | AnalyticError::Quadrature(_) => runtime(e),
            other => invalid(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "rql", version, about = "LIFO M/M/1 queue with deadline impatience")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path and write the per-customer outcomes.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Include the queue-length trace (JSON only).
        #[arg(long)]
        trace: bool,
    },
    /// Tabulate the limiting waiting-time law and the busy-period density.
    Analytic {
        #[command(flatten)]
        common: CommonArgs,
        /// Mean regeneration time; estimated from `reps` replications if absent.
        #[arg(long, allow_hyphen_values = true)]
        m: Option<String>,
        /// Comma-separated evaluation points.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Number of evenly spaced points on [0, T] when no grid is given.
        #[arg(long)]
        points: Option<String>,
    },
    /// Estimate the mean regeneration time by Monte Carlo.
    EstimateM {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        confidence: Option<String>,
        /// Use a median-of-means interval with this many groups.
        #[arg(long)]
        mom_groups: Option<String>,
    },
    /// Sample busy periods of the queue without impatience.
    BusySample {
        #[command(flatten)]
        common: CommonArgs,
        /// Services after which a busy period is reported as infinite.
        #[arg(long)]
        ceiling: Option<String>,
    },
    /// Simulate, estimate M and compare served waits with the limiting law.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// File of key=value settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,
    /// Patience deadline T; `inf` for none.
    #[arg(long, allow_hyphen_values = true)]
    pub deadline: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub seed: Option<String>,
    /// Number of customers (busy periods for `busy-sample`).
    #[arg(long, allow_hyphen_values = true)]
    pub n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub burn_in: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub reps: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, allow_hyphen_values = true)]
    pub series_tol: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub quad_tol: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub switch_point: Option<String>,
}

/// Keys accepted in a config file.
const KNOWN_KEYS: &[&str] = &[
    "lambda",
    "mu",
    "deadline",
    "seed",
    "n",
    "burn_in",
    "reps",
    "out",
    "format",
    "series_tol",
    "quad_tol",
    "switch_point",
    "m",
    "grid",
    "points",
    "trace",
    "confidence",
    "mom_groups",
    "ceiling",
];

/// Parses a flat `key=value` file. Blank lines and lines starting with `#` are
/// skipped; `-` in keys reads as `_`.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().replace('-', "_");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(invalid(format!("config line {}: unknown key '{key}'", lineno + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub series_tol: f64,
    pub quad_tol: f64,
    pub switch_point: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            series_tol: DEFAULT_SERIES_TOL,
            quad_tol: DEFAULT_QUAD_TOL,
            switch_point: DEFAULT_SWITCH_POINT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Parameters,
    pub seed: u64,
    pub n_customers: u64,
    /// Served ranks (or customers, for zero-wait counts) skipped at the start.
    pub burn_in: u64,
    pub replications: u64,
    pub tolerances: Tolerances,
    pub output_path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Merged settings: config file first, flags on top.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(common: &CommonArgs) -> Result<Self, CliError> {
        let mut values = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| runtime(format!("cannot read config {}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        let flags = [
            ("lambda", &common.lambda),
            ("mu", &common.mu),
            ("deadline", &common.deadline),
            ("seed", &common.seed),
            ("n", &common.n),
            ("burn_in", &common.burn_in),
            ("reps", &common.reps),
            ("series_tol", &common.series_tol),
            ("quad_tol", &common.quad_tol),
            ("switch_point", &common.switch_point),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                values.insert(key.to_string(), v.clone());
            }
        }
        if let Some(out) = &common.out {
            values.insert("out".into(), out.to_string_lossy().into_owned());
        }
        if let Some(format) = common.format {
            let name = match format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            values.insert("format".into(), name.into());
        }
        Ok(Self { values })
    }

    pub fn set(&mut self, key: &str, value: Option<&String>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn float(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|s| parse_extended_f64(s).ok_or_else(|| invalid(format!("{key}: cannot parse '{s}' as a number"))))
            .transpose()
    }

    pub fn count(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.get(key)
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|_| invalid(format!("{key}: expected a non-negative integer, got '{s}'")))
            })
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(s) => Err(invalid(format!("{key}: expected true or false, got '{s}'"))),
        }
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let require = |key: &str| -> Result<f64, CliError> {
            self.float(key)?.ok_or_else(|| invalid(format!("{key} is required")))
        };
        let params = Parameters::new(require("lambda")?, require("mu")?, require("deadline")?)
            .map_err(|e| invalid(e.to_string()))?;
        let n_customers = self.count("n")?.unwrap_or(DEFAULT_CUSTOMERS);
        if n_customers == 0 {
            return Err(invalid("n must be positive"));
        }
        let burn_in = match self.count("burn_in")? {
            Some(b) if b >= n_customers => {
                return Err(invalid(format!("burn_in ({b}) must be smaller than n ({n_customers})")))
            }
            Some(b) => b,
            None => (n_customers / 10).min(sim::DEFAULT_BURN_IN as u64),
        };
        let replications = self.count("reps")?.unwrap_or(DEFAULT_REPLICATIONS);
        if replications == 0 {
            return Err(invalid("reps must be positive"));
        }
        let defaults = Tolerances::default();
        let tolerances = Tolerances {
            series_tol: self.float("series_tol")?.unwrap_or(defaults.series_tol),
            quad_tol: self.float("quad_tol")?.unwrap_or(defaults.quad_tol),
            switch_point: self.float("switch_point")?.unwrap_or(defaults.switch_point),
        };
        let format = match self.get("format") {
            None => None,
            Some("csv") => Some(Format::Csv),
            Some("json") => Some(Format::Json),
            Some(other) => return Err(invalid(format!("format: expected csv or json, got '{other}'"))),
        };
        Ok(RunConfig {
            params,
            seed: self.count("seed")?.unwrap_or(DEFAULT_SEED),
            n_customers,
            burn_in,
            replications,
            tolerances,
            output_path: self.get("out").map(PathBuf::from),
            format,
        })
    }
}

impl RunConfig {
    pub fn analytic_law(&self) -> Result<AnalyticLaw, CliError> {
        let t = self.tolerances;
        Ok(AnalyticLaw::with_tolerances(
            self.params,
            t.series_tol,
            t.quad_tol,
            t.switch_point,
        )?)
    }

    fn estimate_seed(&self) -> u64 {
        self.seed ^ ESTIMATE_SEED_MASK
    }

    fn estimate(&self, method: CiMethod, confidence: f64) -> Result<ReturnLawEstimate, CliError> {
        let options = EstimateOptions {
            confidence,
            method,
            max_services: None,
        };
        Ok(tau::estimate_m(
            &self.params,
            self.replications,
            self.estimate_seed(),
            &options,
        )?)
    }
}

fn write_output(path: Option<&Path>, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| runtime(format!("cannot write to stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(runtime)?;
    s.push('\n');
    Ok(s)
}

fn opt_field(x: Option<f64>) -> String {
    x.map(fmt_g17).unwrap_or_default()
}

pub fn outcomes_csv(outcomes: &[CustomerOutcome]) -> String {
    let mut s = String::with_capacity(64 * (outcomes.len() + 1));
    s.push_str(OUTCOMES_HEADER);
    s.push('\n');
    for o in outcomes {
        let rank = o.served_rank.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            o.index,
            fmt_g17(o.arrival_time),
            fmt_g17(o.wait),
            opt_field(o.service_start),
            rank
        );
    }
    s
}

fn check_header(lines: &mut std::str::Lines<'_>, header: &str) -> Result<(), String> {
    match lines.next() {
        Some(h) if h == header => Ok(()),
        Some(h) => Err(format!("unexpected header '{h}'")),
        None => Err("empty table".into()),
    }
}

fn field_f64(s: &str, line: usize) -> Result<f64, String> {
    parse_extended_f64(s).ok_or_else(|| format!("line {line}: bad number '{s}'"))
}

/// Inverse of [`outcomes_csv`].
pub fn parse_outcomes_csv(text: &str) -> Result<Vec<CustomerOutcome>, String> {
    let mut lines = text.lines();
    check_header(&mut lines, OUTCOMES_HEADER)?;
    lines
        .enumerate()
        .map(|(i, line)| {
            let no = i + 2;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(format!("line {no}: expected 5 fields"));
            }
            Ok(CustomerOutcome {
                index: f[0].parse().map_err(|_| format!("line {no}: bad index"))?,
                arrival_time: field_f64(f[1], no)?,
                wait: field_f64(f[2], no)?,
                service_start: if f[3].is_empty() {
                    None
                } else {
                    Some(field_f64(f[3], no)?)
                },
                served_rank: if f[4].is_empty() {
                    None
                } else {
                    Some(f[4].parse().map_err(|_| format!("line {no}: bad served_rank"))?)
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticRow {
    pub x: f64,
    #[serde(rename = "F_T")]
    pub f_t: f64,
    pub f_rho: f64,
}

pub fn analytic_csv(rows: &[AnalyticRow]) -> String {
    let mut s = String::from(ANALYTIC_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{}", fmt_g17(r.x), fmt_g17(r.f_t), fmt_g17(r.f_rho));
    }
    s
}

/// Inverse of [`analytic_csv`].
pub fn parse_analytic_csv(text: &str) -> Result<Vec<AnalyticRow>, String> {
    let mut lines = text.lines();
    check_header(&mut lines, ANALYTIC_HEADER)?;
    lines
        .enumerate()
        .map(|(i, line)| {
            let no = i + 2;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(format!("line {no}: expected 3 fields"));
            }
            Ok(AnalyticRow {
                x: field_f64(f[0], no)?,
                f_t: field_f64(f[1], no)?,
                f_rho: field_f64(f[2], no)?,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    params: &'a Parameters,
    seed: u64,
    n_customers: u64,
    burn_in: u64,
    served: usize,
    abandoned: usize,
    outcomes: &'a [CustomerOutcome],
    /// Served waits from rank `burn_in` on.
    served_waits: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    queue_length_trace: Option<&'a [(f64, u64)]>,
    warnings: Vec<String>,
}

pub fn cmd_simulate(config: &RunConfig, trace: bool) -> Result<i32, CliError> {
    let format = config.format.unwrap_or(Format::Csv);
    if trace && format == Format::Csv {
        return Err(invalid("trace output requires --format json"));
    }
    let options = SimOptions {
        record_trace: trace,
        ..SimOptions::default()
    };
    let path: SamplePath = sim::simulate_with(config.params, config.n_customers as usize, config.seed, &options)?;
    for w in &path.warnings {
        eprintln!("warning: {w}");
    }
    let body = match format {
        Format::Csv => outcomes_csv(&path.outcomes),
        Format::Json => to_json(&SimulateReport {
            params: &path.params,
            seed: config.seed,
            n_customers: config.n_customers,
            burn_in: config.burn_in,
            served: path.served_count(),
            abandoned: path.abandoned_count(),
            outcomes: &path.outcomes,
            served_waits: path.served_waits.get(config.burn_in as usize..).unwrap_or_default(),
            queue_length_trace: path.queue_length_trace.as_deref(),
            warnings: path.warnings.iter().map(ToString::to_string).collect(),
        })?,
    };
    write_output(config.output_path.as_deref(), &body)?;
    Ok(EXIT_OK)
}

/// Where `analytic` takes `M` from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MSource {
    Supplied(f64),
    Estimate,
}

#[derive(Serialize)]
struct AnalyticReport<'a> {
    params: &'a Parameters,
    m: f64,
    m_estimated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    m_ci_half_width: Option<f64>,
    normaliser: f64,
    atom: f64,
    rows: &'a [AnalyticRow],
}

/// Evaluation points: the supplied grid restricted to `[0, T]`, or `points`
/// evenly spaced points on `[0, T]`.
pub fn analytic_grid(params: &Parameters, grid: Option<&str>, points: Option<u64>) -> Result<Vec<f64>, CliError> {
    let deadline = params.deadline;
    match grid {
        Some(text) => {
            let values: Vec<f64> = text
                .split(',')
                .map(|s| parse_extended_f64(s).ok_or_else(|| invalid(format!("grid: cannot parse '{}'", s.trim()))))
                .collect::<Result<_, _>>()?;
            if values.iter().any(|x| x.is_nan()) {
                return Err(invalid("grid: NaN point"));
            }
            let kept: Vec<f64> = values
                .iter()
                .copied()
                .filter(|&x| (0.0..=deadline).contains(&x) && x.is_finite())
                .collect();
            if kept.len() < values.len() {
                eprintln!(
                    "warning: dropped {} grid point(s) outside [0, {}]",
                    values.len() - kept.len(),
                    fmt_g17(deadline)
                );
            }
            if kept.is_empty() {
                return Err(invalid("grid: no points inside [0, T]"));
            }
            Ok(kept)
        }
        None => {
            if !params.has_finite_deadline() {
                return Err(invalid("grid is required when deadline = inf"));
            }
            let k = points.unwrap_or(DEFAULT_GRID_POINTS as u64) as usize;
            if k < 2 {
                return Err(invalid("points must be at least 2"));
            }
            let mut xs: Vec<f64> = (0..k).map(|i| deadline * i as f64 / (k - 1) as f64).collect();
            xs[k - 1] = deadline;
            Ok(xs)
        }
    }
}

pub fn cmd_analytic(config: &RunConfig, m: MSource, grid: &[f64]) -> Result<i32, CliError> {
    let law = config.analytic_law()?;
    let (m_value, half_width) = match m {
        MSource::Supplied(v) => (v, None),
        MSource::Estimate => {
            let est = config.estimate(CiMethod::Normal, DEFAULT_CONFIDENCE)?;
            (est.m_hat, Some(est.ci_half_width))
        }
    };
    let limit = LimitingLaw::new(law, m_value)?;
    // evaluate the largest point first so a series failure surfaces as an error
    if let Some(&x_max) = grid.iter().max_by(|a, b| a.total_cmp(b)) {
        if x_max < config.params.deadline {
            law.busy_cdf_series(x_max)?;
        }
    }
    let rows: Vec<AnalyticRow> = grid
        .iter()
        .map(|&x| AnalyticRow {
            x,
            f_t: limit.cdf(x),
            f_rho: law.busy_density(x),
        })
        .collect();
    let body = match config.format.unwrap_or(Format::Csv) {
        Format::Csv => analytic_csv(&rows),
        Format::Json => to_json(&AnalyticReport {
            params: &config.params,
            m: m_value,
            m_estimated: half_width.is_some(),
            m_ci_half_width: half_width,
            normaliser: limit.normaliser(),
            atom: limit.atom(),
            rows: &rows,
        })?,
    };
    write_output(config.output_path.as_deref(), &body)?;
    Ok(EXIT_OK)
}

pub fn cmd_estimate_m(config: &RunConfig, confidence: f64, mom_groups: Option<u64>) -> Result<i32, CliError> {
    let method = match mom_groups {
        Some(g) => CiMethod::MedianOfMeans { groups: g as usize },
        None => CiMethod::Normal,
    };
    let est = config.estimate(method, confidence)?;
    let body = match config.format.unwrap_or(Format::Csv) {
        Format::Csv => format!(
            "{ESTIMATE_HEADER}\n{},{},{},{},{},{}\n",
            fmt_g17(est.m_hat),
            fmt_g17(est.m_hat - est.ci_half_width),
            fmt_g17(est.m_hat + est.ci_half_width),
            fmt_g17(est.confidence),
            est.replications,
            fmt_g17(est.std_dev)
        ),
        Format::Json => to_json(&est)?,
    };
    write_output(config.output_path.as_deref(), &body)?;
    Ok(EXIT_OK)
}

pub fn cmd_busy_sample(config: &RunConfig, ceiling: u64) -> Result<i32, CliError> {
    let samples = tau::busy_period_samples(&config.params, config.seed, config.n_customers, ceiling)
        .map_err(|e| invalid(e.to_string()))?;
    let body = match config.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from(BUSY_HEADER);
            s.push('\n');
            for (i, b) in samples.iter().enumerate() {
                let tau3 = b.tau3.map(|t| t.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{i},{},{tau3}", fmt_g17(b.duration));
            }
            s
        }
        Format::Json => to_json(&samples)?,
    };
    write_output(config.output_path.as_deref(), &body)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub m_hat: f64,
    /// Confidence interval for `M` at the default confidence.
    pub ci: [f64; 2],
    pub ks: f64,
    /// Served-wait samples after burn-in.
    pub n: usize,
    pub pass: bool,
    pub zero_wait_fraction: f64,
    /// Combined standard error of `zero_wait_fraction - 1/m_hat`.
    pub zero_wait_se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub advisory: Option<String>,
}

/// simulate, served waits, estimate `M`, limiting law, KS distance.
pub fn compare(config: &RunConfig) -> Result<CompareSummary, CliError> {
    let params = config.params;
    if params.is_transient() {
        return Err(invalid(
            "transient regime (deadline = inf, lambda > mu): no stationary waiting-time law to compare against",
        ));
    }
    let path = sim::simulate(params, config.n_customers as usize, config.seed, false)?;
    let burn_in = config.burn_in as usize;
    let waits = sim::served_waits(&path, burn_in);
    let est = config.estimate(CiMethod::Normal, DEFAULT_CONFIDENCE)?;
    let limit = LimitingLaw::new(config.analytic_law()?, est.m_hat)?;
    let n = waits.len();
    let ks = if n == 0 {
        1.0
    } else {
        EcdfView::new(waits).ks_distance(&limit)
    };

    let zero = sim::zero_wait_estimate(&path, burn_in);
    let se_inverse = est.std_error() / (est.m_hat * est.m_hat);
    let zero_wait_se = zero.std_error.hypot(se_inverse);
    let zero_ok = (zero.fraction - 1.0 / est.m_hat).abs() <= ZERO_WAIT_SIGMAS * zero_wait_se;

    let mut notes = Vec::new();
    if n < MIN_COMPARE_SAMPLES {
        notes.push(format!(
            "only {n} served-wait samples after burn-in; at least {MIN_COMPARE_SAMPLES} are needed"
        ));
    }
    if ks >= KS_THRESHOLD {
        notes.push(format!("KS distance {} is not below {KS_THRESHOLD}", fmt_g17(ks)));
    }
    if !zero_ok {
        notes.push(format!(
            "zero-wait fraction {} is more than {ZERO_WAIT_SIGMAS} standard errors from 1/m_hat",
            fmt_g17(zero.fraction)
        ));
    }
    Ok(CompareSummary {
        m_hat: est.m_hat,
        ci: [est.m_hat - est.ci_half_width, est.m_hat + est.ci_half_width],
        ks,
        n,
        pass: notes.is_empty(),
        zero_wait_fraction: zero.fraction,
        zero_wait_se,
        advisory: if notes.is_empty() { None } else { Some(notes.join("; ")) },
    })
}

pub fn cmd_compare(config: &RunConfig) -> Result<i32, CliError> {
    let summary = compare(config)?;
    if let Some(a) = &summary.advisory {
        eprintln!("advisory: {a}");
    }
    let body = match config.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&summary)?,
        Format::Csv => format!(
            "{COMPARE_HEADER}\n{},{},{},{},{},{}\n",
            fmt_g17(summary.m_hat),
            fmt_g17(summary.ci[0]),
            fmt_g17(summary.ci[1]),
            fmt_g17(summary.ks),
            summary.n,
            summary.pass
        ),
    };
    write_output(config.output_path.as_deref(), &body)?;
    Ok(if summary.pass { EXIT_OK } else { EXIT_COMPARE_FAILED })
}

/// Applies `RQL_THREADS` to the global thread pool.
fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("RQL_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| invalid(format!("RQL_THREADS: expected a positive integer, got '{value}'")))?;
    // a pool built earlier in the same process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    configure_threads()?;
    match command {
        Command::Simulate { common, trace } => {
            let mut settings = Settings::load(&common)?;
            if trace {
                settings.set("trace", Some(&"true".to_string()));
            }
            let config = settings.run_config()?;
            cmd_simulate(&config, settings.flag("trace")?)
        }
        Command::Analytic {
            common,
            m,
            grid,
            points,
        } => {
            let mut settings = Settings::load(&common)?;
            settings.set("m", m.as_ref());
            settings.set("grid", grid.as_ref());
            settings.set("points", points.as_ref());
            let config = settings.run_config()?;
            if !config.params.has_finite_deadline() && config.params.lambda >= config.params.mu {
                return Err(invalid("analytic needs a finite deadline unless lambda < mu"));
            }
            let source = match settings.float("m")? {
                Some(v) => MSource::Supplied(v),
                None => MSource::Estimate,
            };
            let xs = analytic_grid(&config.params, settings.get("grid"), settings.count("points")?)?;
            cmd_analytic(&config, source, &xs)
        }
        Command::EstimateM {
            common,
            confidence,
            mom_groups,
        } => {
            let mut settings = Settings::load(&common)?;
            settings.set("confidence", confidence.as_ref());
            settings.set("mom_groups", mom_groups.as_ref());
            let config = settings.run_config()?;
            let confidence = settings.float("confidence")?.unwrap_or(DEFAULT_CONFIDENCE);
            cmd_estimate_m(&config, confidence, settings.count("mom_groups")?)
        }
        Command::BusySample { common, ceiling } => {
            let mut settings = Settings::load(&common)?;
            settings.set("ceiling", ceiling.as_ref());
            let config = settings.run_config()?;
            let ceiling = settings.count("ceiling")?.unwrap_or(DEFAULT_BUSY_CEILING);
            if ceiling == 0 {
                return Err(invalid("ceiling must be positive"));
            }
            cmd_busy_sample(&config, ceiling)
        }
        Command::Compare { common } => {
            let config = Settings::load(&common)?.run_config()?;
            cmd_compare(&config)
        }
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
/// Messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rql: {e}");
            e.exit_code()
        }
    }
}
