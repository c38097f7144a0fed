//! Command-line front end: `simulate`, `identify`, `compare`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error,
//! 4 I/O error.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::correlation::{estimate_covariances, CovarianceModel, DEFAULT_MAX_LAG};
use crate::error::Error;
use crate::graphio::{compare, default_node_ids, export_dot, threshold_edges, Topology};
use crate::netsim::{random_spec, simulate, EdgeRule, NetworkSpec, SimulationOptions, DEFAULT_BURN_IN};
use crate::sparsifiers::{identify_nodes, topology_from_selections, Degree, Method, SparsifierConfig};
use crate::timeseries::{assemble, load_csv, log_returns, spline_fill, CsvSchema, RawSeries, TimestampColumn};
use crate::wiener::{Ridge, DEFAULT_HALF_WIDTH};

#[derive(Debug, Parser)]
#[command(name = "wiener-topo", version, about = "Sparse network topology identification from time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random network and simulate it.
    Simulate(SimulateArgs),
    /// Reconstruct a topology from a CSV of time series.
    Identify(IdentifyArgs),
    /// Score an estimated topology against ground truth.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub nodes: usize,
    /// FIR order of each edge filter.
    #[arg(long, default_value_t = 5)]
    pub order: usize,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// Target SNR for nodes with inbound edges; 0 disables calibration.
    #[arg(long, default_value_t = 4.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exact number of edges.
    #[arg(long, conflicts_with_all = ["in_degree", "max_in_degree", "density"])]
    pub edges: Option<usize>,
    /// Parents drawn per node (default 2).
    #[arg(long, conflicts_with_all = ["max_in_degree", "density"])]
    pub in_degree: Option<usize>,
    /// Parent count drawn uniformly from 0..=k per node.
    #[arg(long, conflicts_with = "density")]
    pub max_in_degree: Option<usize>,
    /// Probability of each admissible edge.
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    /// Simulated series as CSV.
    #[arg(long)]
    pub out_csv: PathBuf,
    /// Ground-truth network spec as JSON.
    #[arg(long)]
    pub out_spec: PathBuf,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    /// Input CSV (one timestamp column plus one column per node).
    pub input: Option<PathBuf>,
    /// Read a covariance model JSON instead of a CSV.
    #[arg(long, conflicts_with = "input")]
    pub covariance: Option<PathBuf>,
    #[arg(long, default_value = "cols")]
    pub method: String,
    /// In-degree bound: an integer or `auto`.
    #[arg(long, default_value = "2")]
    pub m: String,
    /// Filter half-width; each channel has 2L+1 taps.
    #[arg(long = "L", default_value_t = DEFAULT_HALF_WIDTH)]
    pub half_width: usize,
    /// Maximum covariance lag (default: max(20, 2L)).
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Relative diagonal loading.
    #[arg(long, default_value_t = 1e-8)]
    pub ridge: f64,
    #[arg(long, default_value_t = 10)]
    pub rwls_iterations: usize,
    #[arg(long, default_value_t = 0.20)]
    pub auto_threshold: f64,
    /// Drop edges below this fraction of the heaviest edge.
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    /// Subset budget for the exhaustive method.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u128,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Timestamp column name (default: first column).
    #[arg(long)]
    pub timestamp_column: Option<String>,
    /// The CSV has no timestamp column; rows are consecutive days.
    #[arg(long, conflicts_with = "timestamp_column")]
    pub no_timestamp: bool,
    /// Fill gaps with a natural cubic spline on the common daily grid.
    #[arg(long)]
    pub fill_gaps: bool,
    /// Use log returns of the (filled) series.
    #[arg(long)]
    pub log_returns: bool,
    /// Covariance cache file, reused when the input and lag settings match.
    #[arg(long)]
    pub cov_cache: Option<PathBuf>,
    #[arg(long)]
    pub out_json: PathBuf,
    #[arg(long)]
    pub out_dot: Option<PathBuf>,
    /// Per-node selections and solver traces as JSON lines.
    #[arg(long)]
    pub out_selections: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Ground truth as a network spec JSON.
    #[arg(long, required_unless_present = "truth")]
    pub spec: Option<PathBuf>,
    /// Ground truth as a topology JSON.
    #[arg(long, conflicts_with = "spec")]
    pub truth: Option<PathBuf>,
    /// Estimated topology JSON.
    #[arg(long)]
    pub topology: PathBuf,
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub error: Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        self.error.exit_code()
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> Stage<T> for crate::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|error| CliError { stage, error })
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args, out),
        Command::Identify(args) => cmd_identify(&args, out),
        Command::Compare(args) => cmd_compare(&args, out),
    }
}

fn write_file(path: &Path, contents: &str) -> crate::Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> crate::Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e)).stage("output")
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let rule = match (args.edges, args.in_degree, args.max_in_degree, args.density) {
        (Some(e), ..) => EdgeRule::Count(e),
        (_, Some(k), ..) => EdgeRule::InDegree(k),
        (_, _, Some(k), _) => EdgeRule::MaxInDegree(k),
        (.., Some(d)) => EdgeRule::Density(d),
        _ => EdgeRule::InDegree(2),
    };
    if !(args.snr >= 0.0 && args.snr.is_finite()) {
        return Err(Error::Config(format!("--snr must be nonnegative, got {}", args.snr))).stage("config");
    }
    let spec = random_spec(args.nodes, rule, args.order, args.seed).stage("config")?;
    let mut options = SimulationOptions::new(args.steps).with_burn_in(args.burn_in);
    if args.snr > 0.0 {
        options = options.with_snr(args.snr);
    }
    if args.steps < 1 {
        return Err(Error::Config("--steps must be at least 1".into())).stage("config");
    }

    let sim = simulate(&spec, options).stage("simulate")?;
    sim.data.write_csv(&args.out_csv).stage("write series")?;
    write_file(&args.out_spec, &sim.spec.to_json().stage("write spec")?).stage("write spec")?;
    let report = json!({
        "node_ids": sim.data.node_ids(),
        "achieved_snr": sim.achieved_snr,
        "edges": sim.spec.edges().len(),
    });
    emit(out, &report.to_string())
}

fn identify_config(args: &IdentifyArgs) -> crate::Result<(Method, SparsifierConfig, usize)> {
    let method: Method = args.method.parse()?;
    let m: Degree = args.m.parse()?;
    let max_lag = args.max_lag.unwrap_or(DEFAULT_MAX_LAG.max(2 * args.half_width));
    if 2 * args.half_width > max_lag {
        return Err(Error::Config(format!(
            "--max-lag {max_lag} must be at least 2·L = {}",
            2 * args.half_width
        )));
    }
    if !(args.ridge >= 0.0 && args.ridge.is_finite()) {
        return Err(Error::Config(format!("--ridge must be nonnegative, got {}", args.ridge)));
    }
    if !(0.0..1.0).contains(&args.threshold) {
        return Err(Error::Config(format!("--threshold must lie in [0, 1), got {}", args.threshold)));
    }
    if !args.delimiter.is_ascii() {
        return Err(Error::Config("--delimiter must be an ASCII character".into()));
    }
    match (&args.input, &args.covariance) {
        (None, None) => return Err(Error::Config("give an input CSV or --covariance".into())),
        (None, Some(_)) if args.fill_gaps || args.log_returns || args.cov_cache.is_some() => {
            return Err(Error::Config(
                "--fill-gaps, --log-returns and --cov-cache apply to CSV input only".into(),
            ))
        }
        _ => {}
    }
    let config = SparsifierConfig {
        m,
        half_width: args.half_width,
        ridge: Ridge::Relative(args.ridge),
        rwls_iterations: args.rwls_iterations,
        auto_threshold: args.auto_threshold,
        enumeration_budget: args.budget,
        workers: args.workers,
        ..Default::default()
    };
    config.validate()?;
    Ok((method, config, max_lag))
}

fn ingest(args: &IdentifyArgs, path: &Path) -> crate::Result<crate::TimeSeriesSet> {
    let schema = CsvSchema {
        delimiter: args.delimiter as u8,
        timestamp: match (&args.timestamp_column, args.no_timestamp) {
            (_, true) => TimestampColumn::RowNumber,
            (Some(name), false) => TimestampColumn::Named(name.clone()),
            (None, false) => TimestampColumn::Index(0),
        },
    };
    let mut series = load_csv(path, &schema)?;
    if series.len() < 2 {
        return Err(Error::Dimension(format!(
            "identification needs at least 2 series, `{}` has {}",
            path.display(),
            series.len()
        )));
    }
    if args.fill_gaps {
        let lo = series.iter().map(|s| s.timestamps()[0]).max().unwrap_or(0);
        let hi = series.iter().map(|s| *s.timestamps().last().unwrap()).min().unwrap_or(0);
        if hi <= lo {
            return Err(Error::Dimension("series share no common time range".into()));
        }
        let grid: Vec<i64> = (lo..=hi).collect();
        series = series
            .iter()
            .map(|s| {
                // Restrict to the common range first so no series is extrapolated.
                let keep: Vec<usize> = (0..s.len()).filter(|&k| (lo..=hi).contains(&s.timestamps()[k])).collect();
                let trimmed = RawSeries::new(
                    s.node_id.clone(),
                    keep.iter().map(|&k| s.timestamps()[k]).collect(),
                    keep.iter().map(|&k| s.values()[k]).collect(),
                )?;
                spline_fill(&trimmed, &grid)
            })
            .collect::<crate::Result<_>>()?;
    }
    if args.log_returns {
        series = series.iter().map(log_returns).collect::<crate::Result<_>>()?;
    }
    assemble(&series)
}

fn cache_key(bytes: &[u8], args: &IdentifyArgs, max_lag: usize) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.update(
        format!(
            "|max_lag={max_lag}|fill={}|logret={}|delim={}|ts={:?}|nots={}",
            args.fill_gaps, args.log_returns, args.delimiter, args.timestamp_column, args.no_timestamp
        )
        .as_bytes(),
    );
    hex::encode(h.finalize())
}

fn load_cached(path: &Path, key: &str) -> Option<(Vec<String>, CovarianceModel)> {
    let text = std::fs::read_to_string(path).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    if value.get("key")?.as_str()? != key {
        return None;
    }
    let ids: Vec<String> = serde_json::from_value(value.get("node_ids")?.clone()).ok()?;
    let model = CovarianceModel::from_json(&value.get("covariance")?.to_string()).ok()?;
    (ids.len() == model.n()).then_some((ids, model))
}

fn store_cached(path: &Path, key: &str, ids: &[String], model: &CovarianceModel) -> crate::Result<()> {
    let cov: serde_json::Value = serde_json::from_str(&model.to_json()?)?;
    let doc = json!({ "key": key, "node_ids": ids, "covariance": cov });
    write_file(path, &doc.to_string())
}

pub fn cmd_identify(args: &IdentifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (method, config, max_lag) = identify_config(args).stage("config")?;

    let (ids, model) = match (&args.input, &args.covariance) {
        (_, Some(path)) => {
            let model = CovarianceModel::from_json(&read_file(path).stage("read covariance")?).stage("read covariance")?;
            if model.max_lag() < 2 * config.half_width {
                return Err(Error::Config(format!(
                    "covariance model stops at lag {} but L = {} needs {}",
                    model.max_lag(),
                    config.half_width,
                    2 * config.half_width
                )))
                .stage("config");
            }
            (default_node_ids(model.n()), model)
        }
        (Some(path), None) => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e)).stage("ingest")?;
            let key = cache_key(&bytes, args, max_lag);
            match args.cov_cache.as_deref().and_then(|c| load_cached(c, &key)) {
                Some(hit) => hit,
                None => {
                    let ts = ingest(args, path).stage("ingest")?;
                    let model = estimate_covariances(&ts, max_lag).stage("covariance")?;
                    let ids = ts.node_ids().to_vec();
                    if let Some(cache) = &args.cov_cache {
                        store_cached(cache, &key, &ids, &model).stage("covariance cache")?;
                    }
                    (ids, model)
                }
            }
        }
        (None, None) => unreachable!("checked by identify_config"),
    };

    let selections = identify_nodes(&model, &ids, &config, method).stage("identify")?;
    let topology = topology_from_selections(&ids, &selections).stage("identify")?;
    let topology = threshold_edges(&topology, args.threshold).stage("threshold")?;

    write_file(&args.out_json, &topology.to_json().stage("export")?).stage("export")?;
    if let Some(dot) = &args.out_dot {
        export_dot(&topology, dot).stage("export")?;
    }
    if let Some(path) = &args.out_selections {
        let mut lines = String::new();
        for s in &selections {
            lines.push_str(&s.to_json().stage("export")?);
            lines.push('\n');
        }
        write_file(path, &lines).stage("export")?;
    }
    let summary = json!({
        "method": method.to_string(),
        "nodes": topology.n(),
        "edges": topology.edges().len(),
    });
    emit(out, &summary.to_string())
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let estimated = Topology::from_json(&read_file(&args.topology).stage("read topology")?).stage("read topology")?;
    let truth = match (&args.spec, &args.truth) {
        (Some(path), _) => {
            let spec = NetworkSpec::load(path).stage("read spec")?;
            Topology::from_spec(&spec, default_node_ids(spec.n())).stage("read spec")?
        }
        (None, Some(path)) => Topology::from_json(&read_file(path).stage("read truth")?).stage("read truth")?,
        (None, None) => return Err(Error::Config("give --spec or --truth".into())).stage("config"),
    };
    let report = compare(&truth, &estimated).stage("compare")?;
    emit(out, &serde_json::to_string(&report).map_err(Error::from).stage("output")?)
}
