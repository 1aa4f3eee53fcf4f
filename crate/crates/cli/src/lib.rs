//! Command implementations behind the `gridtree` binary.
//!
//! Every command returns the text destined for standard output so that it
//! can be tested without spawning a process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use gridtree::query::{answer_query, answer_query_exact, sweep_error, QueryError, RegionQuery};
use gridtree::sim::{ConfigError, RunOutput, Scenario, ScenarioConfig, SimError, Trace, TraceError};
use thiserror::Error;

pub mod report;

use report::{energy, value, ModeSeries, ReportError, RunReport};

#[derive(Debug, Parser)]
#[command(name = "gridtree", version, about = "Grid-based clustering index tree simulator")]
pub struct Cli {
    /// Scenario config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Trace CSV; overrides the config's `trace` key.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    /// Overrides the config's `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also write a structured report to this path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the canonical index tree.
    BuildTree,
    /// Run the scenario in its configured mode.
    Run,
    /// Run with and without overlap deduplication.
    CompareDedup,
    /// Node error against cluster count.
    Sweep {
        /// Cluster counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
        /// Run the counts on separate threads.
        #[arg(long)]
        parallel: bool,
    },
    /// Answer `x1 y1 x2 y2 t_start t_end fn` region queries.
    Query {
        query: Option<String>,
        /// File with one query per line.
        #[arg(long, conflicts_with = "query")]
        query_file: Option<PathBuf>,
        /// Aggregate raw delivered readings instead of stored header values.
        #[arg(long)]
        exact: bool,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("trace error: {0}")]
    Trace(String),
    #[error("query error: {0}")]
    Query(String),
    #[error("simulation error: {0}")]
    Sim(String),
    #[error("cannot write {path}: {reason}")]
    Output { path: String, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Trace(_) => 3,
            CliError::Query(_) => 4,
            CliError::Sim(_) | CliError::Output { .. } => 5,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        CliError::Trace(e.to_string())
    }
}

impl From<QueryError> for CliError {
    fn from(e: QueryError) -> Self {
        CliError::Query(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Sim(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(e) => e.into(),
            SimError::Trace(e) => e.into(),
            other => CliError::Sim(other.to_string()),
        }
    }
}

/// Config plus the trace it resolves to.
pub struct Inputs {
    pub config: ScenarioConfig,
    pub trace: Trace,
}

pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ScenarioConfig, CliError> {
    let path = path.ok_or_else(|| CliError::Config("no config given; pass --config".to_owned()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = ScenarioConfig::parse(&text)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

/// `--trace` wins; otherwise the config's `trace` key, relative to the
/// config file's directory.
pub fn resolve_trace(cli: &Cli, config: &ScenarioConfig) -> Result<PathBuf, CliError> {
    if let Some(t) = &cli.trace {
        return Ok(t.clone());
    }
    let rel = config
        .trace
        .as_ref()
        .ok_or_else(|| CliError::Trace("no trace given; set `trace` in the config or pass --trace".to_owned()))?;
    let dir = cli.config.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));
    Ok(dir.join(rel))
}

pub fn load_inputs(cli: &Cli) -> Result<Inputs, CliError> {
    let config = load_config(cli.config.as_deref(), cli.seed)?;
    let trace = Trace::from_path(&resolve_trace(cli, &config)?)?;
    Ok(Inputs { config, trace })
}

fn mode_series(mode: &'static str, out: &RunOutput) -> ModeSeries {
    ModeSeries {
        mode,
        energy: out.energy_series(),
        total: out.total_energy(),
        accuracy: out.accuracy.clone(),
        drops: out.drops.clone(),
    }
}

fn mode_name(dedup: bool) -> &'static str {
    if dedup {
        "dedup"
    } else {
        "normal"
    }
}

/// Runs the command. Returns standard output and, when `--out` is set,
/// writes the report file.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let inputs = load_inputs(cli)?;
    let (config, trace) = (&inputs.config, &inputs.trace);
    let scenario = Scenario::build(config, trace)?;
    let mut report = RunReport::new(&scenario);
    let mut stdout = String::new();

    match &cli.command {
        Command::BuildTree => stdout.push_str(scenario.tree().to_canonical_string().as_str()),
        Command::Run => {
            let out = scenario.run(trace, config.dedup)?;
            let m = mode_series(mode_name(config.dedup), &out);
            stdout.push_str("tick,energy,error\n");
            for (t, (e, a)) in m.energy.iter().zip(&m.accuracy).enumerate() {
                let a = a.map_or_else(|| "-".to_owned(), value);
                let _ = writeln!(stdout, "{t},{},{a}", energy(*e));
            }
            let _ = writeln!(stdout, "total,{},", energy(m.total));
            report.modes.push(m);
        }
        Command::CompareDedup => {
            let normal = mode_series("normal", &scenario.run(trace, false)?);
            let dedup = mode_series("dedup", &scenario.run(trace, true)?);
            stdout.push_str("tick,normal,dedup\n");
            for (t, (n, d)) in normal.energy.iter().zip(&dedup.energy).enumerate() {
                let _ = writeln!(stdout, "{t},{},{}", energy(*n), energy(*d));
            }
            let _ = writeln!(stdout, "total,{},{}", energy(normal.total), energy(dedup.total));
            report.modes.push(normal);
            report.modes.push(dedup);
        }
        Command::Sweep { counts, parallel } => {
            for &c in counts {
                config.with_target(c).validate()?;
            }
            let errors: Vec<Result<f64, SimError>> = if *parallel {
                std::thread::scope(|s| {
                    let handles: Vec<_> = counts.iter().map(|&c| s.spawn(move || sweep_error(config, c, trace))).collect();
                    handles.into_iter().map(|h| h.join().expect("sweep thread panicked")).collect()
                })
            } else {
                counts.iter().map(|&c| sweep_error(config, c, trace)).collect()
            };
            stdout.push_str("clusters,error\n");
            for (c, e) in counts.iter().zip(errors) {
                let _ = writeln!(stdout, "{c},{}", value(e?));
            }
        }
        Command::Query {
            query,
            query_file,
            exact,
        } => {
            let lines: Vec<String> = match (query, query_file) {
                (Some(q), _) => vec![q.clone()],
                (None, Some(path)) => std::fs::read_to_string(path)
                    .map_err(|e| CliError::Query(format!("cannot read query file {}: {e}", path.display())))?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_owned)
                    .collect(),
                (None, None) => return Err(CliError::Query("no query given".to_owned())),
            };
            let queries = lines
                .iter()
                .map(|l| l.parse::<RegionQuery>())
                .collect::<Result<Vec<_>, _>>()?;
            let out = scenario.run(trace, config.dedup)?;
            for q in &queries {
                let answer = if *exact {
                    answer_query_exact(q, scenario.tree(), scenario.field(), &out.states)?
                } else {
                    answer_query(q, scenario.tree(), scenario.field(), &out.states)?
                };
                let cells: Vec<String> = answer.cells.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(stdout, "value={} cells={}", value(answer.value), cells.join(","));
            }
            report.modes.push(mode_series(mode_name(config.dedup), &out));
        }
    }

    if let Some(path) = &cli.out {
        let text = report.render()?;
        std::fs::write(path, text).map_err(|e| CliError::Output {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    }
    Ok(stdout)
}
