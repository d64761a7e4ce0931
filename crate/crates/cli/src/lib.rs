//! Command-line experiments on top of `qlan`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure
//! (truncation or accuracy), 4 I/O error. Errors go to stderr as one line
//! `error[<kind>]: <message>`.

pub mod commands;
pub mod config;
pub mod plot;
pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{read_config_file, resolve, ExperimentConfig};
use crate::plot::{emit_plot, PlotSpec};
use crate::report::RiskReport;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{message}")]
    Numerical { kind: &'static str, message: String },
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical { kind, .. } => kind,
            CliError::Io(_) => "io",
        }
    }
}

impl From<qlan::Error> for CliError {
    fn from(e: qlan::Error) -> Self {
        match e {
            qlan::Error::Validation(_) | qlan::Error::Domain(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical {
                kind: e.kind(),
                message: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qlan", version, about = "Local asymptotic normality experiments for qubit ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Channel distances ‖T_n(ρ^u_n) - φ^u‖₁ and ‖S_n(φ^u) - ρ^u_n‖₁.
    Convergence(CommonArgs),
    /// Helstrom risk for ±u at finite n against its limits.
    Discriminate(CommonArgs),
    /// Total variation between covariant and heterodyne outcome laws.
    MeasureCompare(CommonArgs),
    /// Heterodyne estimation risk.
    Risk(CommonArgs),
    /// SVG plot of one statistic from a report.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Comma-separated values of μ in (1/2, 1].
    #[arg(long)]
    mu: Option<String>,
    /// Comma-separated, strictly ascending sample sizes.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// `min:max:steps` for both axes, or `x-axis,y-axis`.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Fock-space cutoff override.
    #[arg(long)]
    trunc: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    /// `mc` or `quadrature`, for `risk`.
    #[arg(long)]
    method: Option<String>,
    /// Radial nodes of the outcome grid, for `measure-compare`.
    #[arg(long)]
    grid_radial: Option<String>,
    /// Angular nodes of the outcome grid, for `measure-compare`.
    #[arg(long)]
    grid_angular: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    /// `csv` or `json`.
    #[arg(long)]
    format: Option<String>,
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    workers: Option<String>,
}

impl CommonArgs {
    fn flags(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("mu", &self.mu),
            ("n", &self.n),
            ("epsilon", &self.epsilon),
            ("grid", &self.grid),
            ("trunc", &self.trunc),
            ("seed", &self.seed),
            ("samples", &self.samples),
            ("method", &self.method),
            ("grid_radial", &self.grid_radial),
            ("grid_angular", &self.grid_angular),
            ("out", &self.out),
            ("format", &self.format),
            ("workers", &self.workers),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v)))
            .collect()
    }
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Report in CSV or JSON form.
    #[arg(long)]
    input: PathBuf,
    /// Statistic to plot; the first one in the report by default.
    #[arg(long)]
    statistic: Option<String>,
    /// Output SVG; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_experiment(name: &str, args: &CommonArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => read_config_file(p)?,
        None => BTreeMap::new(),
    };
    let config = resolve(name, &args.flags(), &file)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("cannot start workers: {e}")))?;
    let (report, result) = pool.install(|| execute(&config));
    let mut out = open_output(config.out.as_deref())?;
    report.write(config.format, &mut out)?;
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;
    result
}

/// Runs the experiment named in `config.command`.
pub fn execute(config: &ExperimentConfig) -> (RiskReport, Result<(), CliError>) {
    match config.command.as_str() {
        "convergence" => commands::run_convergence(config),
        "discriminate" => commands::run_discriminate(config),
        "measure-compare" => commands::run_measure_compare(config),
        "risk" => commands::run_risk(config),
        other => (
            RiskReport::new(config, &[]),
            Err(CliError::Config(format!("unknown command '{other}'"))),
        ),
    }
}

fn run_plot(args: &PlotArgs) -> Result<(), CliError> {
    let mut input = File::open(&args.input).map_err(|e| CliError::Io(format!("cannot read {}: {e}", args.input.display())))?;
    let report = RiskReport::read(&mut input)?;
    let svg = emit_plot(&report, &PlotSpec { statistic: args.statistic.clone() })?;
    let mut out = open_output(args.out.as_deref())?;
    out.write_all(svg.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Io(e.to_string()))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[config]: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    let result = match &cli.command {
        Command::Convergence(a) => run_experiment("convergence", a),
        Command::Discriminate(a) => run_experiment("discriminate", a),
        Command::MeasureCompare(a) => run_experiment("measure-compare", a),
        Command::Risk(a) => run_experiment("risk", a),
        Command::Plot(a) => run_plot(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            e.exit_code()
        }
    }
}
