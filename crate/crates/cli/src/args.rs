//! Command-line grammar.

use clap::{Args, Parser, Subcommand, ValueEnum};
use irsolve_core::refinement::TolMode;
use irsolve_core::PrecisionTier;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Parser)]
#[command(name = "irsolve", version, about = "Mixed-precision iterative refinement with energy accounting")]
pub struct Cli {
    /// Log more to stderr (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one covariance system and write report, energy and metrics files.
    Solve(SolveArgs),
    /// Run a grid of solves and print one metrics row per cell.
    Bench(BenchArgs),
    /// Iteration counts of perturbed Cholesky refinement over (n, gamma).
    SweepPerturb(SweepArgs),
    /// Per-sensor mean power over the leading window of a trace.
    IdleReport(IdleArgs),
    /// Join a solve's power trace with its phase labels for plotting.
    PlotData(PlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    CholIr,
    CgIr,
    BandedCgIr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::CholIr => "chol-ir",
            Method::CgIr => "cg-ir",
            Method::BandedCgIr => "banded-cg-ir",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TolModeArg {
    Absolute,
    Relative,
}

impl From<TolModeArg> for TolMode {
    fn from(m: TolModeArg) -> Self {
        match m {
            TolModeArg::Absolute => TolMode::Absolute,
            TolModeArg::Relative => TolMode::Relative,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TierArg {
    High,
    Low,
}

impl From<TierArg> for PrecisionTier {
    fn from(t: TierArg) -> Self {
        match t {
            TierArg::High => PrecisionTier::High,
            TierArg::Low => PrecisionTier::Low,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// Where power samples come from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum PowerSource {
    #[default]
    None,
    Sim,
    Trace(PathBuf),
}

impl FromStr for PowerSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(PowerSource::None),
            "sim" => Ok(PowerSource::Sim),
            _ => match s.strip_prefix("trace:") {
                Some(path) if !path.is_empty() => Ok(PowerSource::Trace(PathBuf::from(path))),
                _ => Err(format!("expected none, sim or trace:PATH, got '{s}'")),
            },
        }
    }
}

impl fmt::Display for PowerSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PowerSource::None => f.write_str("none"),
            PowerSource::Sim => f.write_str("sim"),
            PowerSource::Trace(p) => write!(f, "trace:{}", p.display()),
        }
    }
}

/// Solver options shared by `solve` and `bench`.
#[derive(Clone, Debug, Args)]
pub struct SolverOpts {
    /// Stopping threshold on each column's residual 2-norm.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = TolModeArg::Absolute)]
    pub tol_mode: TolModeArg,
    /// Precision of the inner solver.
    #[arg(long, value_enum, default_value_t = TierArg::Low)]
    pub inner_tier: TierArg,
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    /// Seed for right-hand sides, perturbations and simulated power.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// none, sim, or trace:PATH.
    #[arg(long, default_value = "none")]
    pub power: PowerSource,
    /// Derive phase durations from flop counts instead of the wall clock.
    #[arg(long)]
    pub fixed_clock: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value_t = Method::CholIr)]
    pub method: Method,
    /// Matrix order.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Off-diagonal decay exponent.
    #[arg(long, default_value_t = 2.0)]
    pub d: f64,
    /// Number of right-hand sides.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Half-bandwidth of the inner matrix (banded-cg-ir only, default 16).
    #[arg(long)]
    pub band_k: Option<usize>,
    /// Perturb the Cholesky factor by relative size 10^GAMMA (chol-ir only).
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Load the system matrix from a binary matrix file instead of generating it.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Save the system matrix to a binary matrix file.
    #[arg(long)]
    pub save_matrix: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "irsolve-out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverOpts,
}

#[derive(Clone, Debug, Args)]
pub struct BenchArgs {
    /// Matrix orders.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [1000])]
    pub n: Vec<usize>,
    /// Decay exponents.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [1.0, 2.0, 4.0])]
    pub d: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1..,
          default_values_t = [Method::CholIr, Method::CgIr, Method::BandedCgIr])]
    pub methods: Vec<Method>,
    /// Right-hand side counts.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [1])]
    pub m: Vec<usize>,
    /// Half-bandwidth used by banded-cg-ir cells.
    #[arg(long, default_value_t = 16)]
    pub band_k: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverOpts,
}

#[derive(Clone, Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [500, 1000])]
    pub n: Vec<usize>,
    /// Perturbation exponents.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true,
          default_values_t = [-1.0, -3.25, -5.5, -7.75, -10.0])]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub d: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    /// Precision of the factor before perturbation.
    #[arg(long, value_enum, default_value_t = TierArg::High)]
    pub inner_tier: TierArg,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct IdleArgs {
    /// Trace CSV; the bundled 300 s idle trace when omitted.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Window length in seconds from the first sample.
    #[arg(long, default_value_t = 300.0)]
    pub window: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct PlotArgs {
    /// Output directory of `solve`, or its report.json.
    pub report: PathBuf,
    /// Trace CSV; defaults to trace.csv next to the report.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
