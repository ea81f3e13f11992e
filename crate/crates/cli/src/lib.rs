//! Command-line front end for the `wlasso` crate.

pub mod bench;
pub mod document;
pub mod fit;
pub mod ic;
pub mod io;
pub mod simulate;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;
use wlasso::correlation::Dissimilarity;
use wlasso::simulation::{Alphas, Method};

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input files or flags.
    #[error("{0}")]
    Input(String),
    /// A numerical stage failed on well-formed input.
    #[error("{name}: {message}")]
    Numerical { name: String, message: String },
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Output(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wlasso", version, about = "Whitening Lasso variable selection")]
pub struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true, env = "WLASSO_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit WLasso, the Lasso or HOLP on CSV data.
    Fit(FitArgs),
    /// Run replicated simulation scenarios.
    Simulate(SimulateArgs),
    /// Irrepresentable condition diagnostic, raw and whitened.
    IcCheck(IcArgs),
    /// Per-stage timings of WLasso fits.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    Wlasso,
    Lasso,
    Holp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DissimilarityArg {
    /// Euclidean distance between rows of the correlation matrix.
    RowEuclidean,
    /// 1 - R
    OneMinusR,
    /// 1 - |R|
    OneMinusAbsR,
}

impl From<DissimilarityArg> for Dissimilarity {
    fn from(d: DissimilarityArg) -> Self {
        match d {
            DissimilarityArg::RowEuclidean => Dissimilarity::RowEuclidean,
            DissimilarityArg::OneMinusR => Dissimilarity::OneMinusCorrelation,
            DissimilarityArg::OneMinusAbsR => Dissimilarity::OneMinusAbsCorrelation,
        }
    }
}

/// Shared tuning flags.
#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    /// Ratio threshold γ of the K̂ / M̂ rule, in (0, 1).
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100)]
    pub grid_count: usize,
    /// λ_min / λ_max of the geometric grid.
    #[arg(long, default_value_t = 1e-3)]
    pub grid_ratio: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = DissimilarityArg::RowEuclidean)]
    pub dissimilarity: DissimilarityArg,
}

impl TuningArgs {
    pub fn wlasso_config(&self) -> Result<wlasso::wlasso::WLassoConfig, CliError> {
        use wlasso::lasso::{GridConfig, SolverConfig};
        use wlasso::wlasso::{ThresholdRule, WLassoConfig};
        let rule = ThresholdRule::new(self.gamma).map_err(|e| CliError::Input(e.to_string()))?;
        if self.grid_count < 2 {
            return Err(CliError::Input(format!("--grid-count must be at least 2, got {}", self.grid_count)));
        }
        if !(self.grid_ratio > 0.0 && self.grid_ratio < 1.0) {
            return Err(CliError::Input(format!("--grid-ratio must lie in (0, 1), got {}", self.grid_ratio)));
        }
        let solver = SolverConfig { tol: self.tol, max_iter: self.max_iter };
        solver.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(WLassoConfig {
            rule,
            grid: GridConfig { count: self.grid_count, ratio: self.grid_ratio },
            solver,
            eig_floor: None,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Design matrix CSV, n rows by p columns.
    #[arg(long)]
    pub x: PathBuf,
    /// Response CSV, n rows by one column.
    #[arg(long)]
    pub y: PathBuf,
    /// Known correlation matrix CSV (p by p); estimated from X otherwise.
    #[arg(long)]
    pub sigma: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FitMethod::Wlasso)]
    pub method: FitMethod,
    /// Center and scale the columns of X and center y.
    #[arg(long)]
    pub standardize: bool,
    /// Target support size for lasso and holp; defaults to min(n, p) / 2.
    #[arg(long)]
    pub select_size: Option<usize>,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Scenario flags shared by `simulate`, `ic-check` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub p: usize,
    /// Value of the non-null coefficients.
    #[arg(long, default_value_t = 0.5)]
    pub b: f64,
    /// `a1,a2,a3` block correlations, or `identity`.
    #[arg(long, default_value = "0.3,0.5,0.7")]
    pub alphas: String,
    #[arg(long, default_value_t = 10)]
    pub n_active: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
}

impl ScenarioArgs {
    pub fn scenario(&self, seed: u64) -> Result<wlasso::simulation::Scenario, CliError> {
        let s = wlasso::simulation::Scenario {
            n: self.n,
            p: self.p,
            n_active: self.n_active,
            b: self.b,
            alphas: parse_alphas(&self.alphas)?,
            noise_sd: self.noise_sd,
            seed,
        };
        s.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(s)
    }
}

pub fn parse_alphas(s: &str) -> Result<Alphas, CliError> {
    if s.trim().eq_ignore_ascii_case("identity") {
        return Ok(Alphas::Identity);
    }
    let v = io::parse_reals(s)?;
    match v[..] {
        [a1, a2, a3] => Ok(Alphas::block(a1, a2, a3)),
        _ => Err(CliError::Input(format!("--alphas needs three values or `identity`, got {s:?}"))),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 20)]
    pub replications: u64,
    #[arg(long)]
    pub seed: u64,
    /// Comma-separated subset of wlasso, wlasso-known, lasso, holp.
    #[arg(long, default_value = "wlasso,wlasso-known,lasso,holp")]
    pub methods: String,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Output directory for summary.json and replications.csv.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_methods(s: &str) -> Result<Vec<Method>, CliError> {
    s.split(',')
        .map(|t| Method::parse(t.trim()).ok_or_else(|| CliError::Input(format!("unknown method {t:?}"))))
        .collect()
}

#[derive(Debug, Clone, Args)]
pub struct IcArgs {
    /// Design matrix CSV; a simulated scenario is used when omitted.
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// 1-based active indices, comma-separated (with --x).
    #[arg(long)]
    pub support: Option<String>,
    /// Signs of the active coefficients in support order (`+`, `-` or numbers); all positive by default.
    #[arg(long, allow_hyphen_values = true)]
    pub signs: Option<String>,
    /// Also check the whitened design.
    #[arg(long)]
    pub whiten: bool,
    /// Correlation matrix CSV used for whitening (with --x); estimated otherwise.
    #[arg(long)]
    pub sigma: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t = DissimilarityArg::RowEuclidean)]
    pub dissimilarity: DissimilarityArg,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 20)]
    pub replications: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Comma-separated numbers of predictors.
    #[arg(long, default_value = "100,500,1000,2000")]
    pub p: String,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value = "0.3,0.5,0.7")]
    pub alphas: String,
    #[arg(long, default_value_t = 0.5)]
    pub b: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Timing CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => fit::run(&a),
        Command::Simulate(a) => simulate::run(&a, cli.threads),
        Command::IcCheck(a) => ic::run(&a),
        Command::Bench(a) => bench::run(&a),
    }
}

/// Writes `text` to `path`, or stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Output(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn to_json<T: serde::Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Output(e.to_string()))
}
