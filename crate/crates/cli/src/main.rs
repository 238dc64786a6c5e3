//! `bfbm`: command-line front end for bfbm-core.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{ArgGroup, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bfbm_core::HurstParams;

#[derive(Parser, Debug)]
#[command(name = "bfbm", version, about = "Branching fractional Brownian motion laboratory")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the renewal sequence q_n.
    Renewal(RenewalArgs),
    /// Rescaled urn walks on one line.
    SimulateLinear(SimulateLinearArgs),
    /// Sample a Yule tree or build the binary tree.
    SampleTree(SampleTreeArgs),
    /// Urn walks on every branch of a tree, scaled by (Σq²)^{-1/2}.
    SimulateBfbmDiscrete(SimulateBfbmDiscreteArgs),
    /// Endpoint values of the Gaussian process on a tree.
    SampleBfbm(SampleBfbmArgs),
    /// The covariance ρ(t1, t2, s).
    Covariance(CovarianceArgs),
    /// Monte Carlo maxima against the leading order m(t).
    EstimateMax(EstimateMaxArgs),
    /// Compare the prediction kernel with exact Gaussian conditioning.
    PredictCheck(PredictCheckArgs),
    /// Check the covariance identities.
    VerifyIdentities(VerifyIdentitiesArgs),
}

/// Exactly one of `--H` and `--alpha`.
#[derive(Args, Debug, Clone, Copy, Serialize)]
#[command(group(ArgGroup::new("hurst").required(true).args(["h", "alpha"])))]
struct Hurst {
    /// Hurst parameter in (1/2, 1).
    #[arg(long = "H")]
    #[serde(rename = "H", skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    /// Urn exponent α = H - 1/2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
}

impl Hurst {
    fn params(&self) -> bfbm_core::Result<HurstParams> {
        match (self.h, self.alpha) {
            (Some(h), None) => HurstParams::new(h),
            (None, Some(a)) => HurstParams::from_alpha(a),
            _ => unreachable!("clap enforces exactly one"),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum TreeArg {
    Yule,
    Binary,
    Path,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Cholesky,
    Whitenoise,
    Grem,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum DirectionArg {
    Left,
    Right,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum CovMode {
    Closed,
    Kernel,
    Hs,
}

#[derive(Args, Debug, Serialize)]
struct RenewalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    hurst: Hurst,
    /// Largest index N of the table.
    #[arg(long, default_value_t = 100_000)]
    n_max: usize,
    /// CSV path; a JSON summary is written next to it as `<out>.json`.
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct SimulateLinearArgs {
    #[command(flatten)]
    #[serde(flatten)]
    hurst: Hurst,
    /// Urn steps per unit time (the scaling parameter n).
    #[arg(long, default_value_t = 1000)]
    steps_per_unit: usize,
    /// Time horizon.
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    horizon: f64,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    /// Depth of the simulated past in urn steps.
    #[arg(long)]
    window: Option<u64>,
    #[arg(long, required = true)]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct SampleTreeArgs {
    #[arg(long, value_enum)]
    kind: TreeArg,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    horizon: f64,
    /// Required for Yule trees.
    #[arg(long)]
    seed: Option<u64>,
    /// Snap births to a grid with this many levels per unit time.
    #[arg(long)]
    levels_per_unit: Option<usize>,
    #[arg(long, value_enum, default_value = "left")]
    direction: DirectionArg,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct SimulateBfbmDiscreteArgs {
    #[command(flatten)]
    #[serde(flatten)]
    hurst: Hurst,
    #[arg(long, default_value_t = 300)]
    steps_per_unit: usize,
    #[arg(long, value_enum)]
    tree: TreeArg,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    horizon: f64,
    #[arg(long)]
    window: Option<u64>,
    #[arg(long, required = true)]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct SampleBfbmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    hurst: Hurst,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_enum)]
    tree: TreeArg,
    /// Evaluation time; the tree is grown up to it.
    #[arg(long)]
    t: f64,
    /// GREM grid levels per unit time.
    #[arg(long, default_value_t = 1)]
    levels_per_unit: usize,
    #[arg(long, value_enum, default_value = "left")]
    direction: DirectionArg,
    /// White-noise cell width; defaults to t/200.
    #[arg(long)]
    dt: Option<f64>,
    /// White-noise past depth; defaults to 50 t.
    #[arg(long)]
    s_past: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    replicas: usize,
    #[arg(long, required = true)]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct CovarianceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    hurst: Hurst,
    #[arg(long)]
    t1: f64,
    #[arg(long)]
    t2: f64,
    #[arg(long)]
    s: f64,
    #[arg(long, value_enum, default_value = "kernel")]
    mode: CovMode,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct EstimateMaxArgs {
    #[command(flatten)]
    #[serde(flatten)]
    hurst: Hurst,
    #[arg(long, value_enum, default_value = "yule")]
    tree: TreeArg,
    /// Comma-separated evaluation times.
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10")]
    t_list: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    replicas: usize,
    #[arg(long, value_enum, default_value = "grem")]
    method: MethodArg,
    /// Grid levels per unit time; one by default.
    #[arg(long)]
    levels_per_unit: Option<usize>,
    #[arg(long, value_enum, default_value = "left")]
    direction: DirectionArg,
    #[arg(long, required = true)]
    seed: Option<u64>,
    /// CSV path; a JSON summary is written next to it as `<out>.json`.
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct PredictCheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    hurst: Hurst,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// The past is observed on [-depth, 0].
    #[arg(long, default_value_t = 50.0)]
    depth: f64,
    /// Number of past cells.
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    #[arg(long, default_value_t = 2000)]
    replicas: usize,
    #[arg(long, required = true)]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct VerifyIdentitiesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    hurst: Hurst,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Also run the suite at H = 0.55, 0.65, …, 0.95.
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

/// How a run ended, mapped onto the exit status.
#[derive(Debug)]
enum Failure {
    /// Bad parameters or configuration: exit 2.
    Usage(String),
    /// A check ran and did not pass: exit 1.
    Verification(String),
    /// Anything else: exit 1.
    Runtime(String),
}

impl From<bfbm_core::Error> for Failure {
    fn from(e: bfbm_core::Error) -> Self {
        use bfbm_core::Error as E;
        match e {
            E::Domain(_)
            | E::OutsideHorizon { .. }
            | E::UnknownBranch(_)
            | E::Budget(_)
            | E::InsufficientReplicas { .. }
            | E::TableTooShort { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("BFBM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("BFBM_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn run() -> Result<(), Failure> {
    let argv = config::expand(std::env::args_os().collect()).map_err(Failure::Usage)?;
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| Failure::Usage(e.to_string()))?;
    init_threads()?;
    commands::dispatch(cli.command)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
