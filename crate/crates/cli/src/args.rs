use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spectral_ood::theory::TheoryCase;

#[derive(Debug, Parser)]
#[command(name = "spectral-ood", version, about = "Spectral OOD experiments on enumerable populations")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Population config (JSON); used by factorize, detect and loss-check
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,

    /// Multiplies every pass/fail tolerance
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tolerance_scale: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare closed-form toy predictions with the numeric pipeline
    ToyVerify(ToyVerifyArgs),
    /// Grid sweep of closed-form and numeric toy quantities
    Sweep(SweepArgs),
    /// Low-rank gradient factorization against the spectral optimum
    Factorize(FactorizeArgs),
    /// Full pipeline with probe, KNN detector and metrics
    Detect(DetectArgs),
    /// Surrogate loss terms and the constant-offset check
    LossCheck(LossCheckArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ToyVerify(_) => "toy-verify",
            Command::Sweep(_) => "sweep",
            Command::Factorize(_) => "factorize",
            Command::Detect(_) => "detect",
            Command::LossCheck(_) => "loss-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    A,
    B,
    Unsup,
}

impl From<Variant> for TheoryCase {
    fn from(v: Variant) -> Self {
        match v {
            Variant::A => TheoryCase::A,
            Variant::B => TheoryCase::B,
            Variant::Unsup => TheoryCase::Unsup,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ToyArgs {
    #[arg(long, value_enum, default_value_t = Variant::A)]
    pub variant: Variant,

    #[arg(long, default_value_t = 0.03)]
    pub alpha_prime: f64,

    #[arg(long, default_value_t = 0.01)]
    pub beta_prime: f64,

    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,

    #[arg(long, default_value_t = 1e-6)]
    pub gamma_ratio: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WeightArgs {
    /// Defaults to 5
    #[arg(long)]
    pub eta_u: Option<f64>,

    /// Defaults to 1 (0 for the unsup toy variant)
    #[arg(long)]
    pub eta_l: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ToyVerifyArgs {
    #[command(flatten)]
    pub toy: ToyArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value_t = Variant::A)]
    pub variant: Variant,

    #[arg(long, default_value_t = 0.01)]
    pub lo: f64,

    #[arg(long, default_value_t = 0.2)]
    pub hi: f64,

    /// Points per axis
    #[arg(long, default_value_t = 50)]
    pub resolution: usize,

    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,

    #[arg(long, default_value_t = 1e-6)]
    pub gamma_ratio: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FactorizeArgs {
    #[command(flatten)]
    pub toy: ToyArgs,

    #[command(flatten)]
    pub weights: WeightArgs,

    #[arg(long, default_value_t = 3)]
    pub k: usize,

    #[arg(long, default_value_t = 0.1)]
    pub step: f64,

    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,

    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,

    /// Random factors used by the loss-equivalence check
    #[arg(long, default_value_t = 10)]
    pub trials: usize,

    /// Also write the four adjacency matrices as CSV
    #[arg(long)]
    pub dump_adjacency: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DetectArgs {
    #[command(flatten)]
    pub weights: WeightArgs,

    #[arg(long, default_value_t = 3)]
    pub k: usize,

    #[arg(long, default_value_t = 1)]
    pub k_neighbors: usize,

    #[arg(long, default_value_t = 0.95)]
    pub percentile: f64,

    #[arg(long)]
    pub dump_adjacency: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LossCheckArgs {
    #[command(flatten)]
    pub toy: ToyArgs,

    #[command(flatten)]
    pub weights: WeightArgs,

    #[arg(long, default_value_t = 3)]
    pub k: usize,

    #[arg(long, default_value_t = 10)]
    pub trials: usize,

    #[arg(long)]
    pub dump_adjacency: bool,
}
