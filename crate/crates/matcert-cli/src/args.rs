use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "matcert", version, about = "Certified curvature identities for matrix means and quantum entropies")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Write the JSON report here (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Override the primary tolerance of the selected check.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads for independent seeds; records stay ordered by seed.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file with default settings (`tol`, `threads`, `cross`, `lieb`, `relent`, `ssa`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Leave the timing section out of the report.
    #[arg(long, global = true)]
    pub omit_timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded random instance as JSON.
    Gen(GenArgs),
    /// Second derivative of the geometric mean against `−2·Cross`.
    VerifyCross(CrossArgs),
    /// Perturbation expansion of matrix powers.
    VerifyPower(PowerArgs),
    /// Dyadic construction of the Lieb second derivative.
    VerifyLieb(LiebArgs),
    /// Joint-convexity certificate for relative entropy.
    VerifyRelent(RelentArgs),
    /// Conditional mutual information decomposition on random states.
    VerifySsa(SsaArgs),
    /// Decompose the conditional mutual information of a state file.
    Decompose(DecomposeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InstanceKind {
    State,
    MeanPair,
    Segment,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: InstanceKind,
    /// One size for `mean-pair` and `segment`, three (d_A d_B d_C) for `state`.
    #[arg(long, num_args = 1..=3, required = true)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Interpolation point stored with a segment.
    #[arg(long, default_value_t = 0.5)]
    pub t0: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct SeedRange {
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed_start: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CrossMethodArg {
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Args)]
pub struct CrossArgs {
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[command(flatten)]
    pub seeds: SeedRange,
    #[arg(long, value_enum)]
    pub method: Option<CrossMethodArg>,
    /// Quadrature nodes for the `s`-integrals.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Finite-difference step along the ray.
    #[arg(long, default_value_t = matcert::suite::CROSS_FD_STEP)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[command(flatten)]
    pub seeds: SeedRange,
    /// Dyadic exponent `l/2^k`.
    #[arg(long, default_value = "3/8")]
    pub q: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    LevelK,
    LevelKMinus1,
}

#[derive(Debug, Args)]
pub struct LiebArgs {
    /// Dimensions of the two factors.
    #[arg(long, num_args = 2, default_values_t = [2, 2])]
    pub dims: Vec<usize>,
    #[command(flatten)]
    pub seeds: SeedRange,
    #[arg(long, default_value_t = 0.375)]
    pub q: f64,
    #[arg(long, default_value_t = 0.375)]
    pub r: f64,
    #[arg(long = "delta-convention", alias = "convention", value_enum)]
    pub convention: Option<ConventionArg>,
    /// Deepest dyadic level used for the exponents.
    #[arg(long = "level", alias = "max-level")]
    pub max_level: Option<u32>,
}

#[derive(Debug, Args)]
pub struct RelentArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[command(flatten)]
    pub seeds: SeedRange,
    #[arg(long)]
    pub kmax: Option<u32>,
    #[arg(long, default_value_t = 0.3)]
    pub t: f64,
    /// Use `2^kΓ_k` at `k = kmax` without Richardson extrapolation.
    #[arg(long)]
    pub no_extrapolate: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PrefactorArg {
    Unrolled,
    KPlusOne,
}

#[derive(Debug, Args, Clone)]
pub struct SsaSettings {
    /// Nodes per σ-integral.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub kmax: Option<u32>,
    #[arg(long, value_enum)]
    pub prefactor: Option<PrefactorArg>,
    #[arg(long)]
    pub no_extrapolate: bool,
}

#[derive(Debug, Args)]
pub struct SsaArgs {
    #[arg(long, num_args = 3, default_values_t = [2, 2, 2])]
    pub dims: Vec<usize>,
    #[command(flatten)]
    pub seeds: SeedRange,
    #[command(flatten)]
    pub settings: SsaSettings,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// State file: a matrix file with `"dims": [d_A, d_B, d_C]`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Seed the state was generated with, echoed in the report.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub settings: SsaSettings,
}
