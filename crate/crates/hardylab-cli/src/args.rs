use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hardylab::bases::Family;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "hardylab", version, about = "Orthonormal expansions, kernels, atoms and Hardy-sum experiments")]
pub struct Cli {
    /// Output format (basis and kernel default to csv, everything else to json).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON-lines results store.
    #[arg(long, global = true, env = "HARDYLAB_STORE")]
    pub store: Option<PathBuf>,
    /// Do not read or write the results store.
    #[arg(long, global = true)]
    pub no_store: bool,
    /// Flat key = value configuration file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Quadrature tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Basis functions and their derivatives.
    Basis(BasisArgs),
    /// Poisson-type kernel R_r or heat kernel G_t.
    Kernel(KernelArgs),
    /// Counterexample atoms.
    #[command(subcommand)]
    Atom(AtomCommand),
    /// Admissible exponents and Hardy sums.
    #[command(subcommand)]
    Hardy(HardyCommand),
    /// Sharpness experiments.
    #[command(subcommand)]
    Sharpness(SharpnessCommand),
    /// Numerical checks of the pointwise and kernel estimates.
    Estimates(EstimatesArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SystemArgs {
    /// laguerre-std, laguerre-hermite, generalized-hermite or jacobi.
    #[arg(long)]
    pub system: Family,
    /// Type parameter α, one value or one per coordinate.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alpha: Vec<f64>,
    /// Type parameter β (jacobi).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub beta: Vec<f64>,
    /// Type parameter λ (generalized-hermite).
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    /// Dimension; a single parameter value is repeated in every coordinate.
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BasisArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Indices k.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    /// Evaluation points.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required_unless_present = "points")]
    pub u: Vec<f64>,
    /// File with one evaluation point per line.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Derivative order.
    #[arg(long, default_value_t = 0)]
    pub deriv: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMethod {
    /// Closed form where available, otherwise the spectral sum.
    Auto,
    Closed,
    Spectral,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KernelArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Poisson parameter r ∈ (0,1).
    #[arg(long, required_unless_present = "t", conflicts_with = "t")]
    pub r: Option<f64>,
    /// Heat time t > 0 (Hermite-type systems).
    #[arg(long)]
    pub t: Option<f64>,
    /// First arguments; a single point when d > 1.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub u: Vec<f64>,
    /// Second arguments; a single point when d > 1.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub v: Vec<f64>,
    #[arg(long, value_enum, default_value_t = KernelMethod::Auto)]
    pub method: KernelMethod,
    /// Spectral cutoff; chosen from the tail bound when absent.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Heat kernel through the explicit Bessel product instead of the scaled kernel.
    #[arg(long, requires = "t")]
    pub explicit: bool,
}

#[derive(Debug, Subcommand)]
pub enum AtomCommand {
    /// Build the counterexample atom.
    Build(AtomBuildArgs),
    /// Validate an atom stored as JSON.
    Validate(AtomValidateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AtomBuildArgs {
    /// p ∈ (0,1], decimal or num/den.
    #[arg(long)]
    pub p: String,
    /// Scale A ≥ 1; the support is (0, 1/A).
    #[arg(long = "A")]
    pub a: f64,
    /// δ as num/den; defaults to 1/(8(P+1)).
    #[arg(long)]
    pub delta: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum QNorm {
    #[value(name = "2")]
    #[serde(rename = "2")]
    Two,
    #[value(name = "inf")]
    #[serde(rename = "inf")]
    Inf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AtomValidateArgs {
    /// Atom JSON as written by `atom build`.
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long)]
    pub p: String,
    #[arg(long, value_enum, default_value_t = QNorm::Inf)]
    pub q: QNorm,
    /// Validate the d-fold tensor product.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
}

#[derive(Debug, Subcommand)]
pub enum HardyCommand {
    /// The admissible exponent E for a system.
    Exponent(HardyExponentArgs),
    /// Hardy sum of the counterexample atom.
    Sum(HardySumArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HardyExponentArgs {
    #[arg(long)]
    pub system: Family,
    #[arg(long)]
    pub p: String,
    #[arg(long)]
    pub s: String,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HardySumArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub p: String,
    #[arg(long, default_value = "1")]
    pub s: String,
    #[arg(long = "A")]
    pub a: f64,
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub kmax: usize,
    /// Subtract ε from the exponent.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
}

#[derive(Debug, Subcommand)]
pub enum SharpnessCommand {
    /// Run the growth experiment over a K grid.
    Run(SharpnessRunArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SharpnessRunArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub p: String,
    #[arg(long, default_value = "1")]
    pub s: String,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub kgrid: Vec<usize>,
    #[arg(long)]
    pub delta: Option<String>,
    /// Domain scale c with (0, c) in the domain.
    #[arg(long)]
    pub c: Option<f64>,
    /// Coefficients are computed for k ≤ kcap · K.
    #[arg(long)]
    pub kcap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Regime,
    SignSize,
    DerivativeSup,
    Holder,
    KernelHolder,
    KernelDerivSup,
    CondC,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimatesArgs {
    #[arg(long, value_enum)]
    pub check: Check,
    #[command(flatten)]
    pub system: SystemArgs,
    /// Derivative order j (order k for cond-c).
    #[arg(long, default_value_t = 1)]
    pub j: usize,
    /// Power ℓ for sign-size.
    #[arg(long, default_value_t = 0)]
    pub l: usize,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256")]
    pub kgrid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.7,0.9,0.97,0.985")]
    pub rgrid: Vec<f64>,
}
