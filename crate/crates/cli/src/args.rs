use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ptqtp_core::sweep::SweepParam;
use ptqtp_core::{DType, DecomposeConfig};

/// Two-plane ternary post-training quantization.
#[derive(Debug, Parser)]
#[command(name = "ptqtp", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantize an FPT1 tensor (or every layer of a manifest) into PTQ1.
    Quantize(QuantizeArgs),
    /// Expand a PTQ1 layer back into a dense FPT1 tensor.
    Dequantize(DequantizeArgs),
    /// Error, sparsity and memory summary for a weights/quantized pair, as JSON.
    Stats(StatsArgs),
    /// One decomposition per parameter value; writes a CSV table.
    Sweep(SweepArgs),
    /// Time dense against ternary matrix-vector products, as JSON.
    Bench(BenchArgs),
    /// Check decomposer objectives against exhaustive search on short rows.
    OracleCheck(OracleArgs),
    /// Write a synthetic FPT1 tensor.
    Gen(GenArgs),
    /// Formula-based memory footprint of a model or a single matrix, as JSON.
    Memory(MemoryArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    /// Columns per group.
    #[arg(long, default_value_t = 128)]
    pub group: usize,
    /// Iteration cap.
    #[arg(long, default_value_t = 50)]
    pub tmax: usize,
    /// Convergence tolerance on the largest per-group scale change.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub lambda_init: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_max: f64,
    /// Condition-number estimate that triggers λ escalation.
    #[arg(long, default_value_t = 1e12)]
    pub cond_threshold: f64,
    /// Re-solve the scales once after the last trit update.
    #[arg(long)]
    pub final_refit: bool,
}

impl DecomposeArgs {
    pub fn config(&self) -> DecomposeConfig {
        DecomposeConfig {
            group_size: self.group,
            max_iterations: self.tmax,
            tolerance: self.eps,
            lambda_init: self.lambda_init,
            lambda_max: self.lambda_max,
            condition_threshold: self.cond_threshold,
            final_refit: self.final_refit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F16,
    F32,
}

impl From<Precision> for DType {
    fn from(p: Precision) -> Self {
        match p {
            Precision::F16 => DType::F16,
            Precision::F32 => DType::F32,
        }
    }
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[arg(
        long,
        required_unless_present = "manifest",
        conflicts_with = "manifest",
        requires = "output"
    )]
    pub input: Option<PathBuf>,
    #[arg(long, conflicts_with = "manifest")]
    pub output: Option<PathBuf>,
    /// JSON manifest of named layers; quantizes each `weights` into `quantized`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Where to write the JSON run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// On-disk precision of the scales.
    #[arg(long, value_enum, default_value_t = Precision::F16)]
    pub scale_format: Precision,
    #[command(flatten)]
    pub decompose: DecomposeArgs,
}

#[derive(Debug, Args)]
pub struct DequantizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub dtype: Precision,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(
        long,
        required_unless_present = "manifest",
        conflicts_with = "manifest",
        requires = "quantized"
    )]
    pub weights: Option<PathBuf>,
    #[arg(long, conflicts_with = "manifest")]
    pub quantized: Option<PathBuf>,
    /// Aggregate over every layer of a manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// iters, eps or cond-threshold.
    #[arg(long, value_parser = parse_sweep_param)]
    pub param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub values: Vec<f64>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub csv: PathBuf,
    /// Runs per value; the median wall time is reported.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[command(flatten)]
    pub decompose: DecomposeArgs,
}

fn parse_sweep_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|e: ptqtp_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    #[arg(long, default_value_t = 512)]
    pub d: usize,
    #[arg(long, default_value_t = 128)]
    pub group: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Number of random rows.
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    /// Row length, at most 6.
    #[arg(long, default_value_t = 4)]
    pub len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Zeros,
    Gaussian,
    /// Entries `2·t₁ + t₂` for random trits.
    Representable,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, num_args = 2, value_names = ["N", "D"], required = true)]
    pub shape: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Dist::Gaussian)]
    pub dist: Dist,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub dtype: Precision,
}

#[derive(Debug, Args)]
pub struct MemoryArgs {
    /// llama-7b or llama-13b.
    #[arg(long, conflicts_with = "shape", required_unless_present = "shape")]
    pub preset: Option<String>,
    /// A single `N D` matrix instead of a preset.
    #[arg(long, num_args = 2, value_names = ["N", "D"])]
    pub shape: Option<Vec<u64>>,
    #[arg(long, default_value_t = 128)]
    pub group: u64,
}
