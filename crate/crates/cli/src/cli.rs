//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::report::HeadKind;

#[derive(Debug, Parser)]
#[command(
    name = "tmimi",
    version,
    about = "Transformer-only codec decoder tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded random weight file.
    InitWeights(InitArgs),
    /// Decode a frames file (or random frames) to a 24 kHz PCM16 WAV.
    Decode(DecodeArgs),
    /// Measure per-chunk streaming latency.
    StreamBench(BenchArgs),
    /// Compare precision plans against the fp32 output of the same weights.
    QuantSweep(SweepArgs),
    /// Summarize a weight file.
    Info(InfoArgs),
}

/// Where the model comes from: a weight file, or seeded random weights.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Weight file; overrides --config/--seed.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Preset name or JSON config file, used for random weights.
    #[arg(long, default_value = "t-mimi-12x2048")]
    pub config: String,
    /// Seed for random weights.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct InitArgs {
    /// Preset name (t-mimi-12x2048, t-mimi-8, t-mimi-12x3072,
    /// t-mimi-16x2048) or JSON config file.
    #[arg(long, default_value = "t-mimi-12x2048")]
    pub config: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Storage precision plan, e.g. `T1-10:int8,T11-12:fp32,L:fp32`.
    #[arg(long, default_value = "fp32")]
    pub plan: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// TMFR frames file.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    pub frames: Option<PathBuf>,
    /// Decode this many random token frames instead of a file.
    #[arg(long)]
    pub random: Option<usize>,
    /// Seed for --random.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Precision plan for random weights (a weight file keeps its own).
    #[arg(long)]
    pub plan: Option<String>,
    /// Measured chunks.
    #[arg(long, default_value_t = 500)]
    pub chunks: usize,
    /// Discarded chunks before measuring.
    #[arg(long, default_value_t = 20)]
    pub warmup: usize,
    #[arg(long, value_enum, default_value_t = HeadKind::Transformer)]
    pub head: HeadKind,
    /// Frames the deconvolution baseline recomputes per step.
    #[arg(long, default_value_t = 3)]
    pub deconv_context: usize,
    /// Seed for the benchmark frames.
    #[arg(long, default_value_t = 1)]
    pub frame_seed: u64,
    /// Pin the benchmark thread to this core (Linux only).
    #[arg(long)]
    pub pin: Option<usize>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `builtin-ladder`, or a file with one plan per line (`#` comments).
    #[arg(long, default_value = "builtin-ladder")]
    pub plans: String,
    /// TMFR frames file.
    #[arg(long, conflicts_with = "random")]
    pub frames: Option<PathBuf>,
    /// Number of random token frames when no file is given.
    #[arg(long, default_value_t = 8)]
    pub random: usize,
    #[arg(long, default_value_t = 1)]
    pub frame_seed: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub json: bool,
}
