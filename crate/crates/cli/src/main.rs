mod commands;
mod config;
mod dataset;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stegadv_core::coder::EmbedMode;
use stegadv_core::exec;

#[derive(Debug, Parser)]
#[command(name = "stegadv", version, about = "Adversarial cost enhancement for JPEG steganography")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Global {
    /// Base seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for data-parallel stages; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compress a directory of PGM images into baseline JPEG covers.
    Compress(CompressArgs),
    /// Run the adversarial training loop and write a run directory.
    Train(TrainArgs),
    /// Two-phase greedy sweep over p, then alpha.
    Sweep(SweepArgs),
    /// Generate stegos for new covers from a trained chain.
    Generate(GenerateArgs),
    /// Hide a message with syndrome-trellis coding.
    Embed(EmbedArgs),
    /// Recover a message hidden by `embed`.
    Extract(ExtractArgs),
    /// Modification rates, frequency histogram and selection overlays for a generate output.
    Metrics(MetricsArgs),
    /// Train a fresh analyzer on cover/stego pairs and report held-out accuracy.
    Evaluate(EvaluateArgs),
    /// Print the header of a container, model, JPEG or run directory.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=100))]
    pub qf: u8,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone, Default)]
pub struct LoopArgs {
    /// JSON file with run settings; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Quality factor used to pick default T, p and alpha; read from the covers when absent.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=100))]
    pub qf: Option<u8>,
    #[arg(long)]
    pub payload: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub covers: PathBuf,
    #[command(flatten)]
    pub common: LoopArgs,
    /// Number of rounds (T ≥ 2).
    #[arg(long = "T", visible_alias = "iterations")]
    pub t: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub covers: PathBuf,
    #[command(flatten)]
    pub common: LoopArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,1.0")]
    pub p_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1.5,2.0,2.5,3.0")]
    pub alpha_grid: Vec<f64>,
    /// Alpha held fixed while p is swept.
    #[arg(long, default_value_t = 2.5)]
    pub fixed_alpha: f64,
    /// Rounds per p setting.
    #[arg(long, default_value_t = 8)]
    pub p_rounds: usize,
    /// Rounds per alpha setting.
    #[arg(long, default_value_t = 16)]
    pub alpha_rounds: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub covers: PathBuf,
    /// Payload in bits per nonzero AC coefficient; defaults to the chain's.
    #[arg(long)]
    pub payload: Option<f64>,
    #[arg(long, value_enum, default_value = "simulate")]
    pub mode: ModeArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    Simulate,
    Stc,
}

impl From<ModeArg> for EmbedMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Simulate => EmbedMode::Simulate,
            ModeArg::Stc => EmbedMode::Stc,
        }
    }
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub cover: PathBuf,
    /// File whose bytes are hidden.
    #[arg(long)]
    pub message: PathBuf,
    #[arg(long)]
    pub key: u64,
    /// Use the enhanced cost of this run directory instead of plain J-UNIWARD.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long, default_value_t = stegadv_core::coder::DEFAULT_STC_HEIGHT)]
    pub height: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub stego: PathBuf,
    #[arg(long)]
    pub key: u64,
    /// Message length in bytes.
    #[arg(long)]
    pub bytes: usize,
    #[arg(long, default_value_t = stegadv_core::coder::DEFAULT_STC_HEIGHT)]
    pub height: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Output directory of `generate`.
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub covers: PathBuf,
    /// Skip the per-round selection overlays.
    #[arg(long)]
    pub no_overlays: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub covers: PathBuf,
    /// Stegos paired with covers by file stem.
    #[arg(long)]
    pub stegos: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub test_fraction: f64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value = "run")]
    pub run_id: String,
    #[arg(long, default_value_t = 0)]
    pub iteration: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let global = cli.global.clone();
    let result = exec::with_threads(global.threads, move || match cli.command {
        Command::Compress(a) => commands::compress(&global, &a),
        Command::Train(a) => commands::train(&global, &a),
        Command::Sweep(a) => commands::sweep(&global, &a),
        Command::Generate(a) => commands::generate(&global, &a),
        Command::Embed(a) => commands::embed(&global, &a),
        Command::Extract(a) => commands::extract(&global, &a),
        Command::Metrics(a) => commands::metrics(&global, &a),
        Command::Evaluate(a) => commands::evaluate(&global, &a),
        Command::Inspect(a) => commands::inspect(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
