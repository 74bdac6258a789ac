//! `red-sure`: train, evaluate and verify the denoising-regularized
//! regression pipeline from the command line.
//!
//! Subcommands: `train`, `evaluate`, `denoise`, `synth`, `verify`, `sweep`.
//! Every command is deterministic given its configuration; wall-clock
//! timestamps go only into `run_meta.json`, never into primary outputs.

mod commands;
mod common;
mod config;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "red-sure",
    version,
    about = "Feature denoising with an unbiased risk loss, regression, and verification suites"
)]
struct Cli {
    /// JSON config file; command-line flags override its values
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,

    /// Base RNG seed (overrides the config file's seed)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,

    /// Suppress progress output (results and warnings still print)
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the denoise-then-regress pipeline
    Train(commands::train::TrainArgs),
    /// Evaluate a model (optionally through a denoiser) on feature/target files
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Dump denoised features for a feature file
    Denoise(commands::denoise::DenoiseArgs),
    /// Generate a synthetic dataset with known clean signal
    Synth(commands::synth::SynthArgs),
    /// Run the verification suites (risk unbiasedness, divergence accuracy,
    /// gradient checks, weight-decay checks, entropy oracles)
    Verify(commands::verify::VerifyArgs),
    /// Train across a lambda x seed grid and emit a plot-ready CSV
    Sweep(commands::sweep::SweepArgs),
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let ctx = common::Context {
        config_path: cli.config,
        seed: cli.seed,
        out: cli.out,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Train(args) => commands::train::run(&ctx, args),
        Command::Evaluate(args) => commands::evaluate::run(&ctx, args),
        Command::Denoise(args) => commands::denoise::run(&ctx, args),
        Command::Synth(args) => commands::synth::run(&ctx, args),
        Command::Verify(args) => commands::verify::run(&ctx, args),
        Command::Sweep(args) => commands::sweep::run(&ctx, args),
    }
}
