//! One binary for the whole pipeline: corruption previews, training,
//! evaluation, expansion verification, and the noise ablation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "fae",
    about = "Noise-preserving reconstruction autoencoder for structural anomaly detection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Config file of `key = value` lines; defaults apply for absent keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, repeatable: --set steps=500
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write corruption triples (clean, corrupted, mask) plus an index.
    Gen(CommonArgs),
    /// Train on the synthetic benchmark (or a directory of images).
    Train(CommonArgs),
    /// Score a checkpoint on the held-out test set and render heatmaps.
    Eval(CommonArgs),
    /// Run the loss-expansion checks; nonzero exit iff a mandatory one fails.
    Verify(CommonArgs),
    /// Paired with/without-noise training comparison over several seeds.
    Ablate(CommonArgs),
    /// Print every config key with its default and meaning.
    Keys,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(args) => run(args, commands::gen::run),
        Command::Train(args) => run(args, commands::train::run),
        Command::Eval(args) => run(args, commands::eval::run),
        Command::Verify(args) => run(args, commands::verify::run),
        Command::Ablate(args) => run(args, commands::ablate::run),
        Command::Keys => {
            for (key, default, help) in config::SCHEMA {
                println!("{key:24} {default:16} {help}");
            }
            return ExitCode::SUCCESS;
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Loads the config, echoes it, sizes the worker pool, and dispatches.
/// Commands return whether all their declared checks passed.
fn run(args: &CommonArgs, body: fn(&RunConfig) -> Result<bool>) -> Result<bool> {
    let cfg = RunConfig::load(args.config.as_deref(), &args.set)?;
    let _ = fae_core::init_workers(cfg.workers()?);
    cfg.echo(&cfg.out_dir())?;
    println!("seed = {}", cfg.seed()?);
    println!("config digest = {}", cfg.digest());
    body(&cfg)
}
