use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use heliodet_cli as cli;

#[derive(Parser)]
#[command(name = "heliodet", version, about = "Grid detector toolkit: synthesize, augment, train, detect, evaluate")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Primary output: dataset root (synth), weights file (train), or JSON
    /// report (detect, eval, bench, gradcheck).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth(Common),
    /// Re-split an existing dataset into train and test.
    Split(Common),
    /// Add augmented copies of every training image.
    Augment(Common),
    /// Train a detector.
    Train(Common),
    /// Detect objects in one PPM image.
    Detect(Common),
    /// Evaluate weights on a dataset split.
    Eval(Common),
    /// Measure per-image latency.
    Bench(Common),
    /// Run the finite-difference gradient checks.
    Gradcheck(Common),
}

fn load(common: &Common) -> anyhow::Result<cli::RunConfig> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| heliodet::Error::io(p, e))?,
        None => "{}".to_string(),
    };
    let mut cfg = cli::parse_config(&text)
        .with_context(|| format!("in {}", common.config.as_deref().unwrap_or("<defaults>".as_ref()).display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(args: Args) -> anyhow::Result<()> {
    let (common, f): (&Common, fn(&cli::RunConfig) -> anyhow::Result<()>) = match &args.command {
        Command::Synth(c) => (c, cli::synth),
        Command::Split(c) => (c, cli::split),
        Command::Augment(c) => (c, cli::augment),
        Command::Train(c) => (c, cli::train_cmd),
        Command::Detect(c) => (c, cli::detect_cmd),
        Command::Eval(c) => (c, cli::eval),
        Command::Bench(c) => (c, cli::bench),
        Command::Gradcheck(c) => (c, cli::gradcheck_cmd),
    };
    let mut cfg = load(common)?;
    if let Some(out) = &common.out {
        match &args.command {
            Command::Synth(_) => cfg.dataset = Some(out.clone()),
            Command::Train(_) => cfg.weights = Some(out.clone()),
            Command::Split(_) | Command::Augment(_) => {
                anyhow::bail!("--out is not accepted here; the dataset is updated in place")
            }
            _ => cfg.report = Some(out.clone()),
        }
    }
    f(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(cli::exit_code(&e))
        }
    }
}
