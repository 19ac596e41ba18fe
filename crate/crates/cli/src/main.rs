//! `calibra` command line entry point.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{Command, Format, RunConfig};

#[derive(Parser)]
#[command(name = "calibra", version, about = "Audit, learn and stress-test multi-group calibration guarantees")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Generate random instances.
    Generate(Common),
    /// Audit a predictor in an instance.
    Audit(Common),
    /// Learn a multi-accurate or multi-calibrated predictor.
    Learn(Common),
    /// Certify a decision rule's affineness and Lipschitz constant.
    Rules(Common),
    /// Post-process a predictor into a loss-minimizing action.
    Omnipredict(Common),
    /// Run a keyed conflict experiment.
    Hardness(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Replace the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output` or `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated report formats.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<Format>>,
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::Generate(c) => (Command::Generate, c),
            Sub::Audit(c) => (Command::Audit, c),
            Sub::Learn(c) => (Command::Learn, c),
            Sub::Rules(c) => (Command::Rules, c),
            Sub::Omnipredict(c) => (Command::Omnipredict, c),
            Sub::Hardness(c) => (Command::Hardness, c),
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CALIBRA_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("CALIBRA_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    Ok(())
}

/// Returns whether any verdict failed.
fn run(cmd: Command, args: Common) -> Result<bool> {
    init_threads()?;
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seeds = vec![s];
    }
    cfg.validate(cmd)?;
    let formats = args.format.or_else(|| cfg.formats.clone()).unwrap_or_else(|| vec![Format::Json, Format::Csv]);
    let out_dir = args.out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let artifacts = commands::execute(cmd, &cfg, &formats)?;
    for (rel, body) in &artifacts.files {
        let path = out_dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(artifacts.failed)
}

fn main() -> ExitCode {
    let (cmd, args) = Cli::parse().command.split();
    match run(cmd, args) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
