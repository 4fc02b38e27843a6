use std::path::PathBuf;

use clap::Parser;
use gapfield_cli::{main_with, Command};

/// Floating-potential gap solver: solve, sweep, oracle, verify, report.
#[derive(Parser)]
#[command(name = "gapfield", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config and the GAPFIELD_OUT variable.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
}

fn main() {
    let args = Args::parse();
    let code = main_with(
        args.command,
        &args.config,
        args.out.as_deref(),
        args.workers.map(|w| w as usize),
    );
    std::process::exit(code);
}
