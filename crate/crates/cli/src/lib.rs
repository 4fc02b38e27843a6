//! Run orchestration for the gapfield solver: configuration, commands, and
//! the on-disk result store.

pub mod commands;
pub mod config;
pub mod store;

use std::path::{Path, PathBuf};

use gapfield::GapError;
use thiserror::Error;

pub use commands::{run, Command, Outcome};
pub use config::{parse_config, parse_config_str, RunConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_ACCEPTANCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error(transparent)]
    Solver(#[from] GapError),
    #[error("result store: {0}")]
    Store(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Store(_) => EXIT_CONFIG,
            CliError::Solver(_) | CliError::Io(_) => EXIT_SOLVER,
        }
    }
}

/// Output directory: flag, then environment, then config, then default.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(config::OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(config::DEFAULT_OUT_DIR))
}

/// Parse, run, print; returns the process exit status.
pub fn main_with(cmd: Command, config: &Path, out: Option<&Path>, workers: Option<usize>) -> i32 {
    let cfg = match parse_config(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let out = resolve_out_dir(out, &cfg);
    match run(cmd, &cfg, &out, workers) {
        Ok(o) => {
            for l in &o.lines {
                println!("{l}");
            }
            if o.pass {
                EXIT_PASS
            } else {
                EXIT_ACCEPTANCE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
