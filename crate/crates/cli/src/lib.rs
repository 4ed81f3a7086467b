//! Command-line front end for the `faceparse` pipeline.
//!
//! Every batch subcommand writes its outputs under `--out` together with a
//! `run_record.json` holding the resolved profile, the seeds and the digests
//! of every input file. `serve` exposes the annotation API (see [`serve`]).

pub mod args;
pub mod commands;
pub mod record;
pub mod serve;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] faceparse::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &faceparse::Error) -> i32 {
    use faceparse::Error::*;
    match e {
        Config(_) => EXIT_USAGE,
        Data(_) | Checkpoint(_) | Io { .. } | InvalidArgument(_) | Shape(_) => EXIT_DATA,
        Geometry(_) | Training { .. } => EXIT_INTERNAL,
        Stage { source, .. } => core_exit_code(source),
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match commands::dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
