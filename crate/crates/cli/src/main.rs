//! `ptqtp` command-line tool.
//!
//! Exit codes: 0 success, 1 failed check (`oracle-check`), 2 data error
//! (unreadable, malformed or mismatched files), 3 usage error (bad flags or
//! flag combinations). `PTQTP_THREADS` sets the worker count.

mod args;
mod commands;
mod manifest;
mod report;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// Invalid flag values detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_USAGE: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<ptqtp_core::Error>() {
            return match e {
                ptqtp_core::Error::InvalidConfig(_) | ptqtp_core::Error::InvalidArgument(_) => {
                    EXIT_USAGE
                }
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

fn configure_threads() -> Result<(), UsageError> {
    let Ok(raw) = std::env::var("PTQTP_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        UsageError(format!(
            "PTQTP_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| UsageError(e.to_string()))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Quantize(a) => commands::quantize(a)?,
        Command::Dequantize(a) => commands::dequantize(a)?,
        Command::Stats(a) => commands::stats(a)?,
        Command::Sweep(a) => commands::sweep(a)?,
        Command::Bench(a) => commands::bench(a)?,
        Command::OracleCheck(a) => return commands::oracle_check(a),
        Command::Gen(a) => commands::gen(a)?,
        Command::Memory(a) => commands::memory(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
