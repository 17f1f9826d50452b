//! `breaklab`: simulate break DGPs, compute break statistics, tabulate
//! limit functionals and run Monte Carlo studies.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or spec error, 3 numerical
//! failure. Diagnostics go to stderr; machine output to files or stdout.

mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::commands::Failure;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            eprint!("{e}");
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            log::error!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Break(e)) => {
            log::error!("{e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = if quiet {
        log::LevelFilter::Error
    } else {
        match verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("BREAKLAB_LOG")
        .format_timestamp(None)
        .format_target(false)
        .init();
}
