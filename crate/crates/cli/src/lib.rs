//! Experiment runner behind the `pinnbias` binary.

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod plot;
pub mod suite;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

use crate::cli::{Cli, Command};
use crate::commands::Context;
use crate::error::exit;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => exit::USAGE,
            };
        }
    };
    let ctx = Context {
        out_dir: cli.out_dir,
        quiet: cli.quiet,
    };
    let result = match &cli.command {
        Command::Train(a) => commands::train(&ctx, a),
        Command::Suite(a) => commands::suite(&ctx, a),
        Command::Spectrum(a) => commands::spectrum(&ctx, a),
        Command::Ntk(a) => commands::ntk(&ctx, a),
        Command::Plot(a) => commands::plot(&ctx, a),
        Command::Compare(a) => commands::compare(&ctx, a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
