//! The `lfgp` command-line tool: dataset generation, fitting, prediction,
//! timing benchmarks and strategy backtests. Each subcommand is also
//! callable as a function so that tests can drive it in-process.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod svg;

use std::ffi::OsString;

use clap::{CommandFactory, FromArgMatches};

pub use args::Cli;
pub use commands::run;
pub use error::{CliError, CliResult};

/// The argument parser with self-overriding flags on every subcommand, so
/// that flags typed after config-file values replace them.
pub fn command() -> clap::Command {
    let mut cmd = Cli::command().args_override_self(true);
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in &names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    cmd
}

#[derive(Debug)]
pub enum ParseError {
    /// Usage errors, `--help` and `--version`; clap prints and exits.
    Clap(clap::Error),
    Cli(CliError),
}

/// Parses `argv` (program name first) after merging any `--config` file.
pub fn parse(argv: Vec<OsString>) -> Result<Cli, ParseError> {
    let cmd = command();
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let argv = config::expand_args(argv, &names).map_err(ParseError::Cli)?;
    let matches = cmd.try_get_matches_from(argv).map_err(ParseError::Clap)?;
    Cli::from_arg_matches(&matches).map_err(ParseError::Clap)
}
