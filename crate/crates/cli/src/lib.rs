//! Command-line driver: ingestion, configuration, the fit / select /
//! simulate / bootstrap / recovery / evaluate commands and plot-data export.

pub mod args;
pub mod commands;
pub mod error;
pub mod export;
pub mod ingest;
pub mod output;

use std::ffi::OsString;

use clap::Parser;

pub use error::{CliError, CliResult};

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = args::expand_config(args.into_iter().map(Into::into).collect())?;
    let cli = match args::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    commands::run(cli.command)
}
