//! Command-line front end: `prepare`, `run`, `sweep` and `mask-report`.

pub mod args;
pub mod config;
pub mod dataset;
pub mod error;
pub mod mask_report;
pub mod output;
pub mod prepare;
pub mod run;
pub mod sweep;
pub mod table;

use std::ffi::OsString;

use clap::Parser;

use args::{Cli, Command};
use error::{CliResult, EXIT_OK, EXIT_USAGE};

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    let quiet = cli.quiet;
    match &cli.command {
        Command::Prepare(a) => prepare::prepare(a, quiet),
        Command::Run(a) => run::run(a, quiet),
        Command::Sweep(a) => sweep::sweep(a, quiet),
        Command::MaskReport(a) => mask_report::mask_report(a, quiet),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
