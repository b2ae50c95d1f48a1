//! Command-line front end: argument parsing, run configuration, manifests
//! and the subcommands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;

use args::{Cli, Command};

/// Parses `argv` and runs it; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if cli.print_default_config {
        commands::print_default_config();
        return Ok(());
    }
    match cli.command {
        None => Err(CliError::Usage(
            "no subcommand given; try `inrecon --help`".into(),
        )),
        Some(Command::Simulate(a)) => commands::simulate(&a),
        Some(Command::Mask(a)) => commands::mask(&a),
        Some(Command::Recon(a)) => commands::recon(&a),
        Some(Command::Eval(a)) => commands::eval(&a),
        Some(Command::Ablate(a)) => commands::ablate(&a),
        Some(Command::Sweep(a)) => commands::sweep(&a),
        Some(Command::Export(a)) => commands::export(&a),
    }
}
