//! The `modix` command line. `main.rs` only forwards to [`run`].

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use clap::Parser;

pub mod args;
pub mod commands;
pub mod error;

pub use args::{Cli, Command};
pub use error::CliError;

/// Executes a parsed command and returns the bytes it would emit.
pub fn execute(cli: &Cli) -> Result<Vec<u8>, CliError> {
    match &cli.command {
        Command::Analyze(a) => commands::analyze_cmd(a),
        Command::Rescale(a) => commands::rescale_cmd(a),
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
        Command::Gen(a) => commands::gen_cmd(a),
    }
}

fn output_path(cli: &Cli) -> Option<&Path> {
    match &cli.command {
        Command::Analyze(a) => a.output.output.as_deref(),
        Command::Rescale(a) => a.output.output.as_deref(),
        Command::Simulate(a) => a.output.output.as_deref(),
        Command::Sweep(a) => a.output.output.as_deref(),
        // gen writes its own file.
        Command::Gen(_) => None,
    }
}

fn emit(cli: &Cli, bytes: &[u8]) -> Result<(), CliError> {
    match output_path(cli) {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| CliError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))),
        None if bytes.is_empty() => Ok(()),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli).and_then(|bytes| emit(&cli, &bytes)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("modix: {e}");
            e.exit_code()
        }
    }
}
