//! `irsolve` command-line driver.
//!
//! Exit codes: 0 success, 1 error, 2 no convergence, 64 usage error,
//! 65 malformed or insufficient input data, 74 I/O error.

pub mod args;
mod commands;
pub mod error;
pub mod run;

use args::{Cli, Command};
use clap::Parser;
use error::{exit, CliError};
use std::ffi::OsString;
use std::io::Write;

/// Parses `args` (including the program name) and runs the command, writing
/// results to stdout. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_with(args, &mut lock)
}

/// Like [`run`], writing results to `out`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("irsolve: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Solve(a) => commands::solve(a, out),
        Command::Bench(a) => commands::bench(a, out),
        Command::SweepPerturb(a) => commands::sweep(a, out),
        Command::IdleReport(a) => commands::idle_report(a, out),
        Command::PlotData(a) => commands::plot_data(a, out),
    }
}

/// Logs go to stderr at a level set only by `-v`; the environment is not read.
fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}
