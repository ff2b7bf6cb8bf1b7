//! Command-line driver for the `eklab` experiments. [`run`] parses an argument
//! vector, executes one subcommand on a worker pool of the requested size and
//! returns the process exit code.

pub mod analysis;
pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod report;

use std::ffi::OsString;
use std::time::Instant;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::commands::Invocation;
use crate::error::{CliError, CliResult};

fn dispatch(cli: &Cli, argv: &[String]) -> CliResult<()> {
    let inv = Invocation {
        argv,
        manifest: cli.manifest.as_deref(),
        started: Instant::now(),
    };
    match &cli.command {
        Command::Sieve(a) => commands::sieve(a, &inv),
        Command::Ekhist(a) => commands::ekhist(a, &inv),
        Command::Moments(a) => commands::moments(a, &inv),
        Command::Dcount(a) => commands::dcount(a, &inv),
        Command::Eqerror(a) => commands::eqerror(a, &inv),
        Command::Hypotheses(a) => commands::hypotheses(a, &inv),
        Command::SampleModel(a) => commands::sample_model_cmd(a, &inv),
        Command::Report(a) => report::report(a, &inv),
    }
}

fn execute(cli: &Cli, argv: &[String]) -> CliResult<()> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::param("threads", "must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::param("threads", e.to_string()))?;
    pool.install(|| dispatch(cli, argv))
}

/// Runs one command line; the first element is the program name.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            let e = e.normalize();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
