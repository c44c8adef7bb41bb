//! Experiment driver for the `rwre` laboratory: configuration parsing,
//! tabulation, Monte Carlo runs and acceptance checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod commands;
pub mod config;
pub mod table;

use std::io::Write;

use thiserror::Error;

pub use cli::Cli;
pub use commands::{Outcome, Status};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] rwre_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Exit code for validation and I/O failures.
pub const EXIT_INVALID: i32 = 1;

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs a parsed command inside a pool of `cli.workers` threads.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let workers = cli.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::Validation("worker count must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| match &cli.command {
        cli::Command::Eval(a) => commands::eval(a, workers),
        cli::Command::Simulate(a) => commands::simulate(a, workers),
        cli::Command::Figure(a) => commands::figure(a, workers),
        cli::Command::Check(a) => commands::check(a),
    })
}

/// Executes, writes outputs and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let out = match execute(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let mut written = Ok(());
    for (path, text) in &out.files {
        written = written.and_then(|_| std::fs::write(path, text));
    }
    written = written.and_then(|_| match &out.output {
        Some(p) => std::fs::write(p, &out.text),
        None => std::io::stdout().lock().write_all(out.text.as_bytes()),
    });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_INVALID;
    }
    for m in &out.messages {
        eprintln!("{m}");
    }
    out.status.exit_code()
}
