//! `cqmap`: command-line front end for the mapping, spectral and annealing
//! pipelines. Exit codes: 0 ok, 1 validation, 2 numerical, 3 resource.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind as ClapKind;
use clap::Parser;
use cqmap_core::{Error, ErrorKind};

const THREADS_VAR: &str = "CQMAP_THREADS";

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Numerical => 2,
        ErrorKind::Resource => 3,
    }
}

fn configure_threads() -> Result<(), Error> {
    let threads = match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => t,
            _ => {
                return Err(Error::Validation(format!(
                    "{THREADS_VAR} must be a positive integer, got {v:?}"
                )))
            }
        },
        Err(std::env::VarError::NotPresent) => 1,
        Err(e) => return Err(Error::Validation(format!("{THREADS_VAR}: {e}"))),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ClapKind::DisplayHelp | ClapKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("cqmap: {e}");
        return ExitCode::from(exit_code(e.kind()));
    }
    let op = commands::operation(&cli.command);
    match commands::run(cli.command) {
        Ok(summary) => {
            if output::stdout_used() {
                eprintln!("{op}: {summary}");
            } else {
                println!("{op}: {summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cqmap {op}: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
