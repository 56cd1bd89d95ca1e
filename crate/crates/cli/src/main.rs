#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod verify;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};
use qubobench::Error;

use args::{Cli, Command};

const EXIT_FAILURE: u8 = 1;
const EXIT_GUARD: u8 = 2;
const EXIT_NO_EMBEDDING: u8 = 3;
const EXIT_CONFIG: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Guard(_) => EXIT_GUARD,
        Error::NoEmbedding(_) | Error::CliqueCapacity { .. } => EXIT_NO_EMBEDDING,
        Error::Config(_) | Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn parse(argv: Vec<OsString>) -> Result<Cli, ExitCode> {
    let cmd = Cli::command();
    let argv = match config::config_path(&argv) {
        Some(path) => config::merge(&cmd, argv, &PathBuf::from(path)).map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        })?,
        None => argv,
    };
    let matches = cmd.try_get_matches_from(argv).map_err(|e| {
        let _ = e.print();
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
            _ => ExitCode::from(EXIT_CONFIG),
        }
    })?;
    Cli::from_arg_matches(&matches).map_err(|e| {
        let _ = e.print();
        ExitCode::from(EXIT_CONFIG)
    })
}

fn init_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("QUBOBENCH_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("QUBOBENCH_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e));
    }
    let result = match &cli.command {
        Command::Lattice(a) => commands::lattice(a),
        Command::Qubo(a) => commands::qubo(a),
        Command::Solve(a) => commands::solve(a),
        Command::Embed(a) => commands::embed(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Scale(a) => commands::scale(a),
        Command::Report(a) => commands::report(a),
        Command::Verify(a) => {
            return if verify::run(a.seed) { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILURE) }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
