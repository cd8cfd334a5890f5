//! `readmit`: command-line front end for the readmission pipeline.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

mod args;
mod commands;
mod config;
mod error;
mod manifest;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::{Cli, Command};
use error::{CliError, CliResult};

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::KbValidate(a) => commands::kb_validate(cli, a),
        Command::Ingest(a) => commands::ingest(cli, a),
        Command::Cohort(a) => commands::cohort(cli, a),
        Command::Split(a) => commands::split(cli, a),
        Command::Abstract(a) => commands::abstract_cmd(cli, a),
        Command::Encode(a) => commands::encode(cli, a),
        Command::Train(a) => commands::train_cmd(cli, a),
        Command::Evaluate(a) => commands::evaluate_cmd(cli, a),
        Command::Compare(a) => commands::compare(cli, a),
        Command::AggregateNotes(a) => commands::aggregate_notes(cli, a),
        Command::Synth(a) => commands::synth(cli, a),
        Command::Pipeline(a) => commands::pipeline(cli, a),
    }
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    if matches!(e, CliError::Usage(_)) {
        eprintln!("\n{}", Cli::command().render_usage());
    }
    e.exit_code()
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match config::inject(argv) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return report(&CliError::Usage(format!("--threads {n}: {e}")));
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
