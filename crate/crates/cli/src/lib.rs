//! The `addlab` command line: every pipeline stage as a subcommand, each
//! output accompanied by a run manifest.

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod repro;

use std::ffi::OsString;
use std::fmt;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// Invalid flags or flag combinations; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn dispatch(argv: &[String], cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Gen(a) => commands::gen(argv, a),
        Command::Render(a) => commands::render(argv, a),
        Command::Split(a) => commands::split(argv, a),
        Command::Train(a) => commands::train_cmd(argv, a),
        Command::Eval(a) => commands::eval(argv, a),
        Command::Trials(a) => commands::trials(argv, a),
        Command::Sweep(a) => commands::sweep(argv, a),
        Command::Map(a) => commands::map(argv, a),
        Command::Hist(a) => commands::hist(argv, a),
        Command::Carry(a) => commands::carry(argv, a),
        Command::Probe(a) => commands::probe_cmd(argv, a),
        Command::Coverage(a) => commands::coverage(argv, a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Repro(a) => repro::repro(argv, a),
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn run(argv: Vec<OsString>) -> i32 {
    let original: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let expanded = match config::expand(argv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("addlab: error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(expanded) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("addlab: error: --workers must be at least 1");
            return EXIT_USAGE;
        }
        // Fails only if a pool already exists (repeated in-process calls); keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(&original, &cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("addlab: error: {msg}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DOMAIN
            }
        }
    }
}
