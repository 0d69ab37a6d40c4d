//! `eivdc` command-line entry point.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 estimation, 5 calibration.
//! On failure the last line on standard error is a JSON object
//! `{"error": {"class": ..., "message": ...}}`.

mod args;
mod commands;
mod config;

use clap::Parser;
use eivdc::ErrorClass;

use args::{Cli, Command};
use config::FileConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(eivdc::Error),
}

impl From<eivdc::Error> for CliError {
    fn from(e: eivdc::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn class(&self) -> ErrorClass {
        match self {
            CliError::Usage(_) => ErrorClass::Usage,
            CliError::Core(e) => e.class(),
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    if let Some(n) = cli.threads.or(file.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set thread count: {e}")))?;
    }
    let seed = match cli.seed.or(file.seed) {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            s
        }
    };
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &file, seed),
        Command::Estimate(a) => commands::estimate(a, &file, seed),
        Command::Mc(a) => commands::mc(a, &file, seed),
        Command::ExpandWindow(a) => commands::expand_window(a, &file, seed),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                ErrorClass::Usage.exit_code()
            } else {
                0
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        let class = e.class();
        eprintln!("error: {}", e.message());
        eprintln!(
            "{}",
            serde_json::json!({ "error": { "class": class.as_str(), "message": e.message() } })
        );
        std::process::exit(class.exit_code());
    }
}
