//! `lumitrace`: command-line front end for the contact-tracing toolkit.
//! Every command writes machine-parseable CSV to stdout (or `--out`) and
//! keeps diagnostics on stderr; given the same flags and seed the output
//! is byte-identical across runs.

mod commands;
mod config;

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input files: exit code 2.
    Input(String),
    /// Unexpected internal failures: exit code 1.
    Internal(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        CliError::Internal(msg.into())
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Internal(msg) => f.write_str(msg),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "lumitrace",
    version,
    about = "Infrastructure-based contact tracing: ID derivation, radio calibration, \
             lifetime prediction, accuracy sweeps, scenarios, and the authority service"
)]
struct Cli {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master RNG seed for seeded commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write the command's CSV output to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive ephemeral IDs: one packet, or a deterministic vector batch.
    Idgen(commands::idgen::Args),
    /// Fit the propagation model to measured (tx, distance, RSS) samples.
    Calibrate(commands::calibrate::Args),
    /// Predict beacon lifetime under one or more lighting profiles.
    Lifetime(commands::lifetime::Args),
    /// Sweep distance-estimation accuracy over beacon counts.
    Accuracy(commands::accuracy::Args),
    /// Run a scripted end-to-end scenario file.
    Scenario(commands::scenario::Args),
    /// Serve the authority ingest/publish API over TCP.
    Serve(commands::serve::Args),
    /// Match a scan log against a published-list snapshot.
    Reconcile(commands::reconcile::Args),
}

/// Where command output goes; stdout unless `--out` redirects it.
pub struct Output {
    target: Box<dyn Write>,
}

impl Output {
    fn create(path: &Option<PathBuf>) -> Result<Self, CliError> {
        let target: Box<dyn Write> = match path {
            None => Box::new(std::io::stdout()),
            Some(p) => Box::new(
                File::create(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
            ),
        };
        Ok(Output { target })
    }

    pub fn write_all(&mut self, text: &str) -> Result<(), CliError> {
        self.target
            .write_all(text.as_bytes())
            .and_then(|_| self.target.flush())
            .map_err(|e| CliError::internal(format!("writing output: {e}")))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = config::RunConfig::load(cli.config.as_deref())?;
    config.echo(cli.seed);
    let mut output = Output::create(&cli.out)?;
    match cli.command {
        Command::Idgen(args) => commands::idgen::run(&args, &config, cli.seed, &mut output),
        Command::Calibrate(args) => commands::calibrate::run(&args, &config, &mut output),
        Command::Lifetime(args) => commands::lifetime::run(&args, &config, &mut output),
        Command::Accuracy(args) => commands::accuracy::run(&args, &config, cli.seed, &mut output),
        Command::Scenario(args) => commands::scenario::run(&args, &config, &mut output),
        Command::Serve(args) => commands::serve::run(&args, &config),
        Command::Reconcile(args) => commands::reconcile::run(&args, &config, &mut output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
