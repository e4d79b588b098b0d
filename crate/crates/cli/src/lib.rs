//! Command-line front end: reads a JSON run configuration, dispatches to the
//! library and emits JSON, CSV or DOT.
//!
//! Exit codes: 0 on success, 1 when a check or cross-check fails, 2 on
//! configuration errors.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Core(#[from] cournot_lre::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use cournot_lre::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Check(_) => 1,
            CliError::Core(e) => match e {
                E::InvalidModel(_)
                | E::InvalidGame(_)
                | E::InvalidConfig(_)
                | E::Precondition(_)
                | E::GridTooCoarse(_)
                | E::StateSpaceTooLarge { .. } => 2,
                _ => 1,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(Debug, Parser)]
#[command(name = "cournot-lre", version, about = "Long-run equilibria of Cournot oligopolies with rule revision")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `simulation.seed` (and seeds the randomized checks).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the cost of a rule mistake relative to an action mistake.
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Comma-separated mistake rates, overriding `simulation.epsilon_sweep`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub epsilon_sweep: Option<Vec<f64>>,
    /// Directory for output files; results are also printed.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Benchmark quantities, advantage sets, descent sequences and bounds.
    Bench,
    /// Long-run equilibria from minimum resistance trees.
    Analyze,
    /// Monte Carlo occupancy of the perturbed process.
    Simulate,
    /// Pass/fail suite of structural and cross-checks.
    Verify,
    /// Quasi-submodularity, aggregate-taking strategy and LRE of an aggregative game.
    Aggregative,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.common.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let config = config::load(path)?;
    let out = cli.common.out.clone().or_else(|| config.output.dir.as_ref().map(PathBuf::from));
    let sink = output::Sink::new(out.as_deref())?;
    let ctx = commands::Context { config: &config, args: &cli.common, sink: &sink };
    match cli.command {
        Command::Bench => commands::bench(&ctx),
        Command::Analyze => commands::analyze(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Aggregative => commands::aggregative(&ctx),
    }
}
