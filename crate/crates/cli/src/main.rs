use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use commands::Which;
use config::{Experiment, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(#[from] subfrac_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

/// Exit status for a run whose report shows a failed check.
const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "subfrac",
    version,
    about = "Time-changed Markov semigroups: solver, Monte Carlo and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the memory equation on the config grid.
    Solve(Common),
    /// Monte Carlo estimate of the solution at every grid node.
    Mc(Common),
    /// Run one verifier and write its JSON report.
    Verify {
        #[arg(value_enum)]
        which: Which,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep a kernel family towards its limit equation.
    Converge(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output path prefix; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<Experiment, CliError> {
        let overrides = Overrides {
            out: self.out.clone(),
            seed: self.seed,
            samples: self.samples,
        };
        Experiment::load(&self.config, &overrides)
    }
}

fn run(cli: Cli) -> commands::Verdict {
    match cli.command {
        Command::Solve(c) => commands::cmd_solve(&c.load()?),
        Command::Mc(c) => commands::cmd_mc(&c.load()?),
        Command::Verify { which, common } => commands::cmd_verify(&common.load()?, which),
        Command::Converge(c) => commands::cmd_converge(&c.load()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed; see the written report");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(e) => {
            eprintln!("subfrac: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
