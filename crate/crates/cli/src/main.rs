//! `ambig-pricer`: price, hedge and verify from a TOML run configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::SideChoice;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ambig-pricer", version, about = "Utility-indifference bid/ask prices under drift ambiguity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for bid and/or ask surfaces (plus the exercise boundary for American claims).
    Price(Common),
    /// Simulate the replication error of the delta hedge.
    Hedge(Common),
    /// Run the equality suite, bound audit and convergence sweep.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run a single part.
        #[arg(long, value_enum)]
        only: Option<Part>,
    },
    /// Convergence sweep over `verify.kappas`.
    Converge(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Part {
    Equality,
    Bounds,
    Convergence,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    side: Option<SideChoice>,
    /// Output file or prefix (directory for `verify`); defaults to `output.path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config value, e.g. `--set grid.nx=401`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Override `oracle.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut sets = self.sets.clone();
        if let Some(side) = self.side {
            let name = match side {
                SideChoice::Bid => "bid",
                SideChoice::Ask => "ask",
                SideChoice::Both => "both",
            };
            sets.push(format!("solver.side=\"{name}\""));
        }
        if let Some(seed) = self.seed {
            sets.push(format!("oracle.seed={seed}"));
        }
        sets
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("AMBIG_PRICER_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("AMBIG_PRICER_THREADS={raw:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Price(c) => commands::price(&c),
        Command::Hedge(c) => commands::hedge(&c),
        Command::Verify { common, only } => commands::verify(&common, only),
        Command::Converge(c) => commands::converge(&c),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
