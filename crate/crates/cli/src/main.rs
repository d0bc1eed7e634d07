use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bridge_cli::optimize::Outcome;
use bridge_cli::{analyze, optimize, report};
use bridge_core::orchestrator::OptimizeSlot;
use clap::{Parser, Subcommand, ValueEnum};

/// Combinatorial Bayesian optimization of demonstration subsets.
#[derive(Debug, Parser)]
#[command(name = "bridge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured optimize/generate loop.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Continue an interrupted run in the same output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Importance scores and ascending/descending sweeps on the initial pool.
    Analyze {
        #[arg(long)]
        config: PathBuf,
    },
    /// Aggregate milestone ledgers across seeds.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Run the loop with a baseline in the optimize slot.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        slot: BaselineSlot,
        #[arg(long)]
        resume: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineSlot {
    Rs,
    Retrieval,
    Diversity,
}

impl From<BaselineSlot> for OptimizeSlot {
    fn from(s: BaselineSlot) -> Self {
        match s {
            BaselineSlot::Rs => OptimizeSlot::Rs,
            BaselineSlot::Retrieval => OptimizeSlot::Retrieval,
            BaselineSlot::Diversity => OptimizeSlot::Diversity,
        }
    }
}

fn print_outcome(outcome: &Outcome) {
    match outcome {
        Outcome::Completed { dir, ledger } => {
            print!("{}", optimize::summary(ledger));
            println!("written to {}", dir.display());
        }
        Outcome::AlreadyComplete { dir } => {
            println!("{} is already complete; nothing to do", dir.display());
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize { config, resume } => print_outcome(&optimize::optimize(&config, resume, None)?),
        Command::Baseline { config, slot, resume } => {
            print_outcome(&optimize::optimize(&config, resume, Some(slot.into()))?)
        }
        Command::Analyze { config } => print!("{}", analyze::summary(&analyze::analyze(&config)?)),
        Command::Report { dir } => {
            let r = report::report(&dir)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", r.to_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
