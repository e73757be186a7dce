//! `toolsight` — generate benchmarks and datasets, run scripted policies,
//! score trajectories, self-check, and step episodes by hand.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "toolsight", version, about = "Tool-use environment for visual reasoning agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// RNG seed; falls back to $CODEVISION_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    Mvtool,
    Orientation,
    Diagnostic,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a benchmark: manifest JSONL plus content-addressed images.
    GenBench {
        #[arg(long, value_enum)]
        kind: BenchKind,
        #[arg(long)]
        n: usize,
        /// Scene count for mvtool (default: one per 25 items).
        #[arg(long)]
        scenes: Option<usize>,
        /// Generator config: a file of key=value lines, or inline `k=v,k=v`.
        #[arg(long)]
        config: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate SFT tasks with oracle trajectories and masked training examples.
    GenSft {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        config: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate RL tasks that survive the difficulty filter.
    GenRl {
        #[arg(long)]
        n: usize,
        /// Generator config (file or inline k=v list).
        #[arg(long)]
        config: Option<String>,
        /// Reward config used when scoring filter rollouts.
        #[arg(long)]
        reward_config: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Roll out a scripted policy on every task of a manifest.
    RunPolicy {
        /// oracle, trial-and-error, reward-hacker, clumsy, random, or `mix`
        /// (the RL filter's policy mix).
        #[arg(long)]
        policy: String,
        #[arg(long)]
        manifest: PathBuf,
        /// Rollouts per task.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Score trajectories; groups of `group_k` rollouts per task are finalized.
    Score {
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Reward config: a file of key=value lines, or inline `k=v,k=v`.
        #[arg(long)]
        config: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the embedded invariant checks.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Step one task interactively: each stdin line is one action (`\n` escapes allowed).
    Repl {
        /// Manifest containing the task.
        #[arg(long)]
        task: PathBuf,
        /// Task id (default: the first task).
        #[arg(long)]
        id: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, msg) = match &e {
                CliError::Usage(m) => ("usage error", m),
                CliError::Data(m) => ("data error", m),
            };
            eprintln!("{kind}: {msg}");
            ExitCode::from(e.code())
        }
    }
}
