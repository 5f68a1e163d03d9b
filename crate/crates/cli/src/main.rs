mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{file}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Config {
        file: String,
        line: Option<usize>,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] ehgnn::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            _ => 2,
        }
    }
}

/// Dual hypergraph transformation, edge autoencoders, edge-drop
/// classification and benchmarks.
#[derive(Debug, Parser)]
#[command(name = "ehgnn", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for generators, initialization and shuffling; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config's `out` key.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write per-epoch metric histories (or benchmark rows) as CSV.
    #[arg(long, global = true)]
    pub csv: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dualize a graph JSON or invert a dual JSON; the round trip is verified.
    Dht { input: PathBuf, output: PathBuf },
    /// Generate one graph of a synthetic family as JSON.
    Gen(run::GenArgs),
    /// Train edge (and optionally node) autoencoders from a config file.
    Reconstruct { config: PathBuf },
    /// Train the edge-drop graph classifier from a config file.
    Classify { config: PathBuf },
    /// Train an edge autoencoder and report compressed sizes.
    Compress { config: PathBuf },
    /// Timing benchmarks.
    Bench {
        #[command(subcommand)]
        which: run::BenchCommand,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Dht { input, output } => run::dht_command(&input, &output),
        Command::Gen(args) => run::gen_command(&args, g),
        Command::Reconstruct { config } => run::reconstruct_command(&config, g),
        Command::Classify { config } => run::classify_command(&config, g),
        Command::Compress { config } => run::compress_command(&config, g),
        Command::Bench { which } => run::bench_command(&which, g),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
