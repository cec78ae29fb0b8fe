//! `ideal`: command-line pipeline for influence-driven selective annotation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

use ideal::diffusion::{RandomnessMode, DEFAULT_REPS};
use ideal::embedding::Format;
use ideal::graph::DEFAULT_K;
use ideal::selection::{Method, DEFAULT_VOTEK_RHO};

/// Exit status for a failed `verify` run.
const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ideal",
    version,
    about = "Influence-driven selective annotation"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Master random seed.
    #[arg(long, global = true, env = "IDEAL_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Embedding file format (default: from the file extension, else jsonl).
    #[arg(long, global = true)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the k-NN diffusion graph of an embedding file.
    BuildGraph(BuildGraph),
    /// Select a budget-sized subset to annotate.
    Select(Select),
    /// Estimate the influence of a subset.
    Influence(Influence),
    /// Record one cascade from a subset, round by round.
    Trace(Trace),
    /// Retrieve the most similar annotated examples for each query.
    Retrieve(Retrieve),
    /// Schedule the whole pool for automatic annotation in diffusion order.
    AutoAnnotate(AutoAnnotate),
    /// Check the greedy guarantees on random graphs with exact influence.
    Verify(Verify),
}

#[derive(Debug, Args)]
struct BuildGraph {
    #[arg(long)]
    embeddings: PathBuf,
    /// Successors per vertex.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Select {
    #[arg(long, default_value = "ideal")]
    method: Method,
    /// Number of examples to select.
    #[arg(long)]
    budget: usize,
    /// Diffusion graph (ideal, ideal-lazy, fast-votek, brute-force).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Embeddings (kmeans, mfl; also supplies ids).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Monte-Carlo repetitions per influence estimate.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    /// Lazy greedy evaluation (implied by ideal-lazy).
    #[arg(long)]
    lazy: bool,
    #[arg(long, default_value = "fresh")]
    randomness: RandomnessMode,
    /// Vote discount for fast-votek.
    #[arg(long, default_value_t = DEFAULT_VOTEK_RHO)]
    rho: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Influence {
    #[arg(long)]
    graph: PathBuf,
    /// Selection file, or one id per line.
    #[arg(long)]
    subset: PathBuf,
    /// Supplies ids; without it ids are vertex indices.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value = "fresh")]
    randomness: RandomnessMode,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Trace {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    subset: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Retrieve {
    /// Pool embeddings; the annotated examples are looked up here.
    #[arg(long)]
    embeddings: PathBuf,
    /// Selection file listing the annotated ids.
    #[arg(long)]
    selection: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Examples per query.
    #[arg(long, default_value_t = ideal::annotation::DEFAULT_PROMPTS)]
    c: usize,
    /// Sample prompts uniformly instead of by similarity.
    #[arg(long)]
    random: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AutoAnnotate {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Selection file, or one id per line, of manually labeled examples.
    #[arg(long)]
    manual: PathBuf,
    /// Prompts per automatically labeled example.
    #[arg(long, default_value_t = ideal::annotation::DEFAULT_PROMPTS)]
    c: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Verify {
    /// Random graphs per check.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A `verify` run that found violations.
#[derive(Debug)]
struct CheckFailed;

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("theory checks reported violations")
    }
}

impl std::error::Error for CheckFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<CheckFailed>() {
        return EXIT_CHECK_FAILED;
    }
    for cause in err.chain() {
        if let Some(ideal::Error::Io { source, .. }) = cause.downcast_ref::<ideal::Error>() {
            // A missing input is a usage problem; anything else is I/O.
            return if source.kind() == std::io::ErrorKind::NotFound {
                EXIT_USAGE
            } else {
                EXIT_IO
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_USAGE
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.global.threads {
        anyhow::ensure!(threads >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    match &cli.command {
        Command::BuildGraph(a) => commands::build_graph(&cli.global, a),
        Command::Select(a) => commands::select(&cli.global, a),
        Command::Influence(a) => commands::influence(&cli.global, a),
        Command::Trace(a) => commands::trace(&cli.global, a),
        Command::Retrieve(a) => commands::retrieve(&cli.global, a),
        Command::AutoAnnotate(a) => commands::auto_annotate(&cli.global, a),
        Command::Verify(a) => commands::verify(&cli.global, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
