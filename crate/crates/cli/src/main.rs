//! `cale`: builds pair datasets, trains adapters and runs the evaluations.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "cale", version, about = "Concept-aligned embedding toolkit")]
struct Cli {
    /// Worker threads for parallel kernels (default: all cores).
    #[arg(long, global = true, env = "CALE_THREADS")]
    threads: Option<usize>,

    /// Root seed; every random choice derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter a corpus, split it and write the occurrence pairs.
    BuildPairs(BuildPairsArgs),
    /// Train a linear adapter on the train-split pairs.
    TrainAdapter(TrainArgs),
    /// Run an evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Write the occurrence file an external encoder must embed for CoSimLex.
    CosimlexRequests(RequestsArgs),
    /// Compare analytic and finite-difference gradients on random draws.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic corpus with embeddings.
    Synth(SynthArgs),
    /// Check an embedding file, optionally against its corpus.
    Validate(ValidateArgs),
}

#[derive(Subcommand, Debug)]
enum EvalCommand {
    /// Concept differentiation on held-out pairs.
    Cdiff(CdiffArgs),
    /// Lexical semantic change ranking.
    Lscd(LscdArgs),
    /// Graded similarity in context.
    Cosimlex(CosimlexArgs),
    /// Distance histograms, silhouettes and taxonomy correlation.
    Geometry(GeometryArgs),
}

#[derive(Args, Debug, Serialize)]
struct BuildPairsArgs {
    /// Occurrence JSONL.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Dataset statistics JSON.
    #[arg(long)]
    stats: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    val_frac: f64,
    #[arg(long, default_value_t = 0.10)]
    test_frac: f64,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// key=value training configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    d_out: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Per-step CSV of learning rate and loss.
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CdiffArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    adapter: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct LscdArgs {
    /// `word<TAB>gold_change` lines.
    #[arg(long)]
    gold: PathBuf,
    /// `word<TAB>period<TAB>occ_id` lines.
    #[arg(long)]
    usages: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    adapter: Option<PathBuf>,
    /// Per-target scores TSV.
    #[arg(long)]
    out: PathBuf,
    /// Correlation summary JSON.
    #[arg(long)]
    summary: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CosimlexArgs {
    #[arg(long)]
    entries: PathBuf,
    /// Vectors keyed by request id.
    #[arg(long, required_unless_present = "predictions", conflicts_with = "predictions")]
    embeddings: Option<PathBuf>,
    /// Cached predictions from an earlier run.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, requires = "embeddings")]
    adapter: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct GeometryArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    adapter: Option<PathBuf>,
    /// Hypernym edge list (`child<TAB>parent`).
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
    /// Decision threshold to mark on the histogram.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write histogram.svg.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug, Serialize)]
struct RequestsArgs {
    #[arg(long)]
    entries: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    draws: usize,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Report JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    per_sense: usize,
    #[arg(long, default_value_t = 4)]
    concepts: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 0.15)]
    noise: f64,
}

#[derive(Args, Debug, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Require the rows to match this corpus id for id, in order.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

/// Settings shared by every command.
pub struct Global {
    pub seed: Option<u64>,
    pub force: bool,
}

impl Global {
    pub const DEFAULT_SEED: u64 = 42;

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(Self::DEFAULT_SEED)
    }
}

fn init_threads(threads: Option<usize>) -> anyhow::Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    #[cfg(not(feature = "parallel"))]
    if threads.is_some_and(|n| n > 1) {
        log::warn!("built without the parallel feature; --threads ignored");
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads(cli.threads)?;
    let g = Global {
        seed: cli.seed,
        force: cli.force,
    };
    match cli.command {
        Command::BuildPairs(a) => commands::build_pairs(&g, &a),
        Command::TrainAdapter(a) => commands::train_adapter(&g, &a),
        Command::Eval(EvalCommand::Cdiff(a)) => commands::eval_cdiff(&g, &a),
        Command::Eval(EvalCommand::Lscd(a)) => commands::eval_lscd(&g, &a),
        Command::Eval(EvalCommand::Cosimlex(a)) => commands::eval_cosimlex(&g, &a),
        Command::Eval(EvalCommand::Geometry(a)) => commands::eval_geometry(&g, &a),
        Command::CosimlexRequests(a) => commands::cosimlex_requests(&g, &a),
        Command::Gradcheck(a) => commands::gradcheck(&g, &a),
        Command::Synth(a) => commands::synth(&g, &a),
        Command::Validate(a) => commands::validate(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
