//! `verbground` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical failure. Errors go to stderr as `error_code: N: message`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use verbground::dataset::CommandMode;
use verbground::model::CellKind;

/// Relative output paths are resolved under this directory when it is set.
pub const OUT_ROOT_ENV: &str = "VERBGROUND_OUT";

#[derive(Debug, Parser)]
#[command(name = "verbground", version, about = "Verb-conditioned object retrieval pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine verb/object pairs from CoNLL-U dependency parses.
    Mine(MineArgs),
    /// Split pairs into class-disjoint train and test sets.
    Split(SplitArgs),
    /// Generate balanced training samples from a split and a feature store.
    Build(BuildArgs),
    /// Write a synthetic feature store and its pairs.
    Synth(SynthArgs),
    /// Train the command encoder.
    Train(TrainArgs),
    /// Evaluate a checkpoint on five-way retrieval tasks.
    Eval(EvalArgs),
    /// Train and evaluate one model per data size.
    Sweep(SweepArgs),
    /// Rank feature records against a single command.
    Retrieve(RetrieveArgs),
    /// Compare analytic and finite-difference gradients on a random encoder.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MineArgs {
    /// A .conllu file or a directory of them.
    #[arg(long)]
    conllu: PathBuf,
    /// Output TSV: verb, object, frequency.
    #[arg(long)]
    out: PathBuf,
    /// Minimum frequency [default: from config, 1].
    #[arg(long)]
    min_frequency: Option<usize>,
    /// Keep every verb instead of the whitelist.
    #[arg(long)]
    all_verbs: bool,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Pairs TSV (verb, object[, frequency]).
    #[arg(long)]
    pairs: PathBuf,
    /// Fraction of object classes held out [default: from config, 0.2].
    #[arg(long)]
    holdout: Option<f64>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output manifest JSON.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct BuildArgs {
    /// Split manifest from `split`.
    #[arg(long)]
    manifest: PathBuf,
    /// FEAT feature store.
    #[arg(long)]
    features: PathBuf,
    /// Positive samples; as many negatives are added [default: from config, 3745].
    #[arg(long)]
    size: Option<usize>,
    /// Command form: verb-only or verb+noun [default: from config, verb-only].
    #[arg(long)]
    mode: Option<CommandMode>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output samples file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// JSON synthetic-data spec.
    #[arg(long)]
    spec: PathBuf,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output FEAT file.
    #[arg(long)]
    out: PathBuf,
    /// Output pairs TSV [default: <out>.pairs.tsv].
    #[arg(long)]
    pairs_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Samples file from `build`.
    #[arg(long)]
    samples: PathBuf,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Epoch budget [default: from config, 50].
    #[arg(long)]
    epochs: Option<usize>,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// JSON-lines training log [default: stdout].
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Checkpoint from `train`.
    #[arg(long)]
    ckpt: PathBuf,
    /// Split manifest; tasks use its held-out pairs and classes.
    #[arg(long, required_unless_present = "external_pairs", conflicts_with = "external_pairs")]
    manifest: Option<PathBuf>,
    /// Pairs of an external dataset; evaluates on every class in --features.
    #[arg(long)]
    external_pairs: Option<PathBuf>,
    /// FEAT feature store.
    #[arg(long)]
    features: PathBuf,
    /// verb-only, verb+noun or verb+unknown-noun [default: from config, verb-only].
    #[arg(long)]
    mode: Option<CommandMode>,
    /// Evaluation runs [default: from config, 5].
    #[arg(long)]
    runs: Option<usize>,
    /// Tasks per run [default: from config, 200].
    #[arg(long)]
    n_tasks: Option<usize>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output report JSON [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the first run's tasks as JSON lines.
    #[arg(long)]
    tasks_out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Ascending positive-sample counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Split manifest from `split`.
    #[arg(long)]
    manifest: PathBuf,
    /// FEAT feature store.
    #[arg(long)]
    features: PathBuf,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for sweep.json and sweep.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    /// Checkpoint from `train`.
    #[arg(long)]
    ckpt: PathBuf,
    /// FEAT file of candidates.
    #[arg(long)]
    features: PathBuf,
    /// Natural-language command.
    #[arg(long)]
    command: String,
    /// Candidates to print.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Restrict candidates to these classes (comma separated).
    #[arg(long, value_delimiter = ',')]
    classes: Vec<String>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Seed of the random encoder and sample.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Recurrent cell: elman or gated.
    #[arg(long, default_value_t = CellKind::Elman)]
    cell: CellKind,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Check this many random coordinates instead of all of them.
    #[arg(long)]
    coords: Option<usize>,
    /// Failure threshold on the max relative error.
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            if code != 0 {
                eprint!("error_code: 1: {}", e.render());
            } else {
                let _ = e.print();
            }
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error_code: {}: {}", f.code, f.message);
            ExitCode::from(f.code)
        }
    }
}
