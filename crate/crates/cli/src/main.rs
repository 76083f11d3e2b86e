//! `datadiet`: score training data by difficulty, prune it, retrain and evaluate.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::{CliError, EXIT_INTERNAL};

#[derive(Debug, Parser)]
#[command(name = "datadiet", version, about = "Influence scores and score-based data pruning for text classifiers")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stratified, seeded train/test split of a manifest.
    Split(SplitArgs),
    /// Write a synthetic two-class fixture manifest.
    Synth(SynthArgs),
    /// Train reference models and record their training dynamics.
    Train(TrainArgs),
    /// Compute PVI, EL2N and VoG from training-dynamics logs.
    Score(ScoreArgs),
    /// Prune a manifest by score, or at random.
    Prune(PruneArgs),
    /// Run the prune/retrain/evaluate grid.
    Sweep(SweepArgs),
    /// Macro-F1 of a checkpoint on a manifest.
    Eval(EvalArgs),
    /// List the hardest or easiest examples, and score distributions by correctness.
    Inspect(InspectArgs),
    /// Check a .ddlog or manifest for format and invariant violations.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for train.csv and test.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// separable, minority_hard or uniform_noise.
    #[arg(long, default_value = "minority_hard")]
    pub mode: String,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.25)]
    pub minority_fraction: f64,
    #[arg(long, default_value_t = 8)]
    pub vocabulary_size: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Also train a null model per run (needed for PVI).
    #[arg(long)]
    pub null: bool,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Seed of the first run; run i uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep every epoch's checkpoint under <out-dir>/checkpoints.
    #[arg(long)]
    pub save_checkpoints: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// One .ddlog per run; scores are averaged over runs.
    #[arg(long = "log", required = true, num_args = 1..)]
    pub logs: Vec<PathBuf>,
    /// pvi, el2n, vog or all.
    #[arg(long, default_value = "all")]
    pub score: String,
    /// final, mean or epoch:N.
    #[arg(long)]
    pub el2n_policy: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Score table; not needed for --direction random.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub score: Option<String>,
    /// hard, easy or random.
    #[arg(long)]
    pub direction: String,
    /// Percent of examples to remove.
    #[arg(long)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub stratified: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Synthesize the training set: separable, minority_hard or uniform_noise.
    #[arg(long, conflicts_with = "manifest")]
    pub fixture: Option<String>,
    #[arg(long)]
    pub fixture_n: Option<usize>,
    #[arg(long)]
    pub fixture_seed: Option<u64>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated percents.
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    /// Comma-separated subset of pvi,el2n,vog.
    #[arg(long, value_delimiter = ',')]
    pub scores: Option<Vec<String>>,
    /// Comma-separated subset of hard,easy,random.
    #[arg(long, value_delimiter = ',')]
    pub directions: Option<Vec<String>>,
    /// Add a stratified copy of every spec.
    #[arg(long)]
    pub stratified: bool,
    #[arg(long)]
    pub el2n_policy: Option<String>,
    /// Evaluation set as NAME=PATH; repeatable.
    #[arg(long)]
    pub eval: Vec<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value = "pvi")]
    pub score: String,
    #[arg(long, default_value = "hard")]
    pub direction: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Manifest to take example texts from.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Logs whose final-checkpoint predictions split the scores by correctness.
    #[arg(long = "log", num_args = 1..)]
    pub logs: Vec<PathBuf>,
    #[arg(long, requires = "logs")]
    pub summary_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ValidateArgs {
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Split(a) => commands::data::split(a),
        Command::Synth(a) => commands::data::synth(a),
        Command::Train(a) => commands::train::train(a),
        Command::Score(a) => commands::score::score(a),
        Command::Prune(a) => commands::score::prune(a),
        Command::Sweep(a) => commands::sweep::sweep(a),
        Command::Eval(a) => commands::report::eval(a),
        Command::Inspect(a) => commands::report::inspect(a),
        Command::Validate(a) => commands::report::validate(a),
    }
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|info| {
        eprintln!("{}", CliError::internal(info.to_string()));
        std::process::exit(EXIT_INTERNAL.into());
    }));

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", CliError::usage(first.trim_start_matches("error: ")));
            return ExitCode::from(error::EXIT_USAGE);
        }
    };

    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit)
        }
    }
}
