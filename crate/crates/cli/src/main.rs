//! `nsed`: train, evaluate and apply neural string edit distance models.

mod commands;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nsed::data::{IndexBase, Tokenization};
use nsed::Error;

#[derive(Parser, Debug)]
#[command(name = "nsed", version, about = "Neural string edit distance for string matching and transduction")]
struct Cli {
    /// Worker threads for batch-level parallelism (1 gives the canonical trace).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for every random choice. Overrides the `seed` key of a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a neural model and write the best validation checkpoint.
    Train(TrainArgs),
    /// Score string pairs and label them at the stored threshold.
    Classify(ApplyArgs),
    /// Generate an output string for every source line.
    Transduce(TransduceArgs),
    /// Print the most probable edit operations of every pair.
    Align(ApplyArgs),
    /// Compute evaluation metrics of a checkpoint on a data split.
    Eval(EvalArgs),
    /// Train the statistical edit distance baseline with expectation maximisation.
    EmTrain(EmTrainArgs),
    /// Build data directories from raw corpora.
    #[command(subcommand)]
    Prepare(PrepareCommand),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaskArg {
    Match,
    Transduce,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TokArg {
    Chars,
    Space,
}

impl From<TokArg> for Tokenization {
    fn from(t: TokArg) -> Self {
        match t {
            TokArg::Chars => Tokenization::Chars,
            TokArg::Space => Tokenization::Whitespace,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BaseArg {
    Zero,
    One,
}

impl From<BaseArg> for IndexBase {
    fn from(b: BaseArg) -> Self {
        match b {
            BaseArg::Zero => IndexBase::Zero,
            BaseArg::One => IndexBase::One,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Plain-text `key=value` configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory with train.tsv, valid.tsv and optionally test.tsv.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Metrics CSV; defaults to `<out>.metrics.csv`.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Train on this many randomly chosen training examples.
    #[arg(long)]
    train_subsample: Option<usize>,
    /// Stop after this many updates.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Symbol splitting of matching data.
    #[arg(long, value_enum, default_value = "space")]
    tokenization: TokArg,
}

#[derive(Args, Debug)]
struct ApplyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Tab-separated `source<TAB>target` lines; `-` reads standard input.
    #[arg(long, default_value = "-")]
    input: PathBuf,
}

#[derive(Args, Debug)]
struct TransduceArgs {
    #[arg(long)]
    model: PathBuf,
    /// One source per line (the first tab-separated field); `-` reads standard input.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Beam width; defaults to the checkpoint configuration.
    #[arg(long)]
    beam: Option<usize>,
    /// Length normalisation exponent; defaults to the checkpoint configuration.
    #[arg(long)]
    len_norm: Option<f64>,
    /// Maximum output length; defaults to 2n+10 for a source of length n.
    #[arg(long)]
    max_len: Option<usize>,
    /// Append the edit operations of the output as a second column.
    #[arg(long)]
    emit_script: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// A data directory or a single TSV file.
    #[arg(long)]
    data: PathBuf,
    /// Split to read when `--data` is a directory.
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    len_norm: Option<f64>,
    /// Write the prefix-probability table of one pair as CSV.
    #[arg(long)]
    dump_alpha: Option<PathBuf>,
    /// Line index (0-based, among pairs) used by `--dump-alpha`.
    #[arg(long, default_value_t = 0)]
    pair: usize,
    /// Pharaoh reference alignments, one line per pair, for alignment F1.
    #[arg(long)]
    reference_alignments: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "zero")]
    index_base: BaseArg,
}

#[derive(Args, Debug)]
struct EmTrainArgs {
    /// Directory with train.tsv, valid.tsv and optionally test.tsv.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    /// Stop when the log-likelihood improves by less than this.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Added to every expected count before normalising.
    #[arg(long, default_value_t = 0.0)]
    smoothing: f64,
    #[arg(long, value_enum, default_value = "space")]
    tokenization: TokArg,
}

#[derive(Subcommand, Debug)]
enum PrepareCommand {
    /// Labelled cognate pairs from a word list with cognate classes.
    Cognates {
        #[arg(long)]
        wordlist: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        negatives: usize,
        #[arg(long)]
        valid: usize,
        #[arg(long)]
        test: usize,
        /// Keep at most this many pairs in total, trimming the training split.
        #[arg(long)]
        max_pairs: Option<usize>,
    },
    /// Train, validation and test files from a pair corpus.
    Transduction {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = ["tsv", "cmudict"], default_value = "tsv")]
        format: String,
        #[arg(long)]
        out: PathBuf,
        /// Number of distinct sources in the validation split.
        #[arg(long)]
        valid: usize,
        #[arg(long)]
        test: usize,
        /// Keep this many randomly chosen distinct sources before splitting.
        #[arg(long)]
        max_groups: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::MissingKey(_) => 2,
        Error::Vocabulary(_)
        | Error::Length { .. }
        | Error::Parse { .. }
        | Error::Data(_)
        | Error::Empty(_)
        | Error::Checkpoint(_)
        | Error::Io { .. } => 3,
        Error::Numerical(_) => 4,
        Error::Dimension(_) => 1,
    }
}

fn run(cli: Cli) -> nsed::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set up {n} threads: {e}")))?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Train(a) => commands::train(a, seed),
        Command::Classify(a) => commands::classify(a),
        Command::Transduce(a) => commands::transduce(a),
        Command::Align(a) => commands::align(a),
        Command::Eval(a) => commands::eval(a),
        Command::EmTrain(a) => commands::em_train(a),
        Command::Prepare(p) => commands::prepare(p, seed.unwrap_or(commands::DEFAULT_SEED)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nsed: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
