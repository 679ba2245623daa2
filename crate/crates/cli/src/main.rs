use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

/// Word-vector text toolkit: embeddings, a convolutional classifier and
/// caption metrics.
///
/// Settings can also come from a flat TOML file passed with --config. Flags
/// override file values, which override defaults. Exit status is 0 on
/// success, 1 for bad data and 2 for usage or I/O errors.
#[derive(Debug, Parser)]
#[command(name = "wvtext", version)]
struct Cli {
    /// Flat TOML file of settings (keys are flag names with `_` for `-`).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train CBOW embeddings with hierarchical softmax.
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Train the convolutional classifier on top of an embedding file.
    TrainClassifier(TrainClassifierArgs),
    /// Report the accuracy of a checkpoint on a labeled dataset.
    EvalClassifier(EvalClassifierArgs),
    /// Score candidate captions with BLEU-1/3/4 and CIDEr-D.
    EvalCaptions(EvalCaptionsArgs),
    /// List the nearest neighbours of a word by cosine similarity.
    Nearest(NearestArgs),
}

#[derive(Debug, Args)]
struct TrainEmbeddingsArgs {
    /// Plain text, one sentence per line.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Vector dimension [default: 100]
    #[arg(long)]
    dim: Option<usize>,
    /// Context words on each side of the center word [default: 5]
    #[arg(long)]
    window: Option<usize>,
    /// Initial learning rate [default: 0.025]
    #[arg(long)]
    lr: Option<f64>,
    /// Per-epoch learning-rate multiplier [default: 0.85]
    #[arg(long)]
    decay: Option<f64>,
    /// Shuffle and sharding granularity [default: 64]
    #[arg(long)]
    batch: Option<usize>,
    /// [default: 5]
    #[arg(long)]
    epochs: Option<usize>,
    /// Drop words seen fewer times than this [default: 5]
    #[arg(long)]
    min_count: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; ignored with --deterministic [default: 1]
    #[arg(long)]
    threads: Option<usize>,
    /// Single worker, bit-reproducible output.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    deterministic: Option<bool>,
    /// Embedding file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch loss log [default: <out>.loss]
    #[arg(long)]
    loss_log: Option<PathBuf>,
    /// Also write `<word> <id> <frequency>` lines here.
    #[arg(long)]
    vocab_out: Option<PathBuf>,
    /// Also write `<word> <huffman code>` lines here.
    #[arg(long)]
    codes_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainClassifierArgs {
    /// Embedding file from train-embeddings.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// `<label><TAB><sentence>` lines.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Checkpoint file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch accuracy log [default: <out>.acc]
    #[arg(long)]
    accuracy_log: Option<PathBuf>,
    /// Tokens per sequence after padding or truncation [default: 16]
    #[arg(long)]
    seq_len: Option<usize>,
    /// Convolution width [default: 3]
    #[arg(long)]
    kernel: Option<usize>,
    /// Convolution output channels [default: 16]
    #[arg(long)]
    channels: Option<usize>,
    /// Dropout rate during training [default: 0.5]
    #[arg(long)]
    dropout: Option<f64>,
    /// Max-pool width [default: 2]
    #[arg(long)]
    pool: Option<usize>,
    /// Number of classes [default: largest label + 1]
    #[arg(long)]
    classes: Option<usize>,
    /// Keep the embedding rows fixed during training.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    freeze_embeddings: Option<bool>,
    /// [default: 0.1]
    #[arg(long)]
    lr: Option<f64>,
    /// [default: 0.85]
    #[arg(long)]
    decay: Option<f64>,
    /// [default: 64]
    #[arg(long)]
    batch: Option<usize>,
    /// [default: 10]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalClassifierArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalCaptionsArgs {
    /// JSON array of `{"id", "refs", "candidate"}` records.
    #[arg(long)]
    captions: Option<PathBuf>,
    /// Report file to write.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Give zero-match n-gram orders a small pseudo-count.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    smooth_bleu: Option<bool>,
}

#[derive(Debug, Args)]
struct NearestArgs {
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    word: Option<String>,
    /// [default: 10]
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io { path: PathBuf, source: io::Error },
    /// Bad data: the input parsed but cannot be used.
    Domain(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Wraps a core error raised while handling `path`.
    pub fn at(path: &Path, err: wvtext::Error) -> Self {
        match err {
            wvtext::Error::Io(source) => CliError::io(path, source),
            other => CliError::Domain(format!("{}: {other}", path.display())),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) | CliError::Io { .. } => 2,
        }
    }
}

impl From<wvtext::Error> for CliError {
    fn from(err: wvtext::Error) -> Self {
        CliError::Domain(err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Domain(msg) => f.write_str(msg),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::TrainEmbeddings(a) => commands::train_embeddings(a, &file),
        Command::TrainClassifier(a) => commands::train_classifier(a, &file),
        Command::EvalClassifier(a) => commands::eval_classifier(a, &file),
        Command::EvalCaptions(a) => commands::eval_captions(a, &file),
        Command::Nearest(a) => commands::nearest(a, &file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
