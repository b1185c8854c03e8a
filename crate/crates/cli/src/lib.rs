//! Batch front end: corpus generation, voxelization, training, tuning,
//! indexing, querying and evaluation.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{CliConfig, DATA_DIR_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rodfind", version, about = "Text-to-shape retrieval for linking rods", arg_required_else_help = true)]
pub struct Cli {
    /// Seed for corpus generation and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 gives fully reproducible runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    /// JSON settings file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Default data root [env: RODFIND_DATA_DIR, fallback ./data].
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the paired text/voxel corpus with manifest and NRRD grids.
    GenDataset(GenDatasetArgs),
    /// Voxelize an STL mesh into an NRRD grid.
    Voxelize(VoxelizeArgs),
    /// Train both encoders on a manifest's train split.
    Train(TrainArgs),
    /// Run an orthogonal or factorial design and analyse the responses.
    Tune(TuneArgs),
    /// Embed a manifest's shapes into a retrieval index.
    Index(IndexArgs),
    /// Retrieve the shapes nearest to a text description.
    Query(QueryArgs),
    /// Report recall@k of a checkpoint on a manifest split.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    /// Output directory [default: <data>/dataset].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of shipped base rods to vary.
    #[arg(long)]
    pub bases: Option<usize>,
    /// Total number of samples.
    #[arg(long)]
    pub total: Option<usize>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Held-out fraction per base.
    #[arg(long)]
    pub val_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fill {
    Solid,
    Surface,
}

#[derive(Debug, Args)]
pub struct VoxelizeArgs {
    /// Binary or ASCII STL file.
    #[arg(long)]
    pub input: PathBuf,
    /// NRRD file to write.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = rodfind_core::geometry::DEFAULT_RESOLUTION)]
    pub resolution: usize,
    #[arg(long, value_enum, default_value_t = Fill::Solid)]
    pub fill: Fill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
pub struct TrainOptions {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
    /// Weight of the shape-to-text loss term.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Total 3-D convolution layers of the shape encoder.
    #[arg(long)]
    pub conv_layers: Option<usize>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    /// Minimum train-split word count for the vocabulary.
    #[arg(long)]
    pub min_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Manifest CSV or dataset directory [default: <data>/dataset/manifest.csv].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Checkpoint to write [default: <data>/model.ckpt].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-epoch CSV log [default: checkpoint path with .log.csv].
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub options: TrainOptions,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Design JSON file, or one of the shipped designs: screening, widening, refinement.
    #[arg(long)]
    pub design: String,
    /// Manifest CSV or dataset directory [default: <data>/dataset/manifest.csv].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Report CSV to write [default: <data>/tune_report.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Maximum number of training runs.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Analyse recorded responses (one number per line) instead of training.
    #[arg(long, value_name = "FILE")]
    pub responses: Option<PathBuf>,
    #[command(flatten)]
    pub options: TrainOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    All,
    Train,
    Val,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Checkpoint [default: <data>/model.ckpt].
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Manifest CSV or dataset directory [default: <data>/dataset/manifest.csv].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Index file to write [default: <data>/index.bin].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PreviewArg {
    Obj,
    Pgm,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("query_text").required(true).args(["text", "text_file"]))]
pub struct QueryArgs {
    /// Description of the wanted rod.
    #[arg(long)]
    pub text: Option<String>,
    /// File holding the description.
    #[arg(long)]
    pub text_file: Option<PathBuf>,
    /// Number of results [default: 8].
    #[arg(long)]
    pub k: Option<usize>,
    /// Checkpoint [default: <data>/model.ckpt].
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Index [default: <data>/index.bin].
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Write a preview of every hit into this directory.
    #[arg(long)]
    pub preview_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PreviewArg::Obj)]
    pub preview_format: PreviewArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint [default: <data>/model.ckpt].
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Manifest CSV or dataset directory [default: <data>/dataset/manifest.csv].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitArg::Val)]
    pub split: SplitArg,
    /// Cutoffs to report.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 8])]
    pub k: Vec<usize>,
}

/// A flag or config value that is invalid before any work starts.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Joins the cause chain, dropping causes already spelled out by an outer
/// message.
fn error_chain(e: &anyhow::Error) -> String {
    let mut message = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if message.contains(&text) {
            continue;
        }
        if !message.is_empty() {
            message.push_str(": ");
        }
        message.push_str(&text);
    }
    message
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match commands::run(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", error_chain(&e));
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
