use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "melodikit", version, about = "Train, sample and evaluate melody models")]
pub struct Cli {
    /// Root seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Fixed reduction order. Results never depend on the thread count, so
    /// this is accepted for scripts that request it explicitly.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read MIDI or note-list files into a corpus file.
    Ingest(IngestArgs),
    /// Train a model on a corpus file.
    Train(TrainArgs),
    /// Draw samples from a model.
    Sample(SampleArgs),
    /// Evaluation protocols.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Leave-one-out grid search for the context-tree models.
    Tune(TuneArgs),
    /// Export TC-RBM filters as CSV.
    Filters(FiltersArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Input files or directories (directories are read non-recursively).
    pub inputs: Vec<PathBuf>,
    /// JSON manifest listing inputs, alongside or instead of positional inputs.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Ticks per eighth note for note-list inputs.
    #[arg(long)]
    pub ticks_per_eighth: Option<u64>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Vmm,
    Dvmm,
    Tcrbm,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Training log CSV (default: next to the model, `.log.csv`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Best-parameters JSON written by `tune`; supplies the tree settings.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub max_depth: usize,
    #[arg(long)]
    pub c_min: Option<u64>,
    #[arg(long)]
    pub eps_min: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub hidden: usize,
    #[arg(long, default_value_t = 8)]
    pub filter: usize,
    #[arg(long, default_value_t = 5)]
    pub cd: usize,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    /// Final learning rate as a fraction of `--lr` (linear decay).
    #[arg(long, default_value_t = 0.1)]
    pub lr_final_fraction: f64,
    #[arg(long, default_value_t = 0.0002)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sparsity_target: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sparsity_weight: f64,
    #[arg(long, default_value_t = 10)]
    pub minibatch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeArg {
    Text,
    Midi,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 256)]
    pub length: usize,
    /// Match the number and lengths of the sequences of this corpus instead
    /// of `--count` and `--length`.
    #[arg(long)]
    pub like: Option<PathBuf>,
    /// Gibbs sweeps before a TC-RBM sample is taken.
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Also write each sample as a note list or MIDI file.
    #[arg(long, value_enum)]
    pub decode: Option<DecodeArg>,
    /// Directory for decoded samples (default: `<output stem>_decoded`).
    #[arg(long)]
    pub decode_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Multi-step prediction log-likelihood.
    Predict(PredictArgs),
    /// Bootstrapped KL divergence of n-gram and lagged-pair statistics.
    Kl(KlArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Model files, as `path` or `name=path`.
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,
    #[arg(long)]
    pub test: PathBuf,
    /// Training corpus for the empirical-marginal baseline.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Pseudo-count added to every symbol of the baseline marginal.
    #[arg(long, default_value_t = 1.0)]
    pub baseline_pseudo: f64,
    #[arg(long, default_value_t = 15)]
    pub tau_max: usize,
    #[arg(long, default_value_t = 2000)]
    pub configs: usize,
    #[arg(long, default_value_t = 8)]
    pub min_context: usize,
    #[arg(long, default_value_t = 100)]
    pub paths: usize,
    #[arg(long, default_value_t = 100)]
    pub chains: usize,
    #[arg(long, default_value_t = 15)]
    pub iterations: usize,
    #[arg(long, default_value_t = 10)]
    pub burn: usize,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct KlArgs {
    /// Sample corpora, as `path` or `name=path`.
    #[arg(long = "samples")]
    pub samples: Vec<String>,
    /// Model files to sample from, as `path` or `name=path`.
    #[arg(long = "model")]
    pub models: Vec<String>,
    /// Corpus whose sequence lengths the model samples copy (default: the
    /// test corpus).
    #[arg(long)]
    pub sample_like: Option<PathBuf>,
    #[arg(long)]
    pub test: PathBuf,
    /// Training corpus for the train-versus-test reference row.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub resamples: usize,
    /// Statistics such as `order-2` or `lag-3` (default: orders and lags 1-6).
    #[arg(long = "stat", value_delimiter = ',')]
    pub stats: Vec<String>,
    /// Gibbs sweeps for TC-RBM samples drawn by this command.
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeModelArg {
    Vmm,
    Dvmm,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub model: TreeModelArg,
    /// Grid JSON: `{"max_depth": 100, "c_min": [..], "eps_min": [..],
    /// "gamma_min" or "alpha": [..]}`.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FiltersArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
}
