use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug, Clone)]
#[command(name = "ttclass", version, about = "Tensor-product kernel and tensor-train image classifiers")]
pub struct Cli {
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// More log output; repeat for debug level.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Fit a model and report training metrics.
    Train(TrainArgs),
    /// Accuracy, per-class precision/recall and misclassifications on a test set.
    Evaluate(EvalArgs),
    /// Predict labels for PGM images or images from an IDX file.
    Classify(ClassifyArgs),
    /// Per-label heat maps of single-pixel perturbations of a constant image.
    Sensitivity(SensitivityArgs),
    /// Confusion matrix and per-class misclassification histograms.
    Confusion(EvalArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mandy,
    Arr,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassSet {
    Digits,
    Fashion,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Directory holding the four standard IDX files (gzip or plain).
    #[arg(long, default_value = "data/mnist")]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub train_images: Option<PathBuf>,
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Label names to attach to the ten classes.
    #[arg(long, value_enum, default_value_t = ClassSet::Digits)]
    pub classes: ClassSet,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = Method::Mandy)]
    pub method: Method,
    /// Frequency of the cos/sin feature map.
    #[arg(long, default_value_t = 0.59, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    #[arg(long, default_value_t = 5)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub svd_threshold: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub ridge: f64,
    /// Stop ARR early once a sweep changes the residual by at most this fraction.
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Average 2×2 pixel blocks before fitting.
    #[arg(long)]
    pub reduce: bool,
    /// Stratified subsample of the training set.
    #[arg(long)]
    pub train_count: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Test images per kernel block when predicting.
    #[arg(long, default_value_t = 256)]
    pub block_size: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Stratified subsample of the test set.
    #[arg(long)]
    pub test_count: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// PGM images (P2 or P5).
    #[arg(long = "image")]
    pub images: Vec<PathBuf>,
    /// IDX image file to classify from.
    #[arg(long)]
    pub idx: Option<PathBuf>,
    /// First IDX image to classify.
    #[arg(long, default_value_t = 0)]
    pub first: usize,
    /// Number of IDX images to classify.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Value of every pixel in the unperturbed image.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub baseline: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}
