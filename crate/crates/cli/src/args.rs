use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const SEED_ENV: &str = "DCUNET_SEED";

/// DC-UNet toolkit: architectures, parameter accounting, training and
/// segmentation metrics.
///
/// Exit codes: 0 success, 1 usage error, 2 data error (missing or malformed
/// input), 3 numeric failure (NaN or divergence).
#[derive(Debug, Parser)]
#[command(name = "dcunet", version)]
pub struct Cli {
    /// Force single-threaded, order-stable execution. Every command is already
    /// sequential, so this only documents the guarantee.
    #[arg(long, global = true)]
    pub deterministic: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-layer parameter ledger and total, compared with the published count.
    Params(ParamsArgs),
    /// Layer table or plain-text graph export.
    Summarize(SummarizeArgs),
    /// Train on a manifest; prints the per-epoch log.
    Train(TrainArgs),
    /// k-fold cross-validation; prints per-fold Tanimoto.
    Cv(CvArgs),
    /// Score a checkpoint on a manifest.
    Eval(EvalArgs),
    /// Compare predictions with ground truth.
    Metrics(MetricsArgs),
    /// Size and object-ratio robustness table.
    Robustness(RobustnessArgs),
    /// Write a synthetic blob dataset and its manifest.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArchChoice {
    Unet,
    Multires,
    Dcunet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConventionMode {
    /// Every convention of the reconciliation grid, best match flagged.
    Sweep,
    /// The reference convention only.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SummaryFormat {
    Table,
    Graph,
}

/// Model shape shared by every command that builds a network.
#[derive(Clone, Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "dcunet")]
    pub arch: ArchChoice,

    /// Five comma-separated base widths; defaults to the published ones.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub filters: Option<Vec<usize>>,

    /// Learn a scale in the per-convolution batch norms.
    #[arg(long)]
    pub bn_scale: bool,
}

#[derive(Clone, Debug, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,

    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,

    #[arg(long, default_value_t = 4)]
    pub batch: usize,

    /// Moving-average momentum of batch-norm statistics.
    #[arg(long, default_value_t = 0.99)]
    pub bn_momentum: f64,

    /// Average the loss over pixels instead of summing.
    #[arg(long)]
    pub per_pixel_mean: bool,

    /// Keep the manifest order instead of shuffling each epoch.
    #[arg(long)]
    pub no_shuffle: bool,

    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    /// Restrict fixed mode to one architecture; all three when omitted.
    #[arg(long, value_enum)]
    pub arch: Option<ArchChoice>,

    #[arg(long, value_enum, default_value = "fixed")]
    pub convention: ConventionMode,

    /// Fixed mode only.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub filters: Option<Vec<usize>>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long, value_enum, default_value = "table")]
    pub format: SummaryFormat,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub optim: OptimArgs,

    #[arg(long)]
    pub manifest: PathBuf,

    /// Hold out the last N items for per-epoch validation Tanimoto.
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,

    /// Directory for train_log.csv and model.ckpt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub optim: OptimArgs,

    #[arg(long)]
    pub manifest: PathBuf,

    #[arg(long, default_value_t = 5)]
    pub k: usize,

    /// Keep manifest groups whole (one participant per fold when k equals the group count).
    #[arg(long)]
    pub by_group: bool,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long)]
    pub checkpoint: PathBuf,

    #[arg(long)]
    pub manifest: PathBuf,

    #[arg(long, default_value_t = 4)]
    pub batch: usize,

    /// Directory for eval.csv and one predicted PGM per item.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Prediction image, or a directory of PGMs paired with --truth by file name.
    #[arg(long)]
    pub pred: PathBuf,

    #[arg(long)]
    pub truth: PathBuf,

    /// `all` or a comma-separated subset of jaccard, mae, tanimoto, ssim.
    #[arg(long, default_value = "all")]
    pub measure: String,

    /// Otsu-threshold grayscale inputs before Jaccard.
    #[arg(long)]
    pub otsu: bool,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    /// Manifest whose items pair a prediction (`image`) with its truth (`mask`).
    #[arg(long)]
    pub pairs: PathBuf,

    /// Down-sampling factors.
    #[arg(long, value_delimiter = ',', num_args = 1, default_value = "1,2,4")]
    pub sizes: Vec<usize>,

    /// Canvas side over image side; 1 means no padding.
    #[arg(long, value_delimiter = ',', num_args = 1, default_value = "1,1.5,2,3")]
    pub ratios: Vec<f64>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives PGM pairs and manifest.json.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 40)]
    pub count: usize,

    #[arg(long, default_value_t = 64)]
    pub width: usize,

    #[arg(long, default_value_t = 64)]
    pub height: usize,

    /// Split items into this many contiguous groups.
    #[arg(long)]
    pub groups: Option<usize>,

    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
}
