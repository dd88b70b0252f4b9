use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "addlab", version, about = "Render n+m formula images, train a CNN on them and analyse what it learned")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "ADDLAB_WORKERS")]
    pub workers: Option<usize>,

    /// JSON object whose keys are flag names; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render Ω = {0..N}² into a packed image file.
    Gen(GenArgs),
    /// Render one formula as a PGM image.
    Render(RenderArgs),
    /// Assign every key to train or test.
    Split(SplitArgs),
    /// Train one network and dump its predictions.
    Train(TrainCmd),
    /// Predict keys with a saved checkpoint.
    Eval(EvalArgs),
    /// Train independent trials and aggregate their accuracy.
    Trials(TrialsArgs),
    /// Test accuracy as a function of the training fraction.
    Sweep(SweepArgs),
    /// Learning map of one trial as a PPM image.
    Map(MapArgs),
    /// Test errors per true label, summed over trials.
    Hist(HistArgs),
    /// Differences between predicted and true sums of wrong test keys.
    Carry(CarryArgs),
    /// Full probability table for one key.
    Probe(ProbeArgs),
    /// Training combinations per label.
    Coverage(CoverageArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
    /// Run a complete experiment recipe.
    Repro(ReproArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CanvasArgs {
    /// Square canvas side in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: u32,
    /// Glyph cell size in pixels (default: largest that fits).
    #[arg(long)]
    pub scale: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub ink: u8,
    #[arg(long, default_value_t = 255)]
    pub background: u8,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long)]
    pub n_max: u32,
    #[command(flatten)]
    pub canvas: CanvasArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub n_max: u32,
    #[command(flatten)]
    pub canvas: CanvasArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ProtocolName {
    Commutativity,
    RandomPair,
    Uniform,
    Exclusion,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long, value_enum)]
    pub protocol: ProtocolName,
    /// Packed image file whose N is used.
    #[arg(long, required_unless_present = "n_max")]
    pub omega: Option<PathBuf>,
    #[arg(long, conflicts_with = "omega")]
    pub n_max: Option<u32>,
    /// Training fraction (commutativity, random-pair).
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Test fraction (uniform).
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Excluded integers, e.g. `33-37,62-68` (exclusion).
    #[arg(long)]
    pub intervals: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum OptimizerName {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum, default_value_t = OptimizerName::Adam)]
    pub optimizer: OptimizerName,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train for the full epoch budget.
    #[arg(long)]
    pub no_early_stop: bool,
    /// Epochs at 100% training accuracy before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Allow a nondeterministic gradient reduction order.
    #[arg(long)]
    pub nondeterministic: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainCmd {
    #[arg(long)]
    pub omega: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Trial JSON with every key's prediction (default: beside the checkpoint).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum KeySelection {
    All,
    Train,
    Test,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub omega: PathBuf,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KeySelection::All)]
    pub keys: KeySelection,
    /// CSV of predictions; `.json` writes JSON instead.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrialsArgs {
    #[arg(long)]
    pub omega: PathBuf,
    /// Template split; randomized protocols are redrawn per trial.
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also save every trial's checkpoint.
    #[arg(long)]
    pub save_checkpoints: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum FamilyName {
    Commutativity,
    RandomPair,
    Uniform,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub omega: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyName,
    /// Ascending training fractions, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Report the smallest fraction reaching this mean test accuracy.
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MapArgs {
    #[arg(long)]
    pub split: PathBuf,
    /// Trial JSON written by `train` or `trials`.
    #[arg(long)]
    pub trial: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub cell: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct HistArgs {
    /// Trial JSON files.
    #[arg(long = "trial", required = true, num_args = 1..)]
    pub trials: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CarryArgs {
    #[arg(long)]
    pub trial: PathBuf,
    /// CSV of differences; `.json` writes the full report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub omega: PathBuf,
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub m: u32,
    /// Rows printed to stdout.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    /// JSON report with every class.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CoverageArgs {
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
    /// Central-difference step (default: 1e-3 in f32, 1e-4 in f64).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Seeds 0..seeds are checked.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Output classes of the toy network.
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    Exp5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ScaleName {
    Desk,
    Full,
}

#[derive(Debug, Args, Serialize)]
pub struct ReproArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    #[arg(long, value_enum, default_value_t = ScaleName::Desk)]
    pub scale: ScaleName,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parent of the run directory.
    #[arg(long, default_value = "runs")]
    pub out_root: PathBuf,
    /// Override the recipe's trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Override the recipe's epoch budget.
    #[arg(long)]
    pub epochs: Option<usize>,
}
