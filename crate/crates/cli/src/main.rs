mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pairbox::geometry::IouVariant;

#[derive(Parser)]
#[command(name = "pairbox", version, about = "Paired visible/thermal box evaluation and simulation")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score detections against annotations (MR^V, MR^T, MR^M).
    Evaluate(EvaluateArgs),
    /// Shift the thermal annotations and report MR^M per shift.
    ShiftSweep(SweepArgs),
    /// Write a synthetic annotated scene and optional mock detections.
    Generate(GenerateArgs),
    /// Run paired NMS on a detection file.
    Nms(NmsArgs),
    /// Label candidate pairs against annotations by IoU^M.
    Assign(AssignArgs),
    /// Evaluate the RPN and detector losses on a sample file.
    Losses(LossesArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Svg,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub det: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub iou_thresh: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<IouVariant>>,
    /// Objects at or below this thermal height become ignore regions.
    #[arg(long)]
    pub min_height: Option<f64>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepDetector {
    Paired,
    SingleBox,
    Both,
}

#[derive(Args, Clone, Default)]
pub struct NoiseArgs {
    /// Std-dev of the detected box center, pixels.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Std-dev of the log box size.
    #[arg(long)]
    pub size_sigma: Option<f64>,
    #[arg(long)]
    pub miss_prob: Option<f64>,
    #[arg(long)]
    pub fp_per_frame: Option<f64>,
    /// Std-dev of the additive score noise.
    #[arg(long)]
    pub score_noise: Option<f64>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    /// Thermal shifts in pixels, e.g. `--shift -20,-10,0,10,20`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub shift: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "both")]
    pub detector: SweepDetector,
    /// Load detections per shift instead of running a mock detector;
    /// `{dx}` in the path is replaced by the shift value.
    #[arg(long, value_name = "PATTERN", conflicts_with = "detector")]
    pub det_template: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, value_delimiter = ',')]
    pub iou_thresh: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MockMode {
    Paired,
    SingleBox,
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Annotation file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub pedestrians_min: Option<usize>,
    #[arg(long)]
    pub pedestrians_max: Option<usize>,
    #[arg(long)]
    pub height_min: Option<f64>,
    #[arg(long)]
    pub height_max: Option<f64>,
    /// Fixed pedestrian box width in pixels.
    #[arg(long)]
    pub box_width: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub misalign_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub misalign_max: Option<f64>,
    /// Shift every thermal box by this many pixels before writing.
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<f64>,
    #[arg(long, default_value = "synthetic")]
    pub name: String,
    /// Also write mock detections for the scene.
    #[arg(long, value_name = "FILE")]
    pub det_out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub detector: Option<MockMode>,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Args)]
pub struct NmsArgs {
    #[arg(long, value_name = "FILE")]
    pub det: PathBuf,
    #[arg(long)]
    pub iou_thresh: Option<f64>,
    #[arg(long)]
    pub max_keep: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Rpn,
    Detector,
}

#[derive(Args)]
pub struct AssignArgs {
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    /// Candidate pairs per frame; without it a grid of anchors is used.
    #[arg(long, value_name = "FILE")]
    pub candidates: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rpn")]
    pub stage: Stage,
    #[arg(long, default_value_t = 16.0)]
    pub stride: f64,
    #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
    pub scales: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.41")]
    pub aspects: Vec<f64>,
    /// Draw a mini-batch per frame with this seed and mark the sampled rows.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct LossesArgs {
    #[arg(long, value_name = "FILE")]
    pub samples: PathBuf,
    /// Step of the central-difference gradient check.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pairbox: {e}");
            ExitCode::from(e.code())
        }
    }
}
