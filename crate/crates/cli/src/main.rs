use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Chest-region segmentation and breathing analysis for depth video.
///
/// Assumes a recording of one sleeping person, mostly still apart from
/// breathing and occasional posture changes, with no other moving objects.
/// Set CHESTSEG_WORKERS to fix the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "chestseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a phantom recording with ground truth.
    Synth(SynthArgs),
    /// Segment the chest region of a recording.
    Segment(SegmentArgs),
    /// Extract the breathing signal over a mask and report its spectrum.
    Extract(ExtractArgs),
    /// Compare an automatic mask with a rough rectangle and the ground truth.
    Compare(CompareArgs),
    /// Render depth frames as 8-bit images.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Phantom description (key = value); defaults apply to missing keys.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// Parameter overrides; each wins over the value from `--config`.
#[derive(Debug, Args, Default)]
struct PipelineArgs {
    /// Configuration file (key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_name = "MM")]
    max_distance: Option<f64>,
    /// Margin in pixels, or `auto` to scale with the frame width.
    #[arg(long, value_name = "PX|auto")]
    margin: Option<String>,
    #[arg(long)]
    median_radius: Option<usize>,
    #[arg(long)]
    canny_sigma: Option<f64>,
    #[arg(long)]
    canny_low: Option<f64>,
    #[arg(long)]
    canny_high: Option<f64>,
    #[arg(long)]
    dilate_radius: Option<usize>,
    #[arg(long, value_name = "S")]
    segment_seconds: Option<f64>,
    /// Stride in seconds, or `auto` for back-to-back segments.
    #[arg(long, value_name = "S|auto")]
    stride_seconds: Option<String>,
    #[arg(long, value_name = "HZ")]
    band_low: Option<f64>,
    #[arg(long, value_name = "HZ")]
    band_high: Option<f64>,
    /// Amplitude threshold as a fraction of the segment maximum.
    #[arg(long)]
    amp_frac: Option<f64>,
    /// Taper before the transform: rect or hann.
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    open_radius: Option<usize>,
    #[arg(long)]
    close_radius: Option<usize>,
    /// Smallest kept component, as a fraction of the frame area.
    #[arg(long)]
    min_area_frac: Option<f64>,
    /// Final confidence threshold.
    #[arg(long)]
    conf: Option<f64>,
    /// Posture-change threshold in mm of mean frame-to-frame change.
    #[arg(long, value_name = "MM")]
    motion_thresh: Option<f64>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Sequence manifest.
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write per-segment intermediate images.
    #[arg(long)]
    debug_images: bool,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    manifest: PathBuf,
    /// Region of interest (PGM, non-zero = inside).
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    manifest: PathBuf,
    /// Automatic mask, usually `mask.pgm` from `segment`.
    #[arg(long)]
    mask: PathBuf,
    /// Ground-truth mask; defaults to the one named in the manifest.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Manual rectangle `x,y,w,h`; defaults to a rectangle of 4x the
    /// ground-truth area centered on it.
    #[arg(long, value_name = "X,Y,W,H")]
    rect: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
struct RenderArgs {
    manifest: PathBuf,
    /// Frame indices to render.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    frames: Vec<usize>,
    /// Also render each frame after dropout inpainting.
    #[arg(long)]
    inpaint: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
