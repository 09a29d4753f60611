mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Fit time-conditioned Gaussians to slice stacks; interpolate, mesh and edit them.
#[derive(Debug, Parser)]
#[command(name = "foldsplat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic frame stack.
    Phantom(PhantomArgs),
    /// Train a scene on a frame stack.
    Train(TrainArgs),
    /// Leave-frame-out evaluation against linear interpolation.
    Evaluate(EvaluateArgs),
    /// Render a densified frame sequence from a scene.
    Interpolate(InterpolateArgs),
    /// Render a single frame.
    Render(RenderArgs),
    /// Extract a triangle mesh with marching cubes.
    Mesh(MeshArgs),
    /// Compare two meshes or two frame stacks.
    Metrics(MetricsArgs),
    /// Apply an edit file to a scene.
    Edit(EditArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PhantomKind {
    /// Disk moving left to right.
    Translating,
    /// Disk oscillating along x.
    Sinusoidal,
    /// Binary cross-sections of a sphere.
    Sphere,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Depth {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, value_enum)]
    pub kind: PhantomKind,
    #[arg(long, default_value_t = 17)]
    pub frames: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Standard deviation of added Gaussian noise (disk phantoms only).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "16")]
    pub depth: Depth,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Frame stack location.
#[derive(Debug, Args)]
pub struct FramesArgs {
    /// Directory of PGM frames, or an MVOL volume file.
    #[arg(long)]
    pub frames: PathBuf,
    /// File name pattern inside the frame directory.
    #[arg(long, default_value = "*.pgm")]
    pub pattern: String,
}

/// Training settings. Flags override the config file, which overrides defaults.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Plain `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `interp` or `mesh`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial number of Gaussians.
    #[arg(long)]
    pub gaussians: Option<usize>,
    #[arg(long)]
    pub max_gaussians: Option<usize>,
    /// Any config key, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: FramesArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output scene file.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log (JSON lines); defaults to `<out>.log.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: FramesArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Keep every `stride`-th frame for training; score the others.
    #[arg(long)]
    pub stride: usize,
    /// Variants to train: full, no-ibfr, no-sigma, neither or all.
    #[arg(long, value_delimiter = ',', default_value = "full")]
    pub ablate: Vec<String>,
    /// Per-frame scores as JSON lines.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Rendered frames per original frame interval.
    #[arg(long, default_value_t = 4)]
    pub factor: usize,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long, value_enum, default_value = "16")]
    pub depth: Depth,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Normalized time in [0, 1].
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long, value_enum, default_value = "16")]
    pub depth: Depth,
    /// Output PGM file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Rendered slices per original slice interval.
    #[arg(long, default_value_t = 4)]
    pub upsample: usize,
    #[arg(long, default_value_t = 0.5)]
    pub iso: f64,
    /// Threshold the rendered volume at the iso level first.
    #[arg(long)]
    pub binarize: bool,
    /// Distance between original slices in image widths (default: one pixel).
    #[arg(long)]
    pub slice_spacing: Option<f64>,
    /// Output OBJ file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("inputs").required(true).args(["mesh", "frames"]))]
pub struct MetricsArgs {
    /// Two OBJ meshes.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub mesh: Option<Vec<PathBuf>>,
    /// Two frame directories (prediction, reference).
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub frames: Option<Vec<PathBuf>>,
    #[arg(long, default_value = "*.pgm")]
    pub pattern: String,
    /// Surface samples per mesh.
    #[arg(long, default_value_t = foldsplat_core::mesh::DEFAULT_SURFACE_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Write the result as JSON lines.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Edit rules, one per line.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Phantom(a) => commands::phantom(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Interpolate(a) => commands::interpolate(a),
        Command::Render(a) => commands::render(a),
        Command::Mesh(a) => commands::mesh(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Edit(a) => commands::edit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", commands::describe(&err));
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
