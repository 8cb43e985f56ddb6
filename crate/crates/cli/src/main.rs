mod commands;
mod evaluate;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use t4d_core::registered::ErrorReduction;

/// Evaluate and compare 4D face-mesh sequences.
#[derive(Parser, Debug)]
#[command(name = "t4d", version, about)]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute metrics for ground-truth vs. predicted sequences.
    Evaluate(EvaluateArgs),
    /// Precompute and cache surface operators for one mesh.
    Operators(OperatorsArgs),
    /// Rigidly align a mesh or a sequence directory to a reference mesh.
    Align(AlignArgs),
    /// Randomly refine then decimate a mesh.
    Remesh(RemeshArgs),
    /// Write a synthetic talking sequence with masks and lip landmarks.
    Synth(SynthArgs),
    /// Plot lip landmark y-coordinates over time as SVG.
    PlotLips(PlotArgs),
    /// Classical MDS of a distance matrix.
    Mds(MdsArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Registered,
    Unregistered,
}

#[derive(Args, Debug)]
pub struct SequenceInput {
    /// Ground-truth sequence directory (or directory of sequence directories).
    #[arg(long)]
    pub gt: PathBuf,
    /// Predicted sequence directory, laid out like --gt.
    #[arg(long)]
    pub pred: PathBuf,
    /// Frame filename pattern; only .obj and .ply files are read.
    #[arg(long, default_value = "*")]
    pub pattern: String,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Fan-triangulate polygon faces instead of rejecting them.
    #[arg(long)]
    pub triangulate: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, value_enum)]
    pub mode: EvalMode,
    #[command(flatten)]
    pub input: SequenceInput,
    #[arg(long)]
    pub mouth_mask: Option<PathBuf>,
    #[arg(long)]
    pub upper_mask: Option<PathBuf>,
    #[arg(long)]
    pub lips: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the scaled table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Varifold kernel width in mm.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Kernel truncation radius in units of sigma.
    #[arg(long, conflicts_with = "exact_varifold")]
    pub truncation: Option<f64>,
    /// Evaluate the full varifold double sum.
    #[arg(long)]
    pub exact_varifold: bool,
    /// Reduction for LVE as <vertices>-<frames>, e.g. max-mean.
    #[arg(long)]
    pub lve_reduction: Option<ErrorReduction>,
    /// Reduction for MVE as <vertices>-<frames>, e.g. mean-max.
    #[arg(long)]
    pub mve_reduction: Option<ErrorReduction>,
    /// Sakoe-Chiba band half-width for DTW.
    #[arg(long)]
    pub dtw_band: Option<usize>,
    /// Also report training losses.
    #[arg(long)]
    pub losses: bool,
    /// Start from the conventions recorded in an earlier report; explicit
    /// flags still take precedence.
    #[arg(long)]
    pub conventions_from: Option<PathBuf>,
    /// Sequences evaluated in parallel (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum SolverArg {
    Auto,
    Dense,
    ShiftInvert,
}

#[derive(Args, Debug)]
pub struct OperatorsArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Number of eigenpairs.
    #[arg(long, default_value_t = t4d_core::surf_ops::DEFAULT_EIGEN_COUNT)]
    pub k: usize,
    /// Cache file; defaults to a content-addressed name under $T4D_CACHE_DIR.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub clamp_cot: bool,
    #[arg(long, value_enum, default_value = "auto")]
    pub solver: SolverArg,
    /// Recompute even when a matching cache exists.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct AlignArgs {
    /// Mesh file or sequence directory.
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Output mesh file, or directory when --source is a directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also fit a uniform scale.
    #[arg(long)]
    pub scale: bool,
    #[arg(long, default_value = "*")]
    pub pattern: String,
}

#[derive(Args, Debug)]
pub struct RemeshArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of faces split 1->4.
    #[arg(long, default_value_t = 0.3)]
    pub up: f64,
    /// Target vertex count as a fraction of the input.
    #[arg(long, default_value_t = 0.8)]
    pub down: f64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory; frames go to <out>/frames.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 120)]
    pub frames: usize,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Peak lower-lip displacement in mm.
    #[arg(long, default_value_t = 8.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Template grid rows when no --template is given.
    #[arg(long, default_value_t = 48)]
    pub rows: usize,
    #[arg(long, default_value_t = 48)]
    pub cols: usize,
    /// Template mesh; requires --lips.
    #[arg(long, requires = "lips")]
    pub template: Option<PathBuf>,
    #[arg(long, requires = "template")]
    pub lips: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[command(flatten)]
    pub input: SequenceInput,
    #[arg(long)]
    pub lips: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MdsArgs {
    /// Square distance matrix as CSV, no header.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad input or arguments (exit 1).
    Input(String),
    /// Numerical failure such as eigensolver non-convergence (exit 2).
    Numerical(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    /// Prefixes the message with context, e.g. the failing sequence.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{ctx}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{ctx}: {m}")),
        }
    }
}

impl From<t4d_core::Error> for CliError {
    fn from(e: t4d_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Error mapper that names the offending file.
pub fn ctx(p: &std::path::Path) -> impl Fn(t4d_core::Error) -> CliError + '_ {
    move |e| CliError::from(e).context(&p.display().to_string())
}

pub fn write_file(path: &std::path::Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; --help and --version are not
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Evaluate(a) => evaluate::run(&a),
        Command::Operators(a) => commands::operators(&a),
        Command::Align(a) => commands::align(&a),
        Command::Remesh(a) => commands::remesh(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::PlotLips(a) => plot::run(&a),
        Command::Mds(a) => commands::mds(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}
