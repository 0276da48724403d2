use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pinnbias::net::Activation;
use pinnbias::problems::ProblemId;
use pinnbias::trainer::TrainMode;

use crate::suite::SuiteId;

/// Train physics-informed networks on sinusoidal ODE benchmarks and measure
/// how each frequency converges.
#[derive(Debug, Parser)]
#[command(name = "pinnbias", version)]
pub struct Cli {
    /// Root directory for run outputs.
    #[arg(long, global = true, env = "PINNBIAS_OUT_DIR", default_value = "runs")]
    pub out_dir: PathBuf,

    /// Suppress per-checkpoint progress on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one network; exits 0 if it converged and 2 otherwise.
    Train(TrainArgs),
    /// Run every row of a results table.
    Suite(SuiteArgs),
    /// Amplitudes of selected frequencies in a saved network.
    Spectrum(SpectrumArgs),
    /// Kernel eigenmodes and their predicted against measured decay.
    Ntk(NtkArgs),
    /// SVG of network output against the closed form.
    Plot(PlotArgs),
    /// PINN against supervised training on the same target.
    Compare(CompareArgs),
}

/// Flags that override fields of the training configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run file or a manifest from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for initialisation and collocation sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum number of iterations.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Convergence tolerance on the relative max error.
    #[arg(long)]
    pub tol: Option<f64>,
    /// tanh or swish.
    #[arg(long)]
    pub activation: Option<Activation>,
    /// pinn or supervised.
    #[arg(long)]
    pub mode: Option<TrainMode>,
    /// Add u(0) = 0 to third-order problems.
    #[arg(long)]
    pub well_posed: bool,
    /// Number of interior collocation points.
    #[arg(long)]
    pub collocation: Option<usize>,
    /// Iterations between error evaluations.
    #[arg(long)]
    pub checkpoint_interval: Option<u64>,
    /// Initial learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden and outer layer widths, e.g. 1,100,100,1.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// Redraw collocation points every iteration.
    #[arg(long)]
    pub resample: bool,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Catalog entry, eq17 to eq25.
    #[arg(long)]
    pub problem: Option<ProblemId>,
    /// Frequency for the single-tone entries: 2, 6 or 10.
    #[arg(long)]
    pub k: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Frequencies to record at every checkpoint, e.g. 2,4,6,8,10.
    #[arg(long, value_delimiter = ',')]
    pub spectrum: Vec<u32>,
    /// Samples on the periodic grid used for spectra.
    #[arg(long)]
    pub spectrum_grid: Option<usize>,
    /// Save parameters at every checkpoint.
    #[arg(long)]
    pub save_checkpoints: bool,
    /// Run directory; defaults to a name derived from the run under --out-dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    pub table: SuiteId,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Use the full 300K-iteration budget instead of 50K.
    #[arg(long)]
    pub full: bool,
    /// Rows trained concurrently.
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
    /// Seeds per row.
    #[arg(long, default_value_t = 1)]
    pub repeats: u32,
    /// Suite directory; defaults to the table name under --out-dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Parameter file written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Add u(0) = 0 to third-order problems.
    #[arg(long)]
    pub well_posed: bool,
    /// Frequencies to measure.
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10")]
    pub freqs: Vec<u32>,
    /// Samples on the periodic grid, a power of two.
    #[arg(long, default_value_t = pinnbias::spectral::DEFAULT_SPECTRUM_GRID)]
    pub grid: usize,
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NtkArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Kernel sample points on the periodic grid.
    #[arg(long, default_value_t = pinnbias::ntk::DEFAULT_NTK_POINTS)]
    pub points: usize,
    /// Use the one-parameter model f = θ·x instead of the configured network.
    #[arg(long)]
    pub linear: bool,
    /// Leading modes in the rank-correlation summary.
    #[arg(long, default_value_t = pinnbias::ntk::DEFAULT_RANKED_MODES)]
    pub top: usize,
    /// Decay fits stop below this fraction of a mode's initial error.
    #[arg(long, default_value_t = pinnbias::ntk::DEFAULT_REL_FLOOR)]
    pub floor: f64,
    /// Recompute the kernel at every checkpoint and report its drift.
    #[arg(long)]
    pub drift: bool,
    /// Output directory for kernel, eigenvalue and mode-trace CSVs.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Parameter file written by `train`.
    #[arg(long, conflicts_with = "solution", required_unless_present = "solution")]
    pub checkpoint: Option<PathBuf>,
    /// Solution CSV written by `train`.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Add u(0) = 0 to third-order problems.
    #[arg(long)]
    pub well_posed: bool,
    /// Evaluation points when plotting a checkpoint.
    #[arg(long, default_value_t = 1001)]
    pub grid: usize,
    /// Output SVG path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Catalog entry solved both ways; must be a zeroth-order problem.
    #[arg(long, default_value = "eq22")]
    pub problem: ProblemId,
    /// Frequencies to compare.
    #[arg(long, value_delimiter = ',', default_value = "2,6,10")]
    pub k: Vec<u32>,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Use the full 300K-iteration budget instead of 50K.
    #[arg(long)]
    pub full: bool,
    /// Rows trained concurrently.
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
    /// Comparison directory; defaults to a name derived from the problem under --out-dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
