mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

const CONVENTIONS: &str = "\
Conventions:
  Angles are in radians. Branch observables are cos(theta) Z + sin(theta) (cos(phi) X + sin(phi) Y).
  Outcome a = 0 is the +1 eigenvalue. The centre's outcome b = 0 is GHZ success.
  Star parties are A1, A2, A3, B; the bilocal line is A, B (three outcomes), C.

Exit status: 0 violation / certified, 3 no violation, 1 error.";

#[derive(Parser)]
#[command(name = "fnn", version, about = "Full network nonlocality in the star and bilocal networks")]
#[command(after_help = CONVENTIONS)]
struct Cli {
    /// Directory for output files
    #[arg(long, global = true, env = "FNN_OUTPUT_DIR", default_value = ".")]
    output_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the three-branch star and write its distribution as JSON
    #[command(after_help = CONVENTIONS)]
    SimulateStar(StarArgs),

    /// Simulate the bilocal line at its reference settings and write the distribution
    #[command(after_help = CONVENTIONS)]
    SimulateBilocal,

    /// Run the inflation LP for every classical-source placement
    #[command(after_help = CONVENTIONS)]
    Certify(CertifyArgs),

    /// Certify, then turn each infeasibility certificate into a witness inequality
    #[command(after_help = CONVENTIONS)]
    ExtractWitness(CertifyArgs),

    /// Evaluate a witness on a distribution
    #[command(after_help = CONVENTIONS)]
    Evaluate(EvaluateArgs),

    /// Estimate I1, I2, I3 from GHZ-success coincidence counts
    #[command(after_help = CONVENTIONS)]
    IngestStar(IngestStarArgs),

    /// Estimate R_C-NS and R_NS-C from bilocal coincidence counts (b = 2 counts doubled)
    #[command(after_help = CONVENTIONS)]
    IngestBilocal(IngestArgs),

    /// Tabulate I1 against visibility and locate the critical visibility
    #[command(after_help = CONVENTIONS)]
    Sweep(SweepArgs),

    /// Search the measurement angles maximizing I1 at full visibility
    #[command(after_help = CONVENTIONS)]
    Optimize(OptimizeArgs),

    /// Mutual information (bits) between parties that have a measurement choice
    #[command(after_help = CONVENTIONS)]
    MutualInfo(MutualInfoArgs),
}

#[derive(Args, Clone)]
struct StarArgs {
    /// Polar angle of observable 0 (radians)
    #[arg(long, default_value_t = -1.865, allow_negative_numbers = true)]
    theta0: f64,
    /// Polar angle of observable 1 (radians)
    #[arg(long, default_value_t = -0.415, allow_negative_numbers = true)]
    theta1: f64,
    /// Azimuth of observable 0 (radians)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    phi0: f64,
    /// Azimuth of observable 1 (radians)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    phi1: f64,
    /// Visibility of every source, in [0, 1]
    #[arg(long, default_value_t = 1.0, conflicts_with = "visibilities")]
    visibility: f64,
    /// Per-source visibilities v1,v2,v3
    #[arg(long, value_delimiter = ',', num_args = 3)]
    visibilities: Option<Vec<f64>>,
}

#[derive(Args)]
struct TargetArgs {
    /// Star distribution JSON (as written by simulate-star)
    #[arg(long, conflicts_with = "ideal", required_unless_present = "ideal")]
    distribution: Option<PathBuf>,
    /// Use the simulated star with the angle and visibility flags instead of a file
    #[arg(long)]
    ideal: bool,
    #[command(flatten)]
    star: StarArgs,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// Largest denominator used when rationalizing the target
    #[arg(long, default_value_t = 1_000_000)]
    denominator_bound: u64,
    /// Solve in exact rational arithmetic only (slower)
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// I1, I2, I3, R_C-NS, R_NS-C, or a witness JSON file
    #[arg(long)]
    witness: String,
    /// Distribution JSON
    #[arg(long)]
    distribution: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Count CSV files; together they must cover every setting
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Count absent outcome rows as zero
    #[arg(long)]
    allow_missing: bool,
    /// Bootstrap resamples (at least 100)
    #[arg(long, default_value_t = fnn_core::stats::DEFAULT_RESAMPLES)]
    resamples: usize,
    /// Bootstrap seed
    #[arg(long, default_value_t = fnn_core::stats::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct IngestStarArgs {
    #[command(flatten)]
    ingest: IngestArgs,
    /// GHZ-success events over successful runs, e.g. 2019/15562
    #[arg(long)]
    projection: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    ClosedForm,
    Simulation,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    star: StarArgs,
    /// Number of visibility intervals between 0 and 1
    #[arg(long, default_value_t = 100, conflicts_with = "grid")]
    points: usize,
    /// Explicit visibility grid v1,v2,...
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Closed form (phi = 0 only) or Born-rule simulation
    #[arg(long, value_enum, default_value = "closed-form")]
    backend: BackendArg,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Grid spacing (radians)
    #[arg(long, default_value_t = fnn_core::analysis::DEFAULT_RESOLUTION)]
    resolution: f64,
    /// Smallest refinement step (radians)
    #[arg(long, default_value_t = fnn_core::analysis::DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Also search the azimuths phi0, phi1 (simulation backend)
    #[arg(long)]
    allow_phi: bool,
}

#[derive(Args)]
struct MutualInfoArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// Largest mutual information still counted as independent (bits)
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,
}

/// Whether a run found what it was looking for.
enum Outcome {
    Positive,
    Negative,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(Outcome::Positive) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
