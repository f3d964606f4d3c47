use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use drpp_core::protocol::DEFAULT_PAIR_TARGET;

#[derive(Debug, Parser)]
#[command(
    name = "drpp",
    version,
    about = "Thermal graph-state purification simulator"
)]
pub struct Cli {
    /// Emit a JSON envelope instead of tables.
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads for shot-level parallelism. Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Write output to this file instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical temperature and error probability for coupling B.
    Threshold(ThresholdArgs),
    /// Monte Carlo run of the full protocol.
    Simulate(SimulateArgs),
    /// Protocol verdict over a grid of error probabilities.
    Scan(ScanArgs),
    /// Pair yield and the bounds it implies for the graph state.
    Rates(RatesArgs),
    /// Extraction rounds used to build the graph from pairs.
    Plan(GraphArgs),
    /// Exhaustive comparison of the pattern simulator with the dense one.
    VerifyOracle(VerifyArgs),
    /// Which edges admit an exact rebuild from noisy pairs.
    CheckOptimality(OptimalityArgs),
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Coupling strength.
    #[arg(long = "B", allow_negative_numbers = true)]
    pub coupling: f64,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Family string (path:5, grid:2x3x3, star:6, ghz:6, cycle:4,
    /// complete:4, icosahedron) or a path to an edge-list file.
    #[arg(long, required_unless_present = "family")]
    pub graph: Option<String>,

    /// Family string; also enables the closed-form round count.
    #[arg(long, conflicts_with = "graph")]
    pub family: Option<String>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Per-qubit flip probability.
    #[arg(long, conflicts_with_all = ["temperature", "coupling"])]
    pub p: Option<f64>,

    /// Temperature, used together with --B.
    #[arg(long = "T", requires = "coupling", allow_negative_numbers = true)]
    pub temperature: Option<f64>,

    /// Coupling strength, used together with --T.
    #[arg(long = "B", requires = "temperature", allow_negative_numbers = true)]
    pub coupling: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,

    #[arg(long, env = "DRPP_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Pair fidelity that recurrence distillation aims for.
    #[arg(long, default_value_t = DEFAULT_PAIR_TARGET)]
    pub target: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub run: RunArgs,

    /// Comma-separated error probabilities, ascending.
    #[arg(long, value_delimiter = ',', required_unless_present = "steps")]
    pub grid: Option<Vec<f64>>,

    /// Evenly spaced grid: number of points from --from to --to.
    #[arg(long, conflicts_with = "grid", requires_all = ["from", "to"])]
    pub steps: Option<usize>,

    #[arg(long)]
    pub from: Option<f64>,

    #[arg(long)]
    pub to: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Largest vertex count, at most 5.
    #[arg(long, default_value_t = 5)]
    pub max_n: usize,

    /// Skip the six-qubit merge configurations.
    #[arg(long)]
    pub no_six: bool,
}

#[derive(Debug, Args)]
pub struct OptimalityArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,

    /// Trace-distance tolerance.
    #[arg(long, default_value_t = drpp_core::optimality::DEFAULT_TOL)]
    pub tol: f64,

    /// Check a single bipartition, given as the comma-separated vertices on
    /// one side.
    #[arg(long, value_delimiter = ',')]
    pub alice: Option<Vec<usize>>,
}
