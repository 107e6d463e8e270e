mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "conical-gmt", version, about = "Conical energies, corona decompositions and rectifiability diagnostics for weighted point clouds")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "CONICAL_GMT_THREADS")]
    threads: Option<usize>,
    /// Print a human-readable summary to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic point cloud.
    Gen(GenArgs),
    /// Pointwise and total conical energies.
    Energy(EnergyArgs),
    /// Direction search for big pieces of bounded energy.
    ScanBpbe(ScanArgs),
    /// Lattice, stopping-time corona and packing ledger.
    Corona(CoronaArgs),
    /// Operator norms of truncated singular integrals.
    SioNorm(SioArgs),
    /// β₂ profile at one center.
    Beta(BetaArgs),
    /// Graph-based checks: Vitali cover, (θ,M) counts, F_ε.
    Bplg(BplgArgs),
    /// Merge JSON reports that share a points file.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct GenArgs {
    /// segment | circle | lipschitz_graph | four_corner_cantor | variable_cantor | mixture
    #[arg(long = "type")]
    pub kind: Option<String>,
    /// Full generator spec as JSON (overrides --type).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub generation: Option<u32>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub lip: Option<f64>,
    /// Comma-separated side ratios for variable_cantor.
    #[arg(long)]
    pub ratios: Option<String>,
    /// Build variable_cantor ratios for this exponent (> 2).
    #[arg(long)]
    pub profile_p: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Write graph.json through the generated atoms (graph generators only).
    #[arg(long)]
    pub graph_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EnergyArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub alpha: f64,
    /// Direction plane V as "v1;v2;..." with comma-separated coordinates.
    #[arg(long)]
    pub plane: String,
    /// Outer scale; "inf" integrates over all scales.
    #[arg(long = "R", default_value = "inf")]
    pub outer: f64,
    /// Restrict the scale integral to [ηR, R].
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub per_point: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub alpha: f64,
    /// Energy bound M0.
    #[arg(long)]
    pub m0: f64,
    /// Required good mass fraction κ.
    #[arg(long)]
    pub kappa: f64,
    #[arg(long)]
    pub radius: f64,
    /// Number of ball centers, spread evenly over the atom list.
    #[arg(long, default_value_t = 16)]
    pub centers: usize,
    #[arg(long, default_value_t = 32)]
    pub directions: usize,
    /// Extra candidate planes tried before the random ones.
    #[arg(long)]
    pub pin: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CoronaArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dump_trees: Option<PathBuf>,
    #[arg(long)]
    pub dump_lattice: Option<PathBuf>,
}

#[derive(Args)]
pub struct SioArgs {
    #[arg(long)]
    pub points: PathBuf,
    /// cauchy | riesz
    #[arg(long)]
    pub kernel: String,
    #[arg(long)]
    pub n: usize,
    /// "auto", "truncated:K" or a comma-separated list of ε values.
    #[arg(long, default_value = "auto")]
    pub eps_grid: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct BetaArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// Atom index or comma-separated coordinates.
    #[arg(long)]
    pub center: String,
    /// "dyadic:K" for K halvings starting at --r0.
    #[arg(long)]
    pub scales: String,
    /// Largest scale (defaults to the diameter).
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct BplgArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub graph: PathBuf,
    /// cover | thetaM | feps
    #[arg(long)]
    pub check: String,
    /// Cone aperture for the cover (defaults to the automatic rule).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Aperture for thetaM (defaults to 1/√(1+L²)).
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// JSON reports written by other subcommands.
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for plot-data CSVs.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = commands::Ctx { verbose: cli.verbose };
    let result = match &cli.command {
        Command::Gen(a) => commands::gen(&ctx, a),
        Command::Energy(a) => commands::energy(&ctx, a),
        Command::ScanBpbe(a) => commands::scan_bpbe(&ctx, a),
        Command::Corona(a) => commands::corona(&ctx, a),
        Command::SioNorm(a) => commands::sio_norm(&ctx, a),
        Command::Beta(a) => commands::beta(&ctx, a),
        Command::Bplg(a) => commands::bplg(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
