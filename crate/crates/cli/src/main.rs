//! `mfhinf`: command-line front end for mean-field H2/H-infinity synthesis.
//!
//! Exit codes: 0 success, 2 the recursion is infeasible, 3 invalid input,
//! 4 a verification check failed.

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{CliError, Report};

/// Default seed for every randomized command.
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Output files go here when `--output` is not given.
pub const OUT_DIR_ENV: &str = "MFHINF_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "mfhinf",
    version,
    about = "Finite-horizon H2/H-infinity control of mean-field stochastic systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check dimensions, finiteness and the Psi^T Psi = I constraint.
    Validate(CommonArgs),
    /// Bounded real lemma recursion of the uncontrolled system.
    Sbrl(CommonArgs),
    /// Mean-field LQ recursion (C and Ct are read as the state noise terms).
    Lq(CommonArgs),
    /// Coupled H2/H-infinity recursion: all eight sequences and the H operators.
    H2hinf(CommonArgs),
    /// Smallest attenuation level the coupled recursion certifies.
    GammaSearch(GammaArgs),
    /// Monte Carlo (and optionally particle) simulation of the closed loop.
    Simulate(SimulateArgs),
    /// Residual, sign, identity, saddle and attenuation checks.
    Verify(VerifyArgs),
    /// Solve the bundled two-step example and compare with the published values.
    ReproducePaperExample(OutputArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Table => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Noise {
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Output file. For CSV solver output, an existing directory receives one
    /// file per sequence.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Overrides the `gamma` stored in the input file.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Positive-definiteness threshold for the H operators.
    #[arg(long)]
    pub pd_tol: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GammaArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0.01)]
    pub lo: f64,
    /// Defaults to the gamma of the input file.
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub n_paths: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub noise: Noise,
    /// Comma-separated particle counts; adds a particle convergence report.
    #[arg(long, value_delimiter = ',')]
    pub particles: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Sampled disturbance policies for the attenuation lower bound.
    #[arg(long, default_value_t = 1000)]
    pub n_policies: usize,
    /// Random perturbations per saddle inequality.
    #[arg(long, default_value_t = 200)]
    pub perturbations: usize,
}

fn run(cli: Cli) -> Result<Report, CliError> {
    match cli.command {
        Command::Validate(a) => commands::validate(&a),
        Command::Sbrl(a) => commands::sbrl(&a),
        Command::Lq(a) => commands::lq(&a),
        Command::H2hinf(a) => commands::h2hinf(&a),
        Command::GammaSearch(a) => commands::gamma_search(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::ReproducePaperExample(a) => commands::reproduce(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli).and_then(|r| r.emit()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
