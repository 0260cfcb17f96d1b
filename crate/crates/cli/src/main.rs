//! `pdapprox`: eigenvalue tables, rank-n approximations, realizations,
//! convergence curves and Monte Carlo checks from the command line.

mod commands;
mod output;
mod symbol_arg;

use clap::{ArgGroup, Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "pdapprox", version, about = "Finite-rank deterministic approximation of stationary processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues of Σ_N, effective rank and optional Weyl tracks.
    Spectrum(SpectrumArgs),
    /// Optimal rank-n approximation of Σ_N.
    Approx(ApproxArgs),
    /// Stationary state-space extension of the rank-n approximation.
    Realize(ApproxArgs),
    /// Weak-gap curves and time/frequency quadratic forms over a ψ bank.
    Converge(ConvergeArgs),
    /// Gaussian sample paths and Monte Carlo error estimates.
    Sample(SampleArgs),
    /// Run the reproduction suite and write a summary.
    Repro(ReproArgs),
}

#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("source").required(true).args(["symbol", "symbol_file", "cov"])))]
pub struct SourceArgs {
    /// Inline symbol: white, bandlimited:W=.., ar1:rho=.., lines:(θ,p),(θ,p)
    #[arg(long)]
    pub symbol: Option<String>,
    /// Symbol description in JSON.
    #[arg(long = "symbol-file")]
    pub symbol_file: Option<PathBuf>,
    /// Covariance sequence σ(0..τmax) as CSV (tau,sigma) or JSON {"sigma": [..]}.
    #[arg(long)]
    pub cov: Option<PathBuf>,
    /// Allow lag counts above the default cap.
    #[arg(long = "lift-tau-cap")]
    pub lift_tau_cap: bool,
    /// Gauss–Legendre panels on [0, π].
    #[arg(long = "quad-panels", default_value_t = 64)]
    pub quad_panels: usize,
    /// Nodes per panel.
    #[arg(long = "quad-nodes", default_value_t = 16)]
    pub quad_nodes: usize,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Output directory.
    #[arg(long, env = "PDAPPROX_OUT", default_value = "pdapprox-out")]
    pub out: PathBuf,
    /// Omit the generated_at field from JSON outputs.
    #[arg(long = "no-timestamp")]
    pub no_timestamp: bool,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Window length.
    #[arg(long = "N")]
    pub big_n: usize,
    /// Window lengths for Weyl tracks, e.g. 8,16,32.
    #[arg(long = "Ns", value_delimiter = ',')]
    pub ns: Vec<usize>,
    /// Number of tracked eigenvalues.
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    /// Effective-rank threshold relative to λ₁.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Args, Debug)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "N")]
    pub big_n: usize,
    /// Rank of the approximation.
    #[arg(long = "n")]
    pub n: usize,
    /// Also write Σ̂ⁿ_N as CSV.
    #[arg(long = "dump-sigma-hat")]
    pub dump_sigma_hat: bool,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("ranks").required(true).args(["n", "n_sweep"])))]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "N")]
    pub big_n: usize,
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// Sweep n = 1..N.
    #[arg(long = "n-sweep")]
    pub n_sweep: bool,
    /// Seed for the random part of the ψ bank.
    #[arg(long, default_value_t = 1729)]
    pub seed: u64,
    /// Restrict to these ψ ids (default: the whole bank).
    #[arg(long, value_delimiter = ',')]
    pub psi: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "N")]
    pub big_n: usize,
    /// Rank for the Monte Carlo weak-error report.
    #[arg(long = "n")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 1729)]
    pub seed: u64,
    /// Skip writing the paths CSV.
    #[arg(long = "no-paths")]
    pub no_paths: bool,
}

#[derive(Args, Debug)]
pub struct ReproArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 1729)]
    pub seed: u64,
    /// Monte Carlo paths per configuration.
    #[arg(long = "mc-count", default_value_t = 100_000)]
    pub mc_count: usize,
    /// Criteria to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<u8>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::Approx(a) => commands::approx(&a),
        Command::Realize(a) => commands::realize(&a),
        Command::Converge(a) => commands::converge(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Repro(a) => commands::repro(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
