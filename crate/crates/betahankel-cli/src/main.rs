mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::SignArg;

/// Weighted Hankel transforms and mild solutions of ∂ₜu − |x|^β Δu = ±|u|^b u on radial modes.
///
/// Exit codes: 0 ok, 1 invalid configuration, 2 numerical failure, 3 blow-up
/// (only with --fail-on-blowup).
#[derive(Debug, Parser)]
#[command(name = "betahankel", version)]
pub struct Cli {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for CSV/JSON reports
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: RAYON_NUM_THREADS or all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Dimension n >= 2
    #[arg(long)]
    pub n: Option<u32>,
    /// Weight exponent β in [0, 2)
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Spherical-harmonic degree
    #[arg(long)]
    pub k: Option<u32>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub tau_min: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub rho_max: Option<f64>,
    #[arg(long)]
    pub nodes_per_period: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived exponents and a triplet classification table
    Params {
        #[command(flatten)]
        model: ModelArgs,
        /// Lattice such as "q=2,p=2..6" (axes m, p, q; values, a;b lists or a..b[/step] ranges)
        #[arg(long)]
        triplets: Option<String>,
    },
    /// Run numerical check suites
    Verify {
        /// Suites to run (comma separated, or "all")
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
        /// Parameter filters
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        young_pairs: Option<usize>,
    },
    /// Solve the nonlinear equation by windowed Picard iteration
    Evolve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Nonlinearity power b > 0
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, value_enum)]
        sign: Option<SignArg>,
        /// Report exponent q (number or "inf")
        #[arg(long, value_parser = config::parse_exponent)]
        q: Option<f64>,
        /// Initial data: gaussian, bump or zero
        #[arg(long)]
        data: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        amplitude: Option<f64>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        width: Option<f64>,
        #[arg(long)]
        power: Option<f64>,
        #[arg(long)]
        blowup_threshold: Option<f64>,
        /// Exit with status 3 when blow-up is detected
        #[arg(long)]
        fail_on_blowup: bool,
    },
    /// Fit the large-time decay exponent of the linear flow on Gaussian data
    DecayFit {
        #[command(flatten)]
        model: ModelArgs,
        /// Norm exponents (comma separated, "inf" allowed)
        #[arg(long, value_delimiter = ',', value_parser = config::parse_exponent)]
        p: Vec<f64>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Audit the sharp-convolution Young inequality on random nonnegative pairs
    YoungAudit {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Exponent triple "a,b,c" with 1 + 1/a = 1/b + 1/c (repeatable)
        #[arg(long)]
        triple: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
