use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod report;

/// Linear-fractional multitype Galton-Watson processes: spectral analysis,
/// skeleton/doomed decomposition, identity checks and simulation.
#[derive(Debug, Parser)]
#[command(name = "lfbgw", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Model file (JSON with n_types, m, g, H).
    #[arg(long, global = true, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Single-type law given as `h0,m`.
    #[arg(long, global = true, value_name = "H0,M", conflicts_with = "model")]
    pub single: Option<String>,
    /// Tolerance for the Perron root equation.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_name = "UINT64")]
    pub seed: Option<u64>,
    /// Report destination; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral summary, extinction probabilities and single-type closed forms.
    Analyze {
        /// Second truncation of the same process; reports how much rho and
        /// q move between the two.
        #[arg(long, value_name = "PATH")]
        refine: Option<PathBuf>,
        /// Add dual and skeleton closed forms (supercritical models only).
        #[arg(long)]
        with_transforms: bool,
    },
    /// Write the dual and skeleton triplets and compare their spectra with
    /// closed forms.
    Transform {
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        /// Only the skeleton triplet.
        #[arg(long)]
        hs_only: bool,
    },
    /// Run the identity suite at random probe points.
    Verify {
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Add this amount to every q before checking.
        #[arg(long, value_name = "EPS", allow_negative_numbers = true)]
        perturb_q: Option<f64>,
        /// Also check |rho^-n M^n - u^t v| < 1e-6 at this power.
        #[arg(long, value_name = "N")]
        eigen_limit: Option<usize>,
    },
    /// Simulate labeled genealogies and compare statistics with exact values.
    Simulate {
        #[arg(long, default_value_t = 10_000)]
        replicates: u64,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        /// 1-based type of the root particle.
        #[arg(long, default_value_t = 1)]
        root_type: usize,
        /// Points `s1,...,sN` separated by `;`, or `@FILE` with one point per
        /// line.
        #[arg(long, value_name = "POINTS")]
        probe_points: Option<String>,
        /// Worker threads; results do not depend on this.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Write the first replicate's labeled tree in Graphviz format.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,
        #[arg(long, default_value_t = lfbgw::simulate::DEFAULT_POPULATION_CAP)]
        cap: u64,
    },
    /// Check a model file and list every violated constraint.
    Validate,
}

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_DOMAIN: u8 = 2;
pub const EXIT_INPUT: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("lfbgw: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
