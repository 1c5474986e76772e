//! `dotk` — transport and entropy-concavity experiments for integer-valued
//! distributions.
//!
//! Exit codes: 0 when every verdict passes, 1 when a certified claim is
//! numerically violated (which should never happen), 2 on usage errors.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "dotk", version, about = "Discrete transport, entropy concavity and Bernoulli-sum inequality experiments")]
pub struct Cli {
    /// Scale applied uniformly to the default margin tolerances when
    /// computing verdicts.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tolerance: f64,

    /// Write the report to this path instead of stdout. CSV curve files are
    /// written next to it.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Report format; `csv` additionally emits curve files (requires
    /// --output for multi-curve reports).
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Time-grid size (per-command default when omitted).
    #[arg(long, global = true)]
    pub grid: Option<usize>,

    /// Seed for randomized campaigns and searches.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Number of random trials for campaigns and searches.
    #[arg(long, global = true)]
    pub trials: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the condition ladder along an affine Bernoulli-sum
    /// interpolation: mixing coefficients, flux, margins, entropy curvature
    /// both ways, and the pairwise certificate.
    SheppOlkin {
        /// Comma-separated start parameters, e.g. `0.1,0.2,0.3`.
        #[arg(long, conflicts_with = "params_file", requires = "p_end")]
        p_start: Option<String>,
        /// Comma-separated end parameters.
        #[arg(long, conflicts_with = "params_file")]
        p_end: Option<String>,
        /// JSON file with `{"p_start": [...], "p_end": [...]}`.
        #[arg(long)]
        params_file: Option<PathBuf>,
        /// Evaluate even when some parameter decreases.
        #[arg(long)]
        allow_nonmonotone: bool,
        /// Refuse systems with more factors than this.
        #[arg(long, default_value_t = 60)]
        max_n: usize,
        /// Skip the pairwise certificate (it is the slow part).
        #[arg(long)]
        skip_pairs: bool,
    },
    /// Search random monotone systems for a mixing coefficient that
    /// decreases in time, then re-verify the hit at double resolution.
    TmonSearch {
        /// Number of Bernoulli factors.
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
    /// Minimise the path action between two mass functions and compare
    /// with the mean-displacement bound and W1.
    Geodesic {
        /// Comma-separated masses of the start distribution.
        #[arg(long, conflicts_with = "f0_file")]
        f0: Option<String>,
        /// JSON file holding the start masses as an array.
        #[arg(long)]
        f0_file: Option<PathBuf>,
        /// Comma-separated masses of the end distribution.
        #[arg(long, conflicts_with = "f1_file")]
        f1: Option<String>,
        /// JSON file holding the end masses as an array.
        #[arg(long)]
        f1_file: Option<PathBuf>,
        #[arg(long, default_value_t = 5000)]
        max_iters: usize,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        #[arg(long, default_value_t = 1e12)]
        penalty: f64,
    },
    /// Verify the cubic inequalities and product identities on a random
    /// corpus of Bernoulli systems.
    VerifyAppendix {
        /// Largest number of factors per instance.
        #[arg(long, default_value_t = 10)]
        m_max: usize,
    },
    /// Thin a mass function: keep each unit independently with probability t.
    Thin {
        #[arg(long, conflicts_with = "pmf_file")]
        pmf: Option<String>,
        #[arg(long)]
        pmf_file: Option<PathBuf>,
        #[arg(long)]
        t: f64,
    },
    /// Shift a mass function by a binomial bridge and evaluate the induced
    /// path's margins and entropy curvature.
    Translate {
        #[arg(long, conflicts_with = "pmf_file")]
        pmf: Option<String>,
        #[arg(long)]
        pmf_file: Option<PathBuf>,
        /// Shift distance.
        #[arg(long, default_value_t = 1)]
        shift: usize,
    },
}

fn init_threads() {
    if let Ok(threads) = std::env::var("DOTK_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
