use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Influence-matrix analysis, matrix concentration checks and spanning-tree
/// sparsification for small explicit distributions.
#[derive(Debug, Parser)]
#[command(name = "linf", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Master seed for every randomized step.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Slack allowed when comparing a measured value with its threshold.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One-sided and two-sided influence parameters of a distribution.
    Analyze {
        #[arg(long)]
        dist: PathBuf,
        /// Only pin sets of at most this size.
        #[arg(long)]
        max_lambda: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tail probabilities of a random matrix sum against the tail bound.
    Chernoff {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        matrices: PathBuf,
        /// Comma-separated deviations in [0, 1].
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
        delta: Vec<f64>,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
        /// Samples per deviation when the support is too large to enumerate.
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average of reweighted random spanning trees, with its spectral check.
    Sparsify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 4.0)]
        constant: f64,
        /// Laplacian CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary CSV with t and the restricted eigenvalue range.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Decide the stochastic covering property.
    ScpCheck {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the one-sided/two-sided separating distribution.
    Counterexample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Distribution JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Check the upper and lower bounds on the two parameters.
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Spanning-tree edge distribution of a small graph.
    TreeDist {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Homogenize a distribution and compare influence parameters.
    Homogenize {
        #[arg(long)]
        dist: PathBuf,
        /// Homogenized distribution JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the acceptance criteria.
    Selftest {
        /// Run a single criterion.
        #[arg(long)]
        criterion: Option<u8>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SideArg {
    Max,
    Min,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(commands::Status::Passed) => ExitCode::SUCCESS,
        Ok(commands::Status::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
