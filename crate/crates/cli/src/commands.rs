use std::fs;
use std::path::{Path, PathBuf};

use linf_core::concentration::{tail_probability, MatrixEnsemble, Side, TailSetup};
use linf_core::constructions::{build_counterexample, tree_distribution, verify_upper_bound, verify_lower_bound, verify_homogenization_influence};
use linf_core::graph::WeightedGraph;
use linf_core::influence::{analyze, LinfOptions};
use linf_core::sparsify::{spectral_check_with, sparsify_with, TreeSampler};
use linf_core::{acceptance, report, scp, Distribution};

use crate::{Cli, Command, SideArg};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: linf_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

type Result<T> = std::result::Result<T, CliError>;

/// Verdict of a successful run: all requested checks passed or not.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Passed,
    Failed,
}

impl Status {
    fn from_ok(ok: bool) -> Self {
        if ok {
            Status::Passed
        } else {
            Status::Failed
        }
    }
}

trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for linf_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| CliError::Core {
            context: what(),
            source,
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes to `path`, or to stdout when no path is given.
fn emit(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_distribution(path: &Path) -> Result<Distribution> {
    Distribution::from_json_str(&read(path)?).context(|| format!("reading distribution {}", path.display()))
}

fn load_graph(path: &Path) -> Result<WeightedGraph> {
    WeightedGraph::parse(&read(path)?).context(|| format!("reading graph {}", path.display()))
}

fn configure_pool(jobs: Option<usize>) -> Result<()> {
    let Some(jobs) = jobs else { return Ok(()) };
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Status> {
    configure_pool(cli.global.jobs)?;
    let seed = cli.global.seed;
    let tol = cli.global.tol;
    if !(tol >= 0.0) {
        return Err(CliError::Usage(format!("--tol must be non-negative, got {tol}")));
    }
    match &cli.command {
        Command::Analyze { dist, max_lambda, out } => {
            let mu = load_distribution(dist)?;
            let opts = LinfOptions {
                max_lambda: *max_lambda,
                ..Default::default()
            };
            let rep = analyze(&mu, &opts).context(|| "analyze".into())?;
            let csv = report::analyze_csv(&rep);
            emit(out.as_ref(), &csv)?;
            if out.is_some() {
                // The summary lines are the last two of the report.
                for line in csv.lines().filter(|l| l.starts_with('#')) {
                    println!("{}", line.trim_start_matches("# "));
                }
            }
            Ok(Status::Passed)
        }
        Command::Chernoff {
            dist,
            matrices,
            delta,
            side,
            trials,
            out,
        } => {
            let mu = load_distribution(dist)?;
            let ens = MatrixEnsemble::from_json_str(&read(matrices)?)
                .context(|| format!("reading ensemble {}", matrices.display()))?;
            let setup = TailSetup::for_distribution(&mu, &ens).context(|| "dependence parameter".into())?;
            let sides: &[Side] = match side {
                SideArg::Max => &[Side::Max],
                SideArg::Min => &[Side::Min],
                SideArg::Both => &[Side::Max, Side::Min],
            };
            let mut estimates = Vec::new();
            for &s in sides {
                for (i, &d) in delta.iter().enumerate() {
                    let stream_seed = seed.wrapping_add(i as u64);
                    let est = tail_probability(&mu, &ens, &setup, d, s, *trials, stream_seed)
                        .context(|| format!("tail at delta {d}"))?;
                    estimates.push(est);
                }
            }
            emit(out.as_ref(), &report::chernoff_csv(&estimates))?;
            Ok(Status::from_ok(
                estimates.iter().all(|e| e.empirical <= e.allowance() + tol),
            ))
        }
        Command::Sparsify {
            graph,
            epsilon,
            constant,
            out,
            report: report_path,
        } => {
            if !(*epsilon > 0.0 && *epsilon <= 1.0) {
                return Err(CliError::Usage(format!("--epsilon {epsilon} outside (0, 1]")));
            }
            let g = load_graph(graph)?;
            let sampler = TreeSampler::new(&g).context(|| "leverage scores".into())?;
            let sp = sparsify_with(&sampler, *epsilon, *constant, seed).context(|| "sparsify".into())?;
            let check = spectral_check_with(sampler.view(), &sp.laplacian, *epsilon)
                .context(|| "spectral check".into())?;
            emit(out.as_ref(), &report::matrix_csv(&sp.laplacian))?;
            let summary = report::sparsify_csv(sp.t, *epsilon, *constant, seed, &check);
            match report_path {
                Some(p) => emit(Some(p), &summary)?,
                None if out.is_some() => print!("{summary}"),
                None => eprint!("{summary}"),
            }
            Ok(Status::from_ok(check.ok))
        }
        Command::ScpCheck { dist, out } => {
            let mu = load_distribution(dist)?;
            let verdict = scp::check_scp(&mu).context(|| "covering property".into())?;
            emit(out.as_ref(), &report::scp_csv(&verdict))?;
            if out.is_some() {
                println!("holds={}", verdict.holds);
            }
            Ok(Status::from_ok(verdict.holds))
        }
        Command::Counterexample {
            n,
            k,
            out,
            verify,
            report: report_path,
        } => {
            let mu = build_counterexample(*n, *k).context(|| format!("counterexample n={n} k={k}"))?;
            if out.is_some() || !*verify {
                emit(out.as_ref(), &mu.to_json_string())?;
            }
            if !*verify {
                return Ok(Status::Passed);
            }
            let mut upper = verify_upper_bound(*n, *k).context(|| "upper bound".into())?;
            let mut lower = verify_lower_bound(*n, *k).context(|| "lower bound".into())?;
            upper.ok = upper.measured <= upper.bound + tol;
            lower.ok = lower.measured >= lower.lower - tol;
            let csv = report::bounds_csv(*n, *k, &upper, &lower);
            match report_path {
                Some(p) => emit(Some(p), &csv)?,
                None => print!("{csv}"),
            }
            Ok(Status::from_ok(upper.ok && lower.ok))
        }
        Command::TreeDist { graph, out } => {
            let g = load_graph(graph)?;
            let mu = tree_distribution(&g).context(|| "tree distribution".into())?;
            emit(out.as_ref(), &mu.to_json_string())?;
            Ok(Status::Passed)
        }
        Command::Homogenize {
            dist,
            out,
            report: report_path,
        } => {
            let mu = load_distribution(dist)?;
            let hom = mu.homogenize().context(|| "homogenize".into())?;
            if let Some(p) = out {
                emit(Some(p), &hom.to_json_string())?;
            }
            let mut check = verify_homogenization_influence(&mu).context(|| "homogenization check".into())?;
            check.ok = check.hom_one_sided_d <= 2.0 * check.two_sided_d + tol
                && check.reflection_residual <= linf_core::constructions::REFLECTION_TOL;
            emit(report_path.as_ref(), &report::homogenization_csv(&check))?;
            Ok(Status::from_ok(check.ok))
        }
        Command::Selftest { criterion } => {
            let outcomes = match criterion {
                Some(id) => vec![acceptance::run(*id)
                    .ok_or_else(|| CliError::Usage(format!("no criterion {id}")))?],
                None => acceptance::run_all(),
            };
            for o in &outcomes {
                println!("{o}");
            }
            Ok(Status::from_ok(outcomes.iter().all(|o| o.passed)))
        }
    }
}
