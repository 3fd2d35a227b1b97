use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use loocluster_core::cluster::{
    adaptive_spectral_cluster, lrt_cluster, misclustering_loss, rank_one_cluster, spectral_cluster,
    KMeansOptions, Solver,
};
use loocluster_core::mixture::make_instance;
use loocluster_core::perturb::{BoundKind, BoundReport, ReportContext};
use loocluster_core::Matrix;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Family, InstanceConfig, WORKERS_ENV};
use crate::error::{HarnessError, Result};
use crate::experiment::run_experiment;
use crate::io::{read_labels, read_matrix, write_atomic, write_labels, write_matrix};
use crate::records::read_records;
use crate::report::{aggregate_report, fit_rate_slope, gaussian_exponent, report_csv};

#[derive(Debug, Parser)]
#[command(
    name = "loocluster",
    version,
    about = "Leave-one-out subspace bounds and spectral clustering experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    /// Project on the top `r` left singular vectors, then k-means.
    Spectral,
    /// Like `spectral`, with `r` chosen by the singular value gap threshold.
    Adaptive,
    /// Two groups from the first singular vector.
    Rankone,
    /// Likelihood ratio test for centres `±δ·1_p` with known noise.
    Lrt,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a mixture instance and write `x.csv`, `signal.csv`, `noise.csv` and `labels.txt`.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-column leave-one-out distances and perturbation bounds as CSV.
    Bounds {
        matrix: PathBuf,
        #[arg(long)]
        r: usize,
        /// Instance config that regenerates `matrix`; adds the mixture bounds.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = WORKERS_ENV, default_value_t = 1)]
        workers: usize,
    },
    /// Cluster the columns of a matrix file; prints 1-based labels.
    Cluster {
        matrix: PathBuf,
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        /// Gap threshold `T` for `adaptive`.
        #[arg(long)]
        threshold: Option<f64>,
        /// True labels; prints the misclustering loss as well.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Centre half-offset `δ` for `lrt`.
        #[arg(long)]
        delta: Option<f64>,
        /// Noise family for `lrt`.
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        /// Noise standard deviation for `lrt`.
        #[arg(long)]
        sigma: Option<f64>,
        /// k-means seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment from a config file.
    Mc {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Summarise a records file per cell and estimator.
    Report {
        records: PathBuf,
        /// Also fit `log(mean loss)` against `Δ²/(8σ²)` for this estimator.
        #[arg(long)]
        fit: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Laplace,
    Rademacher,
    Uniform,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Laplace => Family::Laplace,
            FamilyArg::Rademacher => Family::Rademacher,
            FamilyArg::Uniform => Family::Uniform,
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| HarnessError::io(Path::new("<stdout>"), e)),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const BOUNDS_HEADER: &str =
    "column_index,actual,rho,wedin,wedin_applicable,loo,loo_applicable,loo_relaxed,\
relaxed_applicable,mixture_kappa,mixture_r,residual_norm,gap";

/// One CSV row per column; indices are 1-based.
pub fn bounds_csv(reports: &[BoundReport]) -> String {
    let mut out = String::from(BOUNDS_HEADER);
    out.push('\n');
    for rep in reports {
        let value = |k| rep.bound(k).and_then(|b| b.value);
        let applicable = |k| rep.bound(k).is_some_and(|b| b.applicable());
        let row = [
            (rep.column_index + 1).to_string(),
            rep.actual_distance.to_string(),
            rep.rho.to_string(),
            opt(value(BoundKind::Wedin)),
            applicable(BoundKind::Wedin).to_string(),
            opt(value(BoundKind::LooGeneral)),
            applicable(BoundKind::LooGeneral).to_string(),
            opt(value(BoundKind::LooRelaxed)),
            applicable(BoundKind::LooRelaxed).to_string(),
            opt(value(BoundKind::MixtureKappa)),
            opt(value(BoundKind::MixtureR)),
            rep.residual_norm.to_string(),
            rep.spectral_gap.to_string(),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn load_instance(
    config: &Path,
    seed: Option<u64>,
) -> Result<loocluster_core::mixture::MixtureInstance> {
    let mut cfg = InstanceConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(make_instance(&cfg.spec()?)?)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(HarnessError::Config("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))
}

fn require<T>(v: Option<T>, flag: &str, algo: &str) -> Result<T> {
    v.ok_or_else(|| HarnessError::Config(format!("--{flag} is required for --algo {algo}")))
}

fn cluster_labels(x: &Matrix, cmd: &Command) -> Result<(Vec<usize>, usize)> {
    let Command::Cluster {
        algo,
        k,
        r,
        threshold,
        delta,
        family,
        sigma,
        seed,
        ..
    } = cmd
    else {
        unreachable!("called for the cluster subcommand")
    };
    let solver = Solver::Lloyd(KMeansOptions::with_seed(*seed));
    Ok(match algo {
        Algo::Spectral => {
            let k = require(*k, "k", "spectral")?;
            (spectral_cluster(x, k, *r, &solver)?.labels, k)
        }
        Algo::Adaptive => {
            let k = require(*k, "k", "adaptive")?;
            let t = require(*threshold, "threshold", "adaptive")?;
            (adaptive_spectral_cluster(x, k, t, &solver)?.labels, k)
        }
        Algo::Rankone => (rank_one_cluster(x)?.result.labels, 2),
        Algo::Lrt => {
            let d = require(*delta, "delta", "lrt")?;
            let f = Family::from(require(*family, "family", "lrt")?);
            let s = require(*sigma, "sigma", "lrt")?;
            (lrt_cluster(x, d, f.with_sd(s))?, 2)
        }
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { config, out, seed } => {
            let inst = load_instance(&config, seed)?;
            std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
            write_matrix(&out.join("x.csv"), &inst.x)?;
            write_matrix(&out.join("signal.csv"), &inst.signal)?;
            write_matrix(&out.join("noise.csv"), &inst.noise)?;
            write_labels(&out.join("labels.txt"), &inst.z_star)
        }
        Command::Bounds {
            matrix,
            r,
            config,
            seed,
            out,
            workers,
        } => {
            let x = read_matrix(&matrix)?;
            let inst = config
                .as_deref()
                .map(|c| load_instance(c, seed))
                .transpose()?;
            if let Some(inst) = &inst {
                if inst.x != x {
                    return Err(HarnessError::Config(format!(
                        "{} does not regenerate {}",
                        config.as_ref().expect("set").display(),
                        matrix.display()
                    )));
                }
            }
            let ctx = ReportContext::new(&x, r, inst.as_ref())?;
            let reports: Vec<BoundReport> = pool(workers)?.install(|| {
                (0..ctx.columns())
                    .into_par_iter()
                    .map(|i| ctx.column(i))
                    .collect::<loocluster_core::Result<_>>()
            })?;
            emit(out.as_deref(), &bounds_csv(&reports))
        }
        ref cmd @ Command::Cluster {
            ref matrix,
            ref truth,
            ref out,
            ..
        } => {
            let x = read_matrix(matrix)?;
            let (labels, k) = cluster_labels(&x, cmd)?;
            let mut text = crate::io::format_labels(&labels);
            if let Some(truth) = truth {
                let z_star = read_labels(truth)?;
                let (loss, _) = misclustering_loss(
                    &labels,
                    &z_star,
                    k.max(z_star.iter().max().map_or(0, |m| m + 1)),
                )?;
                text.push_str(&format!("loss={loss}\n"));
            }
            emit(out.as_deref(), &text)
        }
        Command::Mc {
            config,
            seed,
            workers,
            output,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            if let Some(o) = output {
                cfg.output = o;
            }
            let records = run_experiment(&cfg)?;
            let failed = records.iter().filter(|r| r.failed()).count();
            eprintln!(
                "{} records ({failed} failed) in {}",
                records.len(),
                cfg.output.display()
            );
            Ok(())
        }
        Command::Report { records, fit, out } => {
            let records = read_records(&records)?;
            let mut text = report_csv(&aggregate_report(&records))?;
            if let Some(est) = fit {
                let chosen: Vec<_> = records.into_iter().filter(|r| r.estimator == est).collect();
                let f = fit_rate_slope(&chosen, gaussian_exponent)?;
                text.push_str(&format!(
                    "# fit {est}: slope={} intercept={} cells={}",
                    f.slope,
                    f.intercept,
                    f.points.len()
                ));
                if !f.excluded.is_empty() {
                    text.push_str(&format!(" excluded={}", f.excluded.join(";")));
                }
                text.push('\n');
            }
            emit(out.as_deref(), &text)
        }
    }
}
