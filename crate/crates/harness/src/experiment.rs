//! Seeded Monte Carlo sweeps over a parameter grid.
//!
//! Every trial is a pure function of `(master seed, cell id, trial index)`.
//! Trials run on a rayon pool in chunks; after each chunk the whole record
//! set is rewritten atomically in canonical order, so the file never depends
//! on scheduling and an interrupted sweep resumes where it stopped.

use std::collections::{BTreeMap, HashMap};

use loocluster_core::cluster::{
    adaptive_spectral_cluster, entrywise_diagnostics, lrt_cluster, misclustering_loss,
    rank_one_cluster, spectral_cluster, KMeansOptions, Solver, ORACLE_CAP,
};
use loocluster_core::mixture::{
    diagnostics, make_instance, two_cluster_spec, Assignment, DiagnosticQuantities,
    MixtureInstance, MixtureSpec,
};
use loocluster_core::perturb::bound_report;
use rayon::prelude::*;

use crate::config::{Cell, ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::records::{read_records, write_records, TrialRecord};
use crate::seed::{splitmix64, trial_seed};

/// Slack allowed before a bound counts as violated.
pub const BOUND_SLACK: f64 = 1e-9;

/// Trials per worker between two rewrites of the output file.
const TRIALS_PER_CHUNK: usize = 32;

/// The mixture model a cell describes, seeded for one trial.
pub fn cell_spec(cell: &Cell, seed: u64) -> Result<MixtureSpec> {
    let spec = if cell.experiment == ExperimentKind::Suboptimality {
        // centres ±δ·1_p at distance Δ
        let half = cell.delta / (2.0 * (cell.p as f64).sqrt());
        two_cluster_spec(half, cell.p, cell.n, cell.family.with_sd(cell.sigma), seed)?
    } else {
        MixtureSpec {
            n: cell.n,
            centers: cell.centers()?,
            assignment: Assignment::BalancedRandom,
            noise: cell.family.noise(cell.sigma),
            seed,
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn kmeans_solver(seed: u64) -> Solver {
    Solver::Lloyd(KMeansOptions::with_seed(splitmix64(seed)))
}

fn loss_of(labels: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    Ok(misclustering_loss(labels, truth, k)?.0)
}

type Outcome = Result<EstimatorOutcome>;

#[derive(Debug, Default)]
struct EstimatorOutcome {
    loss: Option<f64>,
    r_hat: Option<usize>,
    max_ratio: Option<f64>,
    violations: u64,
}

fn spectral(inst: &MixtureInstance, cell: &Cell, r: usize, seed: u64) -> Outcome {
    let res = spectral_cluster(&inst.x, cell.k, Some(r), &kmeans_solver(seed))?;
    Ok(EstimatorOutcome {
        loss: Some(loss_of(&res.labels, &inst.z_star, cell.k)?),
        r_hat: Some(r),
        ..Default::default()
    })
}

fn bounds(inst: &MixtureInstance, cell: &Cell, seed: u64) -> Outcome {
    let r = cell.r.unwrap_or(cell.k);
    let mut out = spectral(inst, cell, r, seed)?;
    let mut max_ratio = 0.0f64;
    for rep in bound_report(&inst.x, r, Some(inst))? {
        for b in &rep.bounds {
            let Some(v) = b.value else { continue };
            if rep.actual_distance > v + BOUND_SLACK {
                out.violations += 1;
            }
            let ratio = if v > 0.0 {
                rep.actual_distance / v
            } else if rep.actual_distance > BOUND_SLACK {
                f64::INFINITY
            } else {
                0.0
            };
            max_ratio = max_ratio.max(ratio);
        }
    }
    out.max_ratio = Some(max_ratio);
    Ok(out)
}

fn entrywise(inst: &MixtureInstance, cell: &Cell, seed: u64) -> Outcome {
    let r = cell.r.unwrap_or(cell.k);
    let solver = if (cell.k as f64).powi(cell.n as i32) <= ORACLE_CAP {
        Solver::Exact
    } else {
        kmeans_solver(seed)
    };
    let res = spectral_cluster(&inst.x, cell.k, Some(r), &solver)?.with_truth(&inst.z_star)?;
    let mut out = EstimatorOutcome {
        loss: res.loss,
        r_hat: Some(r),
        ..Default::default()
    };
    let mut max_ratio = None::<f64>;
    for rec in entrywise_diagnostics(inst, &res, r)?
        .iter()
        .filter(|rec| rec.misclustered)
    {
        let lhs = 2.0 * rec.full_noise_norm;
        if lhs < rec.threshold_simple {
            out.violations += 1;
        }
        let ratio = if lhs > 0.0 {
            rec.threshold_simple / lhs
        } else {
            f64::INFINITY
        };
        max_ratio = Some(max_ratio.map_or(ratio, |m| m.max(ratio)));
    }
    out.max_ratio = max_ratio;
    Ok(out)
}

/// Named estimators run on each trial of a cell.
fn estimators(
    inst: &MixtureInstance,
    d: Option<&DiagnosticQuantities>,
    cell: &Cell,
    seed: u64,
) -> Vec<(&'static str, Outcome)> {
    let default_r = cell.r.unwrap_or(cell.k);
    match cell.experiment {
        ExperimentKind::Bounds => vec![("spectral", bounds(inst, cell, seed))],
        ExperimentKind::RateGmm | ExperimentKind::RateSubg => {
            vec![("spectral", spectral(inst, cell, default_r, seed))]
        }
        ExperimentKind::Entrywise => vec![("spectral", entrywise(inst, cell, seed))],
        ExperimentKind::Adaptive => {
            let fixed = match (cell.r, d) {
                (Some(r), _) => spectral(inst, cell, r, seed),
                (None, Some(d)) if d.kappa > 0 => spectral(inst, cell, d.kappa, seed),
                _ => Err(HarnessError::Config(
                    "the signal rank is unavailable".into(),
                )),
            };
            let adaptive = d
                .ok_or_else(|| HarnessError::Config("‖E‖ is unavailable".into()))
                .and_then(|d| {
                    let t = cell.threshold_factor.expect("validated") * d.e_opnorm;
                    let res = adaptive_spectral_cluster(&inst.x, cell.k, t, &kmeans_solver(seed))?;
                    Ok(EstimatorOutcome {
                        loss: Some(loss_of(&res.labels, &inst.z_star, cell.k)?),
                        r_hat: Some(res.r_used),
                        ..Default::default()
                    })
                });
            vec![("spectral", fixed), ("adaptive", adaptive)]
        }
        ExperimentKind::Suboptimality => {
            let rank_one = rank_one_cluster(&inst.x)
                .map_err(HarnessError::from)
                .and_then(|res| {
                    Ok(EstimatorOutcome {
                        loss: Some(loss_of(&res.result.labels, &inst.z_star, 2)?),
                        r_hat: Some(1),
                        ..Default::default()
                    })
                });
            let half = cell.delta / (2.0 * (cell.p as f64).sqrt());
            let lrt = lrt_cluster(&inst.x, half, cell.family.with_sd(cell.sigma))
                .map_err(HarnessError::from)
                .and_then(|z| {
                    Ok(EstimatorOutcome {
                        loss: Some(loss_of(&z, &inst.z_star, 2)?),
                        ..Default::default()
                    })
                });
            vec![("rank_one", rank_one), ("lrt", lrt)]
        }
    }
}

/// Names of the estimators an experiment records, in output order.
pub fn estimator_names(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Adaptive => &["spectral", "adaptive"],
        ExperimentKind::Suboptimality => &["rank_one", "lrt"],
        _ => &["spectral"],
    }
}

/// Runs one trial; failures become records with an `error` and no loss.
pub fn run_trial(
    cfg: &ExperimentConfig,
    cell: &Cell,
    cell_id: &str,
    trial: u64,
) -> Vec<TrialRecord> {
    let seed = trial_seed(cfg.master_seed, cell_id, trial);
    let base = TrialRecord {
        experiment: cell.experiment,
        cell_id: cell_id.to_string(),
        family: cell.family,
        p: cell.p,
        n: cell.n,
        k: cell.k,
        delta: cell.delta,
        sigma: cell.sigma,
        threshold_factor: cell.threshold_factor,
        trial_index: trial,
        seed_used: seed,
        estimator: String::new(),
        loss: None,
        r_hat: None,
        rho0: None,
        psi0: None,
        psi1: None,
        psi3: None,
        max_ratio: None,
        violations: 0,
        error: None,
    };
    let inst = match cell_spec(cell, seed).and_then(|s| Ok(make_instance(&s)?)) {
        Ok(inst) => inst,
        Err(e) => {
            return estimator_names(cell.experiment)
                .iter()
                .map(|name| TrialRecord {
                    estimator: name.to_string(),
                    error: Some(e.to_string()),
                    ..base.clone()
                })
                .collect()
        }
    };
    let d = diagnostics(&inst).ok();
    let base = TrialRecord {
        rho0: d.as_ref().map(|d| d.rho0),
        psi0: d.as_ref().map(|d| d.psi0),
        psi1: d.as_ref().and_then(|d| d.psi1),
        psi3: d.as_ref().and_then(|d| d.psi3),
        ..base
    };
    estimators(&inst, d.as_ref(), cell, seed)
        .into_iter()
        .map(|(name, outcome)| {
            let mut rec = TrialRecord {
                estimator: name.to_string(),
                ..base.clone()
            };
            match outcome {
                Ok(o) => {
                    rec.loss = o.loss;
                    rec.r_hat = o.r_hat;
                    rec.max_ratio = o.max_ratio;
                    rec.violations = o.violations;
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect()
}

/// Runs every missing `(cell, trial)` pair of the sweep and returns the full
/// record set in canonical order: grid order, then trial, then estimator.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let workers = cfg.resolved_workers()?;
    if workers == 0 {
        return Err(HarnessError::Config("workers must be at least 1".into()));
    }
    let cells = cfg.cells()?;
    let ids: Vec<String> = cells.iter().map(Cell::id).collect();
    let index: HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let trials = cfg.trials_per_cell as u64;
    for (cell, id) in cells.iter().zip(&ids) {
        cell_spec(cell, trial_seed(cfg.master_seed, id, 0))?;
    }

    let mut done: BTreeMap<(usize, u64), Vec<TrialRecord>> = BTreeMap::new();
    if cfg.output.exists() {
        for rec in read_records(&cfg.output)? {
            let Some(&c) = index.get(rec.cell_id.as_str()) else {
                return Err(HarnessError::Config(format!(
                    "{} holds cell `{}`, which is not in this configuration",
                    cfg.output.display(),
                    rec.cell_id
                )));
            };
            if rec.trial_index >= trials
                || rec.seed_used != trial_seed(cfg.master_seed, &rec.cell_id, rec.trial_index)
            {
                return Err(HarnessError::Config(format!(
                    "{} was produced with a different master seed or trial count",
                    cfg.output.display()
                )));
            }
            done.entry((c, rec.trial_index)).or_default().push(rec);
        }
        let names = estimator_names(cfg.experiment);
        // a trial counts as done only with its full set of estimators
        done.retain(|_, recs| recs.len() == names.len());
    }

    let todo: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .filter(|key| !done.contains_key(key))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    for chunk in todo.chunks(TRIALS_PER_CHUNK * workers) {
        let fresh: Vec<Vec<TrialRecord>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|&(c, t)| run_trial(cfg, &cells[c], &ids[c], t))
                .collect()
        });
        done.extend(chunk.iter().copied().zip(fresh));
        write_records(&cfg.output, &flatten(&done))?;
    }
    if todo.is_empty() {
        write_records(&cfg.output, &flatten(&done))?;
    }
    Ok(flatten(&done))
}

fn flatten(done: &BTreeMap<(usize, u64), Vec<TrialRecord>>) -> Vec<TrialRecord> {
    done.values().flatten().cloned().collect()
}
