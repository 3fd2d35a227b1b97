//! Per-cell summaries and the log-linear rate fit.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::{ExperimentKind, Family};
use crate::error::{HarnessError, Result};
use crate::records::TrialRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell_id: String,
    pub estimator: String,
    pub experiment: ExperimentKind,
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub sigma: f64,
    pub threshold_factor: Option<f64>,
    /// Trials with a loss.
    pub trials: usize,
    pub failures: usize,
    pub mean_loss: f64,
    pub std_error: f64,
    pub ratio_q50: Option<f64>,
    pub ratio_q90: Option<f64>,
    pub ratio_max: Option<f64>,
    pub violations: u64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// One row per `(cell id, estimator)`, ordered by cell id then estimator.
pub fn aggregate_report(records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(&str, &str), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.cell_id.as_str(), r.estimator.as_str()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((cell_id, estimator), recs)| {
            let first = recs[0];
            let losses: Vec<f64> = recs.iter().filter_map(|r| r.loss).collect();
            let m = losses.len();
            let mean = if m > 0 {
                losses.iter().sum::<f64>() / m as f64
            } else {
                f64::NAN
            };
            let std_error = if m > 1 {
                let var =
                    losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (m - 1) as f64;
                (var / m as f64).sqrt()
            } else {
                0.0
            };
            let mut ratios: Vec<f64> = recs.iter().filter_map(|r| r.max_ratio).collect();
            ratios.sort_by(f64::total_cmp);
            CellSummary {
                cell_id: cell_id.to_string(),
                estimator: estimator.to_string(),
                experiment: first.experiment,
                family: first.family,
                p: first.p,
                n: first.n,
                k: first.k,
                delta: first.delta,
                sigma: first.sigma,
                threshold_factor: first.threshold_factor,
                trials: m,
                failures: recs.iter().filter(|r| r.failed()).count(),
                mean_loss: mean,
                std_error,
                ratio_q50: quantile(&ratios, 0.5),
                ratio_q90: quantile(&ratios, 0.9),
                ratio_max: ratios.last().copied(),
                violations: recs.iter().map(|r| r.violations).sum(),
            }
        })
        .collect()
}

pub fn report_csv(rows: &[CellSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(x, log mean loss)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    /// Cells left out because their mean loss was zero.
    pub excluded: Vec<String>,
}

/// Ordinary least squares of `log(mean loss)` on `exponent_fn(cell)` over the
/// cells of `records`; pass the records of a single estimator.
pub fn fit_rate_slope(
    records: &[TrialRecord],
    exponent_fn: impl Fn(&CellSummary) -> f64,
) -> Result<RateFit> {
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for cell in aggregate_report(records) {
        if cell.trials == 0 {
            continue;
        }
        if cell.mean_loss > 0.0 {
            points.push((exponent_fn(&cell), cell.mean_loss.ln()));
        } else {
            excluded.push(cell.cell_id);
        }
    }
    if points.len() < 3 {
        return Err(HarnessError::InsufficientData {
            usable: points.len(),
            excluded,
        });
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Config(
            "every cell has the same exponent; the slope is undefined".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        points,
        excluded,
    })
}

/// `Δ² / (8σ²)`, the exponent of the Gaussian-mixture rate.
pub fn gaussian_exponent(cell: &CellSummary) -> f64 {
    cell.delta * cell.delta / (8.0 * cell.sigma * cell.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::sample_record;

    fn cell_records(x: f64, losses: &[f64]) -> Vec<TrialRecord> {
        losses
            .iter()
            .enumerate()
            .map(|(t, &l)| {
                let mut r = sample_record(&format!("x={x}"), t as u64, Some(l));
                r.delta = x;
                r
            })
            .collect()
    }

    #[test]
    fn exact_exponential_recovers_unit_slope() {
        for scale in [1.0, 0.5] {
            let records: Vec<TrialRecord> = [1.0, 2.0, 3.5]
                .iter()
                .flat_map(|&x: &f64| cell_records(x, &[scale * (-x).exp()]))
                .collect();
            let fit = fit_rate_slope(&records, |c| c.delta).unwrap();
            assert!((fit.slope + 1.0).abs() < 1e-12);
            assert!((fit.intercept - f64::ln(scale)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_loss_cells_are_excluded_and_reported() {
        let mut records: Vec<TrialRecord> = [1.0, 2.0]
            .iter()
            .flat_map(|&x: &f64| cell_records(x, &[(-x).exp()]))
            .collect();
        records.extend(cell_records(9.0, &[0.0, 0.0]));
        match fit_rate_slope(&records, |c| c.delta) {
            Err(HarnessError::InsufficientData {
                usable: 2,
                excluded,
            }) => assert_eq!(excluded, vec!["x=9".to_string()]),
            other => panic!("{other:?}"),
        }
        records.extend(cell_records(3.0, &[(-3.0f64).exp()]));
        let fit = fit_rate_slope(&records, |c| c.delta).unwrap();
        assert_eq!(fit.points.len(), 3);
        assert_eq!(fit.excluded, vec!["x=9".to_string()]);
    }

    #[test]
    fn mean_and_standard_error() {
        let rows = aggregate_report(&cell_records(1.0, &[0.0, 0.1]));
        assert_eq!(rows.len(), 1);
        assert!((rows[0].mean_loss - 0.05).abs() < 1e-15);
        assert!((rows[0].std_error - 0.05).abs() < 1e-15);
        assert!(aggregate_report(&[]).is_empty());
    }

    #[test]
    fn failures_and_ratios() {
        let mut recs = cell_records(1.0, &[0.2, 0.4, 0.0]);
        recs[2].loss = None;
        recs[2].error = Some("boom".into());
        for (r, q) in recs.iter_mut().zip([1.0, 3.0, 2.0]) {
            r.max_ratio = Some(q);
            r.violations = 1;
        }
        let row = &aggregate_report(&recs)[0];
        assert_eq!((row.trials, row.failures, row.violations), (2, 1, 3));
        assert!((row.mean_loss - 0.3).abs() < 1e-15);
        assert_eq!((row.ratio_q50, row.ratio_max), (Some(2.0), Some(3.0)));
        assert!((row.ratio_q90.unwrap() - 2.8).abs() < 1e-12);
    }

    #[test]
    fn rows_are_ordered_by_cell_then_estimator() {
        let mut recs = cell_records(2.0, &[0.1]);
        recs.extend(cell_records(1.0, &[0.1]));
        let mut lrt = recs[1].clone();
        lrt.estimator = "lrt".into();
        recs.push(lrt);
        let rows = aggregate_report(&recs);
        let keys: Vec<(&str, &str)> = rows
            .iter()
            .map(|r| (r.cell_id.as_str(), r.estimator.as_str()))
            .collect();
        assert_eq!(
            keys,
            [("x=1", "lrt"), ("x=1", "spectral"), ("x=2", "spectral")]
        );
    }
}
