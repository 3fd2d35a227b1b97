//! Trial records and their CSV file.
//!
//! The file starts with the schema line [`SCHEMA_LINE`], then a CSV header
//! and one row per (cell, trial, estimator).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentKind, Family};
use crate::error::{HarnessError, Result};
use crate::io::write_atomic;

pub const SCHEMA_LINE: &str = "# loocluster-records schema=1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: ExperimentKind,
    pub cell_id: String,
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub sigma: f64,
    pub threshold_factor: Option<f64>,
    pub trial_index: u64,
    pub seed_used: u64,
    pub estimator: String,
    /// Misclustering fraction; empty when the trial failed.
    pub loss: Option<f64>,
    pub r_hat: Option<usize>,
    pub rho0: Option<f64>,
    pub psi0: Option<f64>,
    pub psi1: Option<f64>,
    pub psi3: Option<f64>,
    /// Largest `actual / bound` over the applicable bounds of the trial.
    pub max_ratio: Option<f64>,
    pub violations: u64,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

pub fn to_csv(records: &[TrialRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(SCHEMA_LINE.as_bytes());
    out.push(b'\n');
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)
            .map_err(|e| HarnessError::csv(Path::new("<records>"), e))?;
    }
    if records.is_empty() {
        // an empty table still carries its header
        w.write_record(HEADER)
            .map_err(|e| HarnessError::csv(Path::new("<records>"), e))?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::Config(e.to_string()))
}

const HEADER: [&str; 21] = [
    "experiment",
    "cell_id",
    "family",
    "p",
    "n",
    "k",
    "delta",
    "sigma",
    "threshold_factor",
    "trial_index",
    "seed_used",
    "estimator",
    "loss",
    "r_hat",
    "rho0",
    "psi0",
    "psi1",
    "psi3",
    "max_ratio",
    "violations",
    "error",
];

pub fn parse_records(text: &str, path: &Path) -> Result<Vec<TrialRecord>> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    if first.trim_end() != SCHEMA_LINE {
        return Err(HarnessError::parse(
            path,
            1,
            format!("expected `{SCHEMA_LINE}`"),
        ));
    }
    if rest.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    let header = reader.headers().map_err(|e| HarnessError::csv(path, e))?;
    if header.iter().ne(HEADER) {
        return Err(HarnessError::parse(path, 2, "unexpected column layout"));
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| HarnessError::parse(path, i + 3, e.to_string())))
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_records(&text, path)
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    write_atomic(path, &to_csv(records)?)
}

#[cfg(test)]
pub(crate) fn sample_record(cell: &str, trial: u64, loss: Option<f64>) -> TrialRecord {
    TrialRecord {
        experiment: ExperimentKind::RateGmm,
        cell_id: cell.to_string(),
        family: Family::Gaussian,
        p: 5,
        n: 10,
        k: 2,
        delta: 4.0,
        sigma: 1.0,
        threshold_factor: None,
        trial_index: trial,
        seed_used: 17,
        estimator: "spectral".into(),
        loss,
        r_hat: Some(2),
        rho0: Some(f64::INFINITY),
        psi0: Some(3.25),
        psi1: None,
        psi3: Some(0.1 + 0.2),
        max_ratio: None,
        violations: 0,
        error: None,
    }
}
