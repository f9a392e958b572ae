//! Per-network means, confidence intervals, Jain's fairness index and the
//! results CSV.

use std::cmp::Ordering;
use std::io;

use serde::{Deserialize, Serialize};

use crate::phy::Aggregation;
use crate::scenario::Deployment;
use crate::{Error, Result};

/// `(Σx)² / (n Σx²)`; `None` for empty or all-zero input.
pub fn jain_index(values: &[f64]) -> Option<f64> {
    let sum: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|x| x * x).sum();
    if values.is_empty() || sq == 0.0 {
        return None;
    }
    Some(sum * sum / (values.len() as f64 * sq))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Half-width of the normal-approximation 95% interval of the mean.
pub fn ci95(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    1.96 * var.sqrt() / (n as f64).sqrt()
}

/// Per-node throughputs (Mbps) of one realization, split by technology.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedSample {
    pub wifi: Vec<f64>,
    pub nru: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Simulated,
}

/// Sweep coordinates of one row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub experiment: String,
    pub n_gnb: usize,
    pub aggregation: Aggregation,
    pub wifi_ed: f64,
    pub nru_ed: f64,
    pub mcot_ms: f64,
    pub delta_us: u64,
    pub deployment: Deployment,
    pub nru_lbt: bool,
}

/// One line of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub n_gnb: usize,
    pub aggregation: Aggregation,
    pub wifi_ed: f64,
    pub nru_ed: f64,
    pub mcot_ms: f64,
    pub source: Source,
    pub mean_wifi: Option<f64>,
    pub mean_nru: Option<f64>,
    pub jain: Option<f64>,
    pub ci95_wifi: Option<f64>,
    pub ci95_nru: Option<f64>,
    pub n_seeds: usize,
    pub delta_us: u64,
    pub deployment: Deployment,
    pub nru_lbt: bool,
}

pub const CSV_COLUMNS: [&str; 16] = [
    "experiment",
    "n_gnb",
    "aggregation",
    "wifi_ed",
    "nru_ed",
    "mcot_ms",
    "source",
    "mean_wifi",
    "mean_nru",
    "jain",
    "ci95_wifi",
    "ci95_nru",
    "n_seeds",
    "delta_us",
    "deployment",
    "nru_lbt",
];

/// Folds per-seed samples into one row. Network means pool every node of
/// every seed; intervals are over per-seed network means; Jain's index is
/// taken over the two network means.
pub fn aggregate(key: &CellKey, source: Source, samples: &[SeedSample]) -> Result<ExperimentRow> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no realizations to aggregate".into()));
    }
    let pooled = |f: fn(&SeedSample) -> &Vec<f64>| -> (Option<f64>, Option<f64>) {
        let all: Vec<f64> = samples.iter().flat_map(|s| f(s).iter().copied()).collect();
        let per_seed: Vec<f64> = samples.iter().filter_map(|s| mean(f(s))).collect();
        (mean(&all), (!per_seed.is_empty()).then(|| ci95(&per_seed)))
    };
    let (mean_wifi, ci95_wifi) = pooled(|s| &s.wifi);
    let (mean_nru, ci95_nru) = pooled(|s| &s.nru);
    let jain = match (mean_wifi, mean_nru) {
        (Some(a), Some(b)) => jain_index(&[a, b]),
        _ => None,
    };
    Ok(ExperimentRow {
        experiment: key.experiment.clone(),
        n_gnb: key.n_gnb,
        aggregation: key.aggregation,
        wifi_ed: key.wifi_ed,
        nru_ed: key.nru_ed,
        mcot_ms: key.mcot_ms,
        source,
        mean_wifi,
        mean_nru,
        jain,
        ci95_wifi,
        ci95_nru,
        n_seeds: samples.len(),
        delta_us: key.delta_us,
        deployment: key.deployment,
        nru_lbt: key.nru_lbt,
    })
}

/// Total order used before writing, so output is independent of execution
/// order.
pub fn canonical_order(a: &ExperimentRow, b: &ExperimentRow) -> Ordering {
    a.experiment
        .cmp(&b.experiment)
        .then(a.deployment.as_str().cmp(b.deployment.as_str()))
        .then(a.nru_lbt.cmp(&b.nru_lbt))
        .then(a.aggregation.cmp(&b.aggregation))
        .then(a.wifi_ed.total_cmp(&b.wifi_ed))
        .then(a.nru_ed.total_cmp(&b.nru_ed))
        .then(a.mcot_ms.total_cmp(&b.mcot_ms))
        .then(a.delta_us.cmp(&b.delta_us))
        .then(a.n_gnb.cmp(&b.n_gnb))
        .then(a.source.cmp(&b.source))
}

pub fn write_csv<W: io::Write>(out: W, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Serialization(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS).map_err(|e| Error::Serialization(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<ExperimentRow>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(|e| Error::Serialization(e.to_string()))).collect()
}
