//! Evaluation quantities and experiment records.

use std::io;

use serde::{Deserialize, Serialize};

use crate::sim::ScheduleResult;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("{what} has {got} entries, expected {expected}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("reference objective must be positive, got {0}")]
    ZeroReference(f64),
    #[error("percentile of an empty completion list")]
    Empty,
    #[error("percentile {0} outside (0, 100]")]
    Quantile(f64),
}

/// `sum w_m T_m`.
pub fn total_weighted_cct(result: &ScheduleResult, weights: &[f64]) -> Result<f64, MetricsError> {
    if weights.len() != result.completion.len() {
        return Err(MetricsError::DimensionMismatch {
            what: "weights",
            expected: result.completion.len(),
            got: weights.len(),
        });
    }
    Ok(weights.iter().zip(&result.completion).map(|(w, t)| w * t).sum())
}

pub fn normalized_weighted_cct(candidate: f64, reference: f64) -> Result<f64, MetricsError> {
    if !(reference > 0.0) {
        return Err(MetricsError::ZeroReference(reference));
    }
    Ok(candidate / reference)
}

/// Nearest-rank percentile: the `ceil(q/100 * M)`-th smallest value.
pub fn percentile_cct(completions: &[f64], q: f64) -> Result<f64, MetricsError> {
    if completions.is_empty() {
        return Err(MetricsError::Empty);
    }
    if !(q > 0.0 && q <= 100.0) {
        return Err(MetricsError::Quantile(q));
    }
    let mut v = completions.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q / 100.0) * v.len() as f64).ceil() as usize;
    Ok(v[rank.clamp(1, v.len()) - 1])
}

/// `objective / lower_bound`; 1 when both are zero (empty instance).
pub fn approx_ratio(objective: f64, lower_bound: f64) -> f64 {
    if lower_bound > 0.0 {
        objective / lower_bound
    } else if objective == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// One row of experiment output. Columns appear in field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub scheme: String,
    pub mode: String,
    pub num_cores: usize,
    pub num_ports: usize,
    pub num_coflows: usize,
    pub delay: f64,
    /// Core rates joined with `|`.
    pub rates: String,
    pub seed: u64,
    pub release_policy: String,
    pub total_weighted_cct: Option<f64>,
    pub normalized_weighted_cct: Option<f64>,
    pub p95_cct: Option<f64>,
    pub p99_cct: Option<f64>,
    pub lp_bound: Option<f64>,
    pub approx_ratio: Option<f64>,
    pub runtime_seconds: Option<f64>,
    pub error: Option<String>,
}

pub fn format_rates(rates: &[f64]) -> String {
    rates.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("|")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

pub fn write_records<W: io::Write>(records: &[ExperimentRecord], format: OutputFormat, out: W) -> io::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            if records.is_empty() {
                w.write_record(RECORD_COLUMNS)?;
            }
            for r in records {
                w.serialize(r).map_err(io::Error::other)?;
            }
            w.flush()
        }
        OutputFormat::Jsonl => {
            let mut out = io::BufWriter::new(out);
            for r in records {
                serde_json::to_writer(&mut out, r)?;
                io::Write::write_all(&mut out, b"\n")?;
            }
            io::Write::flush(&mut out)
        }
    }
}

pub fn read_records_csv<R: io::Read>(input: R) -> Result<Vec<ExperimentRecord>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub const RECORD_COLUMNS: [&str; 17] = [
    "scheme",
    "mode",
    "num_cores",
    "num_ports",
    "num_coflows",
    "delay",
    "rates",
    "seed",
    "release_policy",
    "total_weighted_cct",
    "normalized_weighted_cct",
    "p95_cct",
    "p99_cct",
    "lp_bound",
    "approx_ratio",
    "runtime_seconds",
    "error",
];
