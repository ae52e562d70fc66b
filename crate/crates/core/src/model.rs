//! Problem domain types: network configuration, demand matrices, coflows and
//! instances, plus instance validation.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Switching technology of every core in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchMode {
    /// Optical circuit switching: one circuit per port, setup delay per circuit.
    Ocs,
    /// Electrical packet switching: no circuits, no reconfiguration delay.
    Eps,
}

impl fmt::Display for SwitchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwitchMode::Ocs => f.write_str("ocs"),
            SwitchMode::Eps => f.write_str("eps"),
        }
    }
}

/// Parallel switching cores sharing the same `num_ports` ingress/egress ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_ports: usize,
    /// Per-port rate of each core, volume per time unit.
    pub core_rates: Vec<f64>,
    /// Circuit setup delay in time units.
    pub reconfig_delay: f64,
    pub mode: SwitchMode,
}

impl NetworkConfig {
    pub fn ocs(num_ports: usize, core_rates: Vec<f64>, reconfig_delay: f64) -> Self {
        Self {
            num_ports,
            core_rates,
            reconfig_delay,
            mode: SwitchMode::Ocs,
        }
    }

    pub fn eps(num_ports: usize, core_rates: Vec<f64>) -> Self {
        Self {
            num_ports,
            core_rates,
            reconfig_delay: 0.0,
            mode: SwitchMode::Eps,
        }
    }

    pub fn num_cores(&self) -> usize {
        self.core_rates.len()
    }

    /// Aggregate port rate over all cores.
    pub fn aggregate_rate(&self) -> f64 {
        self.core_rates.iter().sum()
    }

    pub fn max_rate(&self) -> f64 {
        self.core_rates.iter().copied().fold(0.0, f64::max)
    }

    /// Delay that actually applies to circuit setup (zero under EPS).
    pub fn effective_delay(&self) -> f64 {
        match self.mode {
            SwitchMode::Ocs => self.reconfig_delay,
            SwitchMode::Eps => 0.0,
        }
    }

    fn violations(&self, out: &mut Vec<Violation>) {
        if self.num_ports == 0 {
            out.push(Violation::config("num_ports", "must be positive"));
        }
        if self.core_rates.is_empty() {
            out.push(Violation::config("core_rates", "at least one core is required"));
        }
        for (k, &r) in self.core_rates.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                out.push(Violation::config(
                    "core_rates",
                    format!("rate of core {k} must be positive, got {r}"),
                ));
            }
        }
        if !(self.reconfig_delay.is_finite() && self.reconfig_delay >= 0.0) {
            out.push(Violation::config(
                "reconfig_delay",
                format!("must be non-negative, got {}", self.reconfig_delay),
            ));
        }
        if self.mode == SwitchMode::Eps && self.reconfig_delay != 0.0 {
            out.push(Violation::config(
                "reconfig_delay",
                "EPS mode requires a zero reconfiguration delay",
            ));
        }
    }
}

/// Dense `n x n` traffic matrix; entry `(i, j)` is the volume from ingress `i`
/// to egress `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DemandMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    /// Builds a matrix from rows. Panics if the rows are not square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "demand matrix rows must be square");
            m.entries[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    /// Builds a matrix from `(i, j, volume)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut m = Self::zeros(n);
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n + j] += v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.entries[i * self.n..(i + 1) * self.n].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.get(i, j)).sum()
    }

    /// Strictly positive entries in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(move |(idx, &v)| (idx / n, idx % n, v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|v| v * c).collect(),
        }
    }

    pub fn plus(&self, other: &DemandMatrix) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// Stable, user-facing coflow identifier.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct CoflowId(pub u64);

impl fmt::Display for CoflowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coflow {
    pub id: CoflowId,
    pub demand: DemandMatrix,
    pub weight: f64,
    pub release: f64,
}

impl Coflow {
    pub fn new(id: u64, demand: DemandMatrix, weight: f64, release: f64) -> Self {
        Self {
            id: CoflowId(id),
            demand,
            weight,
            release,
        }
    }
}

/// A scheduling problem: network plus coflows in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub config: NetworkConfig,
    pub coflows: Vec<Coflow>,
}

impl Instance {
    pub fn new(config: NetworkConfig, coflows: Vec<Coflow>) -> Self {
        Self { config, coflows }
    }

    pub fn num_coflows(&self) -> usize {
        self.coflows.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.coflows.iter().map(|c| c.weight).collect()
    }

    pub fn releases(&self) -> Vec<f64> {
        self.coflows.iter().map(|c| c.release).collect()
    }

    pub fn all_released_at_zero(&self) -> bool {
        self.coflows.iter().all(|c| c.release == 0.0)
    }

    pub fn num_flows(&self) -> usize {
        self.coflows.iter().map(|c| c.demand.nnz()).sum()
    }

    /// Returns the instance as an error when any invariant is violated.
    pub fn ensure_valid(&self) -> Result<(), InvalidInstance> {
        match validate_instance(self) {
            ValidationReport::Ok => Ok(()),
            ValidationReport::Invalid(v) => Err(InvalidInstance(v)),
        }
    }
}

/// Where a validation problem was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subject {
    Config,
    Coflow(CoflowId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: Subject,
    pub field: String,
    pub message: String,
}

impl Violation {
    fn config(field: &str, message: impl Into<String>) -> Self {
        Self {
            subject: Subject::Config,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn coflow(id: CoflowId, field: &str, message: impl Into<String>) -> Self {
        Self {
            subject: Subject::Coflow(id),
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            Subject::Config => write!(f, "config.{}: {}", self.field, self.message),
            Subject::Coflow(id) => write!(f, "coflow {id}.{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationReport {
    Ok,
    Invalid(Vec<Violation>),
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, ValidationReport::Ok)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            ValidationReport::Ok => &[],
            ValidationReport::Invalid(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid instance: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InvalidInstance(pub Vec<Violation>);

/// Checks every instance invariant and lists all violations found.
pub fn validate_instance(instance: &Instance) -> ValidationReport {
    let mut out = Vec::new();
    instance.config.violations(&mut out);
    let n = instance.config.num_ports;
    let mut seen = HashSet::new();
    for c in &instance.coflows {
        if !seen.insert(c.id) {
            out.push(Violation::coflow(c.id, "id", "duplicate coflow id"));
        }
        if !(c.weight.is_finite() && c.weight > 0.0) {
            out.push(Violation::coflow(
                c.id,
                "weight",
                format!("weight must be positive, got {}", c.weight),
            ));
        }
        if !(c.release.is_finite() && c.release >= 0.0) {
            out.push(Violation::coflow(
                c.id,
                "release",
                format!("release must be non-negative, got {}", c.release),
            ));
        }
        if c.demand.n() != n {
            out.push(Violation::coflow(
                c.id,
                "demand",
                format!(
                    "dimension mismatch: {}x{} matrix under {n} ports",
                    c.demand.n(),
                    c.demand.n()
                ),
            ));
        }
        let dn = c.demand.n();
        for i in 0..dn {
            for j in 0..dn {
                let v = c.demand.get(i, j);
                if !v.is_finite() {
                    out.push(Violation::coflow(
                        c.id,
                        "demand",
                        format!("non-finite demand at ({i},{j})"),
                    ));
                } else if v < 0.0 {
                    out.push(Violation::coflow(
                        c.id,
                        "demand",
                        format!("negative demand at ({i},{j})"),
                    ));
                }
            }
        }
    }
    if out.is_empty() {
        ValidationReport::Ok
    } else {
        ValidationReport::Invalid(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> NetworkConfig {
        NetworkConfig::ocs(n, vec![10.0, 20.0, 30.0], 8.0)
    }

    #[test]
    fn empty_instance_is_valid() {
        let inst = Instance::new(cfg(4), vec![]);
        assert!(validate_instance(&inst).is_ok());
    }

    #[test]
    fn negative_entry_reported_with_position() {
        let d = DemandMatrix::from_rows(&[vec![1.0, -2.0], vec![0.0, 0.0]]);
        let inst = Instance::new(cfg(2), vec![Coflow::new(7, d, 1.0, 0.0)]);
        let report = validate_instance(&inst);
        let v = report.violations();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].subject, Subject::Coflow(CoflowId(7)));
        assert_eq!(v[0].message, "negative demand at (0,1)");
    }

    #[test]
    fn dimension_mismatch_reported() {
        let d = DemandMatrix::zeros(3);
        let inst = Instance::new(cfg(2), vec![Coflow::new(1, d, 1.0, 0.0)]);
        let report = validate_instance(&inst);
        assert!(report.violations()[0].message.contains("dimension mismatch"));
    }

    #[test]
    fn weight_release_ids_and_config_checked() {
        let d = DemandMatrix::zeros(2);
        let mut config = cfg(2);
        config.mode = SwitchMode::Eps;
        config.core_rates.push(0.0);
        let inst = Instance::new(
            config,
            vec![
                Coflow::new(1, d.clone(), 0.0, 0.0),
                Coflow::new(1, d, 1.0, -1.0),
            ],
        );
        let fields: Vec<_> = validate_instance(&inst)
            .violations()
            .iter()
            .map(|v| v.field.clone())
            .collect();
        assert!(fields.contains(&"weight".to_string()));
        assert!(fields.contains(&"release".to_string()));
        assert!(fields.contains(&"id".to_string()));
        assert!(fields.contains(&"core_rates".to_string()));
        assert!(fields.contains(&"reconfig_delay".to_string()));
    }

    #[test]
    fn derived_rates() {
        let c = cfg(2);
        assert_eq!(c.aggregate_rate(), 60.0);
        assert_eq!(c.max_rate(), 30.0);
        assert_eq!(c.num_cores(), 3);
    }
}
