//! Port statistics and the lower bounds built on them.
//!
//! Ports are indexed `0..n` for ingress and `n..2n` for egress everywhere in
//! the crate.

use crate::model::{DemandMatrix, NetworkConfig, SwitchMode};

/// Per-port load (volume) and nonzero-entry count of a demand matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PortStats {
    pub load_per_port: Vec<f64>,
    pub count_per_port: Vec<u32>,
    pub max_load: f64,
    pub max_count: u32,
}

impl PortStats {
    pub fn empty(n: usize) -> Self {
        Self {
            load_per_port: vec![0.0; 2 * n],
            count_per_port: vec![0; 2 * n],
            max_load: 0.0,
            max_count: 0,
        }
    }

    pub fn num_ports(&self) -> usize {
        self.load_per_port.len() / 2
    }

    /// Whether the source matrix had no nonzero entry.
    pub fn is_empty(&self) -> bool {
        self.max_count == 0
    }

    /// `max_p (load_p / rate + count_p * delay)`, or 0 for an empty matrix.
    pub fn lower_bound(&self, rate: f64, delay: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.load_per_port
            .iter()
            .zip(&self.count_per_port)
            .map(|(&l, &c)| l / rate + c as f64 * delay)
            .fold(0.0, f64::max)
    }

    pub fn recompute_max(&mut self) {
        self.max_load = self.load_per_port.iter().copied().fold(0.0, f64::max);
        self.max_count = self.count_per_port.iter().copied().max().unwrap_or(0);
    }
}

pub fn port_stats(d: &DemandMatrix) -> PortStats {
    let n = d.n();
    let mut s = PortStats::empty(n);
    for (i, j, v) in d.nonzeros() {
        s.load_per_port[i] += v;
        s.load_per_port[n + j] += v;
        s.count_per_port[i] += 1;
        s.count_per_port[n + j] += 1;
    }
    s.recompute_max();
    s
}

/// Single-core lower bound on the completion time of `d` served alone by a
/// core of the given rate. The all-zero matrix has bound 0.
pub fn single_core_lb(d: &DemandMatrix, rate: f64, delay: f64) -> f64 {
    port_stats(d).lower_bound(rate, delay)
}

/// Allocation-independent bound for one coflow: `delay + max_load / R` under
/// OCS and `max_load / R` under EPS; 0 for an empty matrix.
pub fn global_single_coflow_lb(d: &DemandMatrix, config: &NetworkConfig) -> f64 {
    let stats = port_stats(d);
    if stats.is_empty() {
        return 0.0;
    }
    let base = stats.max_load / config.aggregate_rate();
    match config.mode {
        SwitchMode::Ocs => config.reconfig_delay + base,
        SwitchMode::Eps => base,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrefixError {
    #[error("core index {core} out of range ({cores} cores)")]
    CoreOutOfRange { core: usize, cores: usize },
    #[error("port pair ({i},{j}) out of range for {n} ports")]
    PortOutOfRange { i: usize, j: usize, n: usize },
    #[error("added volume must be positive, got {0}")]
    NonPositiveVolume(f64),
}

/// Per-core prefix-aggregated matrices with incrementally maintained stats.
///
/// Besides the raw stats, each core keeps a running maximum of the full
/// lower bound and of the load-only bound; both only grow under additions.
#[derive(Debug, Clone)]
pub struct PrefixState {
    rates: Vec<f64>,
    delay: f64,
    per_core_matrix: Vec<DemandMatrix>,
    per_core_stats: Vec<PortStats>,
    lb_max: Vec<f64>,
    load_time_max: Vec<f64>,
}

impl PrefixState {
    pub fn new(config: &NetworkConfig) -> Self {
        Self::with_params(
            config.num_ports,
            config.core_rates.clone(),
            config.effective_delay(),
        )
    }

    pub fn with_params(n: usize, rates: Vec<f64>, delay: f64) -> Self {
        let k = rates.len();
        Self {
            rates,
            delay,
            per_core_matrix: vec![DemandMatrix::zeros(n); k],
            per_core_stats: vec![PortStats::empty(n); k],
            lb_max: vec![0.0; k],
            load_time_max: vec![0.0; k],
        }
    }

    pub fn num_cores(&self) -> usize {
        self.rates.len()
    }

    pub fn matrix(&self, core: usize) -> &DemandMatrix {
        &self.per_core_matrix[core]
    }

    pub fn stats(&self, core: usize) -> &PortStats {
        &self.per_core_stats[core]
    }

    /// Current single-core lower bound of the prefix matrix on `core`.
    pub fn core_lb(&self, core: usize) -> f64 {
        self.lb_max[core]
    }

    pub fn max_core_lb(&self) -> f64 {
        self.lb_max.iter().copied().fold(0.0, f64::max)
    }

    fn port_term(&self, core: usize, port: usize, extra_load: f64, extra_count: u32) -> f64 {
        let s = &self.per_core_stats[core];
        (s.load_per_port[port] + extra_load) / self.rates[core]
            + (s.count_per_port[port] + extra_count) as f64 * self.delay
    }

    /// Lower bound of `core` after a hypothetical addition of `d` at `(i, j)`,
    /// evaluated in constant time.
    pub fn tentative_lb(&self, core: usize, i: usize, j: usize, d: f64) -> f64 {
        let n = self.per_core_matrix[core].n();
        let fresh = u32::from(self.per_core_matrix[core].get(i, j) == 0.0);
        let li = self.port_term(core, i, d, fresh);
        let lj = self.port_term(core, n + j, d, fresh);
        self.lb_max[core].max(li).max(lj)
    }

    /// Load-only variant of [`Self::tentative_lb`]: `max_p load_p / rate`.
    pub fn tentative_load_time(&self, core: usize, i: usize, j: usize, d: f64) -> f64 {
        let n = self.per_core_matrix[core].n();
        let s = &self.per_core_stats[core];
        let r = self.rates[core];
        let li = (s.load_per_port[i] + d) / r;
        let lj = (s.load_per_port[n + j] + d) / r;
        self.load_time_max[core].max(li).max(lj)
    }

    /// Adds volume `d` at `(i, j)` of `core`, updating stats in O(1).
    pub fn prefix_add(&mut self, core: usize, i: usize, j: usize, d: f64) -> Result<(), PrefixError> {
        let cores = self.num_cores();
        if core >= cores {
            return Err(PrefixError::CoreOutOfRange { core, cores });
        }
        let n = self.per_core_matrix[core].n();
        if i >= n || j >= n {
            return Err(PrefixError::PortOutOfRange { i, j, n });
        }
        if !(d > 0.0) {
            return Err(PrefixError::NonPositiveVolume(d));
        }
        let fresh = self.per_core_matrix[core].get(i, j) == 0.0;
        self.per_core_matrix[core].add(i, j, d);
        {
            let s = &mut self.per_core_stats[core];
            for p in [i, n + j] {
                s.load_per_port[p] += d;
                if fresh {
                    s.count_per_port[p] += 1;
                }
                s.max_load = s.max_load.max(s.load_per_port[p]);
                s.max_count = s.max_count.max(s.count_per_port[p]);
            }
        }
        let li = self.port_term(core, i, 0.0, 0);
        let lj = self.port_term(core, n + j, 0.0, 0);
        self.lb_max[core] = self.lb_max[core].max(li).max(lj);
        let s = &self.per_core_stats[core];
        let r = self.rates[core];
        self.load_time_max[core] = self.load_time_max[core]
            .max(s.load_per_port[i] / r)
            .max(s.load_per_port[n + j] / r);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DemandMatrix {
        DemandMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn zero_matrix_stats() {
        let s = port_stats(&DemandMatrix::zeros(3));
        assert!(s.load_per_port.iter().all(|&l| l == 0.0));
        assert!(s.count_per_port.iter().all(|&c| c == 0));
        assert_eq!((s.max_load, s.max_count), (0.0, 0));
    }

    #[test]
    fn diagonal_stats() {
        let s = port_stats(&m(&[&[4.0, 0.0], &[0.0, 2.0]]));
        assert_eq!(s.load_per_port, vec![4.0, 2.0, 4.0, 2.0]);
        assert_eq!(s.count_per_port, vec![1, 1, 1, 1]);
        assert_eq!((s.max_load, s.max_count), (4.0, 1));
    }

    #[test]
    fn upper_triangular_stats() {
        let s = port_stats(&m(&[&[4.0, 2.0], &[0.0, 2.0]]));
        assert_eq!(s.load_per_port, vec![6.0, 2.0, 4.0, 4.0]);
        assert_eq!(s.count_per_port, vec![2, 1, 1, 2]);
        assert_eq!((s.max_load, s.max_count), (6.0, 2));
    }

    #[test]
    fn single_core_lb_examples() {
        assert_eq!(single_core_lb(&DemandMatrix::zeros(2), 3.0, 5.0), 0.0);
        assert_eq!(single_core_lb(&m(&[&[4.0]]), 2.0, 1.0), 3.0);
        assert_eq!(single_core_lb(&m(&[&[4.0, 2.0], &[0.0, 2.0]]), 2.0, 1.0), 5.0);
    }

    #[test]
    fn global_lb_examples() {
        // max port load 12
        let d = m(&[&[12.0, 0.0], &[0.0, 3.0]]);
        let ocs = NetworkConfig::ocs(2, vec![10.0, 20.0, 30.0], 8.0);
        assert!((global_single_coflow_lb(&d, &ocs) - 8.2).abs() < 1e-12);
        let eps = NetworkConfig::eps(2, vec![10.0, 20.0, 30.0]);
        assert!((global_single_coflow_lb(&d, &eps) - 0.2).abs() < 1e-12);
        assert_eq!(global_single_coflow_lb(&DemandMatrix::zeros(2), &ocs), 0.0);
    }

    #[test]
    fn prefix_add_base_case_and_repeat() {
        let mut st = PrefixState::with_params(2, vec![1.0, 2.0], 1.0);
        st.prefix_add(1, 0, 1, 3.0).unwrap();
        let single = DemandMatrix::from_triplets(2, &[(0, 1, 3.0)]);
        assert_eq!(st.stats(1), &port_stats(&single));
        assert_eq!(st.stats(0), &PortStats::empty(2));
        st.prefix_add(1, 0, 1, 2.0).unwrap();
        assert_eq!(st.stats(1).count_per_port, vec![1, 0, 0, 1]);
        assert_eq!(st.stats(1).load_per_port, vec![5.0, 0.0, 0.0, 5.0]);
        assert_eq!(st.core_lb(1), 5.0 / 2.0 + 1.0);
    }

    #[test]
    fn prefix_add_errors() {
        let mut st = PrefixState::with_params(2, vec![1.0], 0.0);
        assert!(matches!(
            st.prefix_add(1, 0, 0, 1.0),
            Err(PrefixError::CoreOutOfRange { .. })
        ));
        assert!(matches!(
            st.prefix_add(0, 2, 0, 1.0),
            Err(PrefixError::PortOutOfRange { .. })
        ));
        assert!(matches!(
            st.prefix_add(0, 0, 0, 0.0),
            Err(PrefixError::NonPositiveVolume(_))
        ));
    }

    #[test]
    fn tentative_matches_recompute() {
        let mut st = PrefixState::with_params(3, vec![1.0, 2.0], 1.5);
        st.prefix_add(0, 0, 1, 4.0).unwrap();
        st.prefix_add(0, 2, 1, 1.0).unwrap();
        for core in 0..2 {
            let mut d = st.matrix(core).clone();
            d.add(2, 2, 7.0);
            let want = single_core_lb(&d, [1.0, 2.0][core], 1.5);
            assert_eq!(st.tentative_lb(core, 2, 2, 7.0), want);
        }
    }
}
