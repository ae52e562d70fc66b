//! Inter-core flow allocation: the prefix-aware greedy rule and the
//! load-only ablation.

use serde::{Deserialize, Serialize};

use crate::bounds::PrefixState;
use crate::model::{DemandMatrix, Instance, NetworkConfig};
use crate::ordering::{CoflowOrder, OrderError};

/// Processing order of flows inside one coflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowOrderRule {
    /// Non-increasing volume, ties by `(i, j)`.
    #[default]
    VolumeDescending,
    /// Row-major `(i, j)`.
    Lexicographic,
}

/// Core selection criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoreRule {
    /// Minimum single-core lower bound after the tentative add.
    #[default]
    PrefixLowerBound,
    /// Minimum `max_p load_p / r` after the tentative add.
    LoadOnly,
}

/// One flow placed on one core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignedFlow {
    pub ingress: usize,
    pub egress: usize,
    pub volume: f64,
    pub core: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// The order the allocation was built in.
    pub order: CoflowOrder,
    pub num_cores: usize,
    /// `flows[m]`: flows of coflow `m` (input index) in processing order.
    pub flows: Vec<Vec<AssignedFlow>>,
    /// `max_k T_LB^k(D_{1:rank}^k)` after each rank.
    pub prefix_max_lb: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AllocationError {
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("coflow {coflow}: volume at ({i},{j}) is {got}, demand is {want}")]
    Conservation { coflow: usize, i: usize, j: usize, got: f64, want: f64 },
    #[error("coflow {coflow}: flow ({i},{j}) is split or duplicated")]
    Split { coflow: usize, i: usize, j: usize },
    #[error("coflow {coflow}: core {core} out of range")]
    CoreOutOfRange { coflow: usize, core: usize },
    #[error("coflow {coflow}: non-positive volume at ({i},{j})")]
    NonPositive { coflow: usize, i: usize, j: usize },
}

impl Allocation {
    /// `D_m^k` as a dense matrix.
    pub fn per_core_matrix(&self, m: usize, core: usize, n: usize) -> DemandMatrix {
        let mut d = DemandMatrix::zeros(n);
        for f in self.flows[m].iter().filter(|f| f.core == core) {
            d.add(f.ingress, f.egress, f.volume);
        }
        d
    }

    /// `D_{1:rank}^k` for every core, one entry per rank.
    pub fn prefix_matrices(&self, n: usize) -> Vec<Vec<DemandMatrix>> {
        let mut acc = vec![DemandMatrix::zeros(n); self.num_cores];
        let mut out = Vec::with_capacity(self.order.len());
        for &m in self.order.indices() {
            for f in &self.flows[m] {
                acc[f.core].add(f.ingress, f.egress, f.volume);
            }
            out.push(acc.clone());
        }
        out
    }

    /// Checks conservation, no-splitting and index ranges against `instance`.
    pub fn check(&self, instance: &Instance) -> Result<(), AllocationError> {
        let m_count = instance.num_coflows();
        if self.flows.len() != m_count || self.order.len() != m_count {
            return Err(OrderError::DimensionMismatch {
                expected: m_count,
                got: self.flows.len(),
            }
            .into());
        }
        let n = instance.config.num_ports;
        for (m, c) in instance.coflows.iter().enumerate() {
            let mut seen = DemandMatrix::zeros(n);
            for f in &self.flows[m] {
                if f.core >= self.num_cores || self.num_cores != instance.config.num_cores() {
                    return Err(AllocationError::CoreOutOfRange { coflow: m, core: f.core });
                }
                if !(f.volume > 0.0) {
                    return Err(AllocationError::NonPositive { coflow: m, i: f.ingress, j: f.egress });
                }
                if f.ingress >= n || f.egress >= n || seen.get(f.ingress, f.egress) > 0.0 {
                    return Err(AllocationError::Split { coflow: m, i: f.ingress, j: f.egress });
                }
                seen.set(f.ingress, f.egress, f.volume);
            }
            for i in 0..n {
                for j in 0..n {
                    let (got, want) = (seen.get(i, j), c.demand.get(i, j));
                    if got != want {
                        return Err(AllocationError::Conservation { coflow: m, i, j, got, want });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Nonzero flows of `d` in the processing order given by `rule`.
pub fn flow_sequence(d: &DemandMatrix, rule: FlowOrderRule) -> Vec<(usize, usize, f64)> {
    let mut flows: Vec<(usize, usize, f64)> = d.nonzeros().collect();
    if rule == FlowOrderRule::VolumeDescending {
        // Stable on the row-major input, so equal volumes stay in (i, j) order.
        flows.sort_by(|a, b| b.2.total_cmp(&a.2));
    }
    flows
}

/// Runs the allocation pass with the given rules.
pub fn allocate(
    instance: &Instance,
    order: &CoflowOrder,
    core_rule: CoreRule,
    flow_rule: FlowOrderRule,
) -> Result<Allocation, OrderError> {
    let m_count = instance.num_coflows();
    if order.len() != m_count {
        return Err(OrderError::DimensionMismatch { expected: m_count, got: order.len() });
    }
    let config: &NetworkConfig = &instance.config;
    let k_count = config.num_cores();
    let mut state = PrefixState::new(config);
    let mut flows = vec![Vec::new(); m_count];
    let mut prefix_max_lb = Vec::with_capacity(m_count);
    for &m in order.indices() {
        for (i, j, d) in flow_sequence(&instance.coflows[m].demand, flow_rule) {
            let mut best = 0;
            let mut best_val = f64::INFINITY;
            for k in 0..k_count {
                let v = match core_rule {
                    CoreRule::PrefixLowerBound => state.tentative_lb(k, i, j, d),
                    CoreRule::LoadOnly => state.tentative_load_time(k, i, j, d),
                };
                if v < best_val {
                    best = k;
                    best_val = v;
                }
            }
            state
                .prefix_add(best, i, j, d)
                .expect("indices come from a validated demand matrix");
            flows[m].push(AssignedFlow { ingress: i, egress: j, volume: d, core: best });
        }
        prefix_max_lb.push(state.max_core_lb());
    }
    Ok(Allocation { order: order.clone(), num_cores: k_count, flows, prefix_max_lb })
}

/// The greedy allocation of the main algorithm.
pub fn greedy_allocate(instance: &Instance, order: &CoflowOrder) -> Result<Allocation, OrderError> {
    allocate(instance, order, CoreRule::PrefixLowerBound, FlowOrderRule::VolumeDescending)
}

/// The load-only ablation: selection ignores the reconfiguration term.
pub fn load_only_allocate(instance: &Instance, order: &CoflowOrder) -> Result<Allocation, OrderError> {
    allocate(instance, order, CoreRule::LoadOnly, FlowOrderRule::VolumeDescending)
}
