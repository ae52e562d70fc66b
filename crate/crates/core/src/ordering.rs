//! Global coflow priority orders.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::bounds::port_stats;
use crate::lp::LpSolution;
use crate::model::{CoflowId, DemandMatrix, Instance, NetworkConfig, SwitchMode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OrderError {
    #[error("expected {expected} coflows, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("not a permutation of 0..{0}")]
    NotPermutation(usize),
}

/// Priority order over coflows; `indices()[rank]` is an input index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoflowOrder {
    indices: Vec<usize>,
}

impl CoflowOrder {
    pub fn identity(m: usize) -> Self {
        Self {
            indices: (0..m).collect(),
        }
    }

    pub fn from_indices(indices: Vec<usize>) -> Result<Self, OrderError> {
        let m = indices.len();
        let mut seen = vec![false; m];
        for &i in &indices {
            if i >= m || std::mem::replace(&mut seen[i], true) {
                return Err(OrderError::NotPermutation(m));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `rank[input index]`, the inverse permutation.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.indices.len()];
        for (rank, &m) in self.indices.iter().enumerate() {
            r[m] = rank;
        }
        r
    }

    pub fn ids(&self, instance: &Instance) -> Vec<CoflowId> {
        self.indices.iter().map(|&m| instance.coflows[m].id).collect()
    }
}

/// Stable argsort by `key` ascending; equal keys keep input order.
fn argsort_by(m: usize, mut cmp: impl FnMut(usize, usize) -> Ordering) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| cmp(a, b).then(a.cmp(&b)));
    idx
}

/// Sorts coflows by relaxed completion value, ties by input index.
pub fn lp_guided_order(instance: &Instance, solution: &LpSolution) -> Result<CoflowOrder, OrderError> {
    let t = &solution.completion_values;
    if t.len() != instance.num_coflows() {
        return Err(OrderError::DimensionMismatch {
            expected: instance.num_coflows(),
            got: t.len(),
        });
    }
    Ok(order_by_values(t))
}

/// Non-decreasing order of `values`, ties by index.
pub fn order_by_values(values: &[f64]) -> CoflowOrder {
    CoflowOrder {
        indices: argsort_by(values.len(), |a, b| values[a].total_cmp(&values[b])),
    }
}

/// `w / T_LB(D)`, infinite for an empty coflow.
pub fn wspt_score(weight: f64, demand: &DemandMatrix, config: &NetworkConfig) -> f64 {
    let s = port_stats(demand);
    if s.is_empty() {
        return f64::INFINITY;
    }
    let lb = match config.mode {
        SwitchMode::Ocs => config.reconfig_delay + s.max_load / config.aggregate_rate(),
        SwitchMode::Eps => s.max_load / config.aggregate_rate(),
    };
    weight / lb
}

/// Sorts coflows by WSPT score non-increasing, ties by input index.
pub fn wspt_order(instance: &Instance) -> CoflowOrder {
    let scores: Vec<f64> = instance
        .coflows
        .iter()
        .map(|c| wspt_score(c.weight, &c.demand, &instance.config))
        .collect();
    CoflowOrder {
        indices: argsort_by(scores.len(), |a, b| scores[b].total_cmp(&scores[a])),
    }
}
