//! Per-instance checks of the prefix bounds and the approximation
//! guarantee for the main algorithm.

use serde::{Deserialize, Serialize};

use crate::allocation::Allocation;
use crate::bounds::{port_stats, PortStats};
use crate::lp::LpSolution;
use crate::model::{DemandMatrix, Instance, SwitchMode};
use crate::sim::ScheduleResult;

/// Relative slack used by the prefix checks.
pub const PREFIX_TOL: f64 = 1e-9;
/// Relative slack allowed on the approximation bound (LP solver accuracy).
pub const RATIO_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    /// `rho_{1:m} <= 2 R T~_m`.
    TransmissionPrefix,
    /// `tau_{1:m} <= (2K / delta) T~_m`.
    ReconfigurationPrefix,
    /// `max_k LB^k(D^k_{1:m}) <= rho_{1:m} / r_max + tau_{1:m} delta`.
    AllocationPrefix,
    /// `T_m <= a_m + 2 max_k LB^k(D^k_{1:m})`.
    SchedulingPrefix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breach {
    pub bound: Bound,
    pub rank: usize,
    /// Input index of the coflow at `rank`.
    pub coflow: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Aggregate port statistics of each order prefix, indexed by rank.
pub fn prefix_stats(instance: &Instance, order: &[usize]) -> Vec<PortStats> {
    let mut agg = DemandMatrix::zeros(instance.config.num_ports);
    order
        .iter()
        .map(|&m| {
            agg = agg.plus(&instance.coflows[m].demand);
            port_stats(&agg)
        })
        .collect()
}

fn exceeds(lhs: f64, rhs: f64) -> bool {
    lhs > rhs + PREFIX_TOL * rhs.abs().max(lhs.abs()).max(1.0)
}

fn collect(bound: Bound, order: &[usize], pairs: impl Iterator<Item = (f64, f64)>) -> Vec<Breach> {
    pairs
        .enumerate()
        .filter(|(_, (l, r))| exceeds(*l, *r))
        .map(|(rank, (lhs, rhs))| Breach { bound, rank, coflow: order[rank], lhs, rhs })
        .collect()
}

/// Transmission prefix bound for every prefix of `order` (the LP-guided
/// order built from `solution`).
pub fn transmission_prefix(instance: &Instance, order: &[usize], solution: &LpSolution) -> Vec<Breach> {
    let r = instance.config.aggregate_rate();
    let stats = prefix_stats(instance, order);
    collect(
        Bound::TransmissionPrefix,
        order,
        stats.iter().zip(order).map(|(s, &m)| (s.max_load, 2.0 * r * solution.completion_values[m])),
    )
}

/// Reconfiguration prefix bound; vacuous when the effective delay is zero.
pub fn reconfiguration_prefix(instance: &Instance, order: &[usize], solution: &LpSolution) -> Vec<Breach> {
    let delay = instance.config.effective_delay();
    if delay <= 0.0 {
        return Vec::new();
    }
    let k = instance.config.num_cores() as f64;
    let stats = prefix_stats(instance, order);
    collect(
        Bound::ReconfigurationPrefix,
        order,
        stats
            .iter()
            .zip(order)
            .map(|(s, &m)| (s.max_count as f64, 2.0 * k / delay * solution.completion_values[m])),
    )
}

pub fn allocation_prefix(instance: &Instance, allocation: &Allocation) -> Vec<Breach> {
    let order = allocation.order.indices();
    let delay = instance.config.effective_delay();
    let r_max = instance.config.max_rate();
    let stats = prefix_stats(instance, order);
    collect(
        Bound::AllocationPrefix,
        order,
        stats
            .iter()
            .zip(&allocation.prefix_max_lb)
            .map(|(s, &lb)| (lb, s.max_load / r_max + s.max_count as f64 * delay)),
    )
}

pub fn scheduling_prefix(instance: &Instance, allocation: &Allocation, result: &ScheduleResult) -> Vec<Breach> {
    let order = allocation.order.indices();
    collect(
        Bound::SchedulingPrefix,
        order,
        order
            .iter()
            .zip(&allocation.prefix_max_lb)
            .map(|(&m, &lb)| (result.completion[m], instance.coflows[m].release + 2.0 * lb)),
    )
}

/// Approximation factor of the main algorithm: `8K (+1)` under OCS and
/// `4H (+1)` under EPS, the `+1` applying unless all releases are zero.
pub fn approximation_factor(instance: &Instance) -> f64 {
    let k = instance.config.num_cores() as f64;
    let base = match instance.config.mode {
        SwitchMode::Ocs => 8.0 * k,
        SwitchMode::Eps => 4.0 * k,
    };
    if instance.all_released_at_zero() {
        base
    } else {
        base + 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub factor: f64,
    pub objective: f64,
    pub lp_bound: f64,
    pub ratio: f64,
    pub within_factor: bool,
    pub breaches: Vec<Breach>,
}

impl GuaranteeReport {
    pub fn breaches_of(&self, bound: Bound) -> impl Iterator<Item = &Breach> {
        self.breaches.iter().filter(move |b| b.bound == bound)
    }
}

/// Runs every check on one OURS run (LP-guided order, greedy allocation,
/// not-all-stop simulation).
pub fn check_guarantees(
    instance: &Instance,
    solution: &LpSolution,
    allocation: &Allocation,
    result: &ScheduleResult,
) -> GuaranteeReport {
    let order = allocation.order.indices();
    let mut breaches = transmission_prefix(instance, order, solution);
    breaches.extend(reconfiguration_prefix(instance, order, solution));
    breaches.extend(allocation_prefix(instance, allocation));
    breaches.extend(scheduling_prefix(instance, allocation, result));
    let factor = approximation_factor(instance);
    let lp_bound = solution.objective;
    let within_factor = result.objective <= factor * lp_bound * (1.0 + RATIO_TOL);
    GuaranteeReport {
        factor,
        objective: result.objective,
        lp_bound,
        ratio: crate::metrics::approx_ratio(result.objective, lp_bound),
        within_factor,
        breaches,
    }
}
