//! Exhaustive search over the schedules of tiny instances.
//!
//! Every flow-to-core assignment is combined with every subflow priority
//! order, each core starting its subflows semi-actively: as early as the
//! release and the earlier subflows on the same ports allow. For a fixed
//! assignment an optimal schedule is semi-active and is produced by some
//! order (sort by setup time), so the search is exact over schedules that
//! keep each flow on one core with one circuit. Only the relative order of
//! subflows sharing a core matters, so the per-core orders are enumerated
//! independently and combined.

use serde::{Deserialize, Serialize};

use crate::allocation::AssignedFlow;
use crate::model::Instance;
use crate::sim::{dispatch_semi_active, simulate_semi_active, Job, ScheduleResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_flows: usize,
    pub max_cores: usize,
    pub max_coflows: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_flows: 6, max_cores: 2, max_coflows: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{what} = {got} exceeds the oracle limit {limit}")]
    LimitExceeded { what: &'static str, got: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub objective: f64,
    /// Flows as `(coflow index, placement)` in the winning priority order.
    pub priority: Vec<(usize, AssignedFlow)>,
    pub schedule: ScheduleResult,
    /// Flow-to-core assignments enumerated (`K^F`).
    pub assignments: u64,
    /// Distinct per-core order combinations dispatched.
    pub schedules_evaluated: u64,
}

/// Calls `f` on every permutation of `0..n` (Heap's algorithm).
fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    f(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Per-coflow completion on one core for one job order.
struct CoreOption {
    order: Vec<usize>,
    completion: Vec<f64>,
}

pub fn brute_force_best(instance: &Instance, limits: OracleLimits) -> Result<OracleResult, OracleError> {
    let config = &instance.config;
    let flows: Vec<(usize, usize, usize, f64)> = instance
        .coflows
        .iter()
        .enumerate()
        .flat_map(|(m, c)| c.demand.nonzeros().map(move |(i, j, v)| (m, i, j, v)))
        .collect();
    let k = config.num_cores();
    let m = instance.num_coflows();
    for (what, got, limit) in [
        ("flows", flows.len(), limits.max_flows),
        ("cores", k, limits.max_cores),
        ("coflows", m, limits.max_coflows),
    ] {
        if got > limit {
            return Err(OracleError::LimitExceeded { what, got, limit });
        }
    }
    let delay = config.effective_delay();
    let releases = instance.releases();
    let weights = instance.weights();
    let f = flows.len();
    let total_assignments = (k as u64).pow(f as u32);

    let mut best = f64::INFINITY;
    let mut best_priority: Vec<(usize, AssignedFlow)> = Vec::new();
    let mut evaluated = 0u64;
    let mut assign = vec![0usize; f];
    for code in 0..total_assignments {
        let mut c = code;
        for a in assign.iter_mut() {
            *a = (c % k as u64) as usize;
            c /= k as u64;
        }
        let per_core: Vec<Vec<CoreOption>> = (0..k)
            .map(|core| {
                let members: Vec<usize> = (0..f).filter(|&q| assign[q] == core).collect();
                let mut options = Vec::new();
                for_each_permutation(members.len(), |perm| {
                    let order: Vec<usize> = perm.iter().map(|&p| members[p]).collect();
                    let jobs: Vec<Job> = order
                        .iter()
                        .map(|&q| {
                            let (cm, i, j, v) = flows[q];
                            Job { coflow: cm, ingress: i, egress: j, volume: v, release: releases[cm] }
                        })
                        .collect();
                    let rate = config.core_rates[core];
                    let setup = dispatch_semi_active(config.num_ports, rate, delay, &jobs, 0.0);
                    let mut completion = vec![f64::NEG_INFINITY; m];
                    for (job, s) in jobs.iter().zip(setup) {
                        let end = s + delay + job.volume / rate;
                        completion[job.coflow] = completion[job.coflow].max(end);
                    }
                    options.push(CoreOption { order, completion });
                });
                options
            })
            .collect();
        // Odometer over the per-core option lists.
        let mut pick = vec![0usize; k];
        'combos: loop {
            evaluated += 1;
            let objective: f64 = (0..m)
                .map(|cm| {
                    let t = (0..k).map(|core| per_core[core][pick[core]].completion[cm]).fold(releases[cm], f64::max);
                    weights[cm] * t
                })
                .sum();
            if objective < best {
                best = objective;
                best_priority = (0..k)
                    .flat_map(|core| per_core[core][pick[core]].order.iter().copied())
                    .map(|q| {
                        let (cm, i, j, v) = flows[q];
                        (cm, AssignedFlow { ingress: i, egress: j, volume: v, core: assign[q] })
                    })
                    .collect();
            }
            for core in 0..k {
                pick[core] += 1;
                if pick[core] < per_core[core].len() {
                    continue 'combos;
                }
                pick[core] = 0;
            }
            break;
        }
    }
    let schedule = simulate_semi_active(instance, &best_priority);
    Ok(OracleResult {
        objective: schedule.objective,
        priority: best_priority,
        schedule,
        assignments: total_assignments,
        schedules_evaluated: evaluated,
    })
}
