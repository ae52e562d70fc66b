//! Intra-core circuit scheduling: the not-all-stop list dispatcher, the
//! coflow-exclusive stand-in and the all-stop BvN baseline.

mod check;

use std::io;

use serde::{Deserialize, Serialize};

use crate::allocation::{AssignedFlow, Allocation, AllocationError};
use crate::bvn::{decompose, BvnError};
use crate::model::{CoflowId, Instance};

pub use check::{check_feasibility, work_conservation_violations, FeasibilityIssue, FeasibilityReport};

/// Version tag written into schedule logs.
pub const SCHEDULE_LOG_VERSION: u32 = 1;

/// Reconfiguration model a schedule was produced under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimModel {
    NotAllStop,
    AllStop,
}

/// One circuit: set up at `setup_time`, transmits on `[start_time, end_time)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitEvent {
    pub core: usize,
    pub coflow: CoflowId,
    pub ingress: usize,
    pub egress: usize,
    pub setup_time: f64,
    pub start_time: f64,
    pub end_time: f64,
    pub volume: f64,
}

/// One synchronous all-stop configuration on a core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSegment {
    pub core: usize,
    pub coflow: CoflowId,
    pub reconfig_start: f64,
    pub hold_start: f64,
    pub hold_end: f64,
    /// Ingress `i` is connected to egress `perm[i]`.
    pub perm: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleResult {
    pub model: SimModel,
    /// Coflow ids in input order; the per-coflow vectors below follow it.
    pub coflow_ids: Vec<CoflowId>,
    pub events: Vec<CircuitEvent>,
    #[serde(default)]
    pub segments: Vec<ConfigSegment>,
    /// `per_core_completion[m][k]`, `None` when coflow `m` has nothing on core `k`.
    pub per_core_completion: Vec<Vec<Option<f64>>>,
    pub completion: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("inconsistent allocation: {0}")]
    Allocation(#[from] AllocationError),
    #[error("decomposition failed on core {core} for coflow {coflow}: {source}")]
    Decomposition { core: usize, coflow: CoflowId, source: BvnError },
}

/// A subflow waiting for a circuit on one core.
#[derive(Debug, Clone, Copy)]
pub struct Job {
    pub coflow: usize,
    pub ingress: usize,
    pub egress: usize,
    pub volume: f64,
    pub release: f64,
}

/// Non-delay list dispatch on one core. `jobs` are in priority order; all
/// ports are idle from `t0`. Returns the setup time of each job.
///
/// Decision points are `t0`, releases and circuit end times. At each one the
/// pending list is scanned once and every released job whose two ports are
/// idle is started.
pub fn dispatch(n: usize, rate: f64, delay: f64, jobs: &[Job], t0: f64) -> Vec<f64> {
    let mut setup = vec![f64::NAN; jobs.len()];
    let mut free_in = vec![t0; n];
    let mut free_out = vec![t0; n];
    let mut pending: Vec<usize> = (0..jobs.len()).collect();
    let mut t = t0;
    while !pending.is_empty() {
        let mut idle_in = free_in.iter().filter(|&&f| f <= t).count();
        let mut idle_out = free_out.iter().filter(|&&f| f <= t).count();
        let mut started = false;
        for &q in &pending {
            if idle_in == 0 || idle_out == 0 {
                break;
            }
            let job = &jobs[q];
            if job.release <= t && free_in[job.ingress] <= t && free_out[job.egress] <= t {
                setup[q] = t;
                let end = t + delay + job.volume / rate;
                free_in[job.ingress] = end;
                free_out[job.egress] = end;
                idle_in -= 1;
                idle_out -= 1;
                started = true;
            }
        }
        if started {
            pending.retain(|&q| setup[q].is_nan());
        }
        let next_release = pending
            .iter()
            .map(|&q| jobs[q].release)
            .filter(|&a| a > t)
            .fold(f64::INFINITY, f64::min);
        let next_free = free_in
            .iter()
            .chain(&free_out)
            .copied()
            .filter(|&f| f > t)
            .fold(f64::INFINITY, f64::min);
        let next = next_release.min(next_free);
        if pending.is_empty() {
            break;
        }
        debug_assert!(next.is_finite(), "pending jobs with nothing to wait for");
        t = next;
    }
    setup
}

/// Accumulates events and completion times for one schedule.
struct Builder<'a> {
    instance: &'a Instance,
    events: Vec<CircuitEvent>,
    segments: Vec<ConfigSegment>,
    per_core: Vec<Vec<Option<f64>>>,
}

impl<'a> Builder<'a> {
    fn new(instance: &'a Instance) -> Self {
        Self {
            instance,
            events: Vec::new(),
            segments: Vec::new(),
            per_core: vec![vec![None; instance.config.num_cores()]; instance.num_coflows()],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn event(&mut self, core: usize, m: usize, i: usize, j: usize, setup: f64, start: f64, volume: f64) {
        let end = start + volume / self.instance.config.core_rates[core];
        let slot = &mut self.per_core[m][core];
        *slot = Some(slot.map_or(end, |v| v.max(end)));
        self.events.push(CircuitEvent {
            core,
            coflow: self.instance.coflows[m].id,
            ingress: i,
            egress: j,
            setup_time: setup,
            start_time: start,
            end_time: end,
            volume,
        });
    }

    fn finish(self, model: SimModel) -> ScheduleResult {
        let completion: Vec<f64> = self
            .instance
            .coflows
            .iter()
            .zip(&self.per_core)
            .map(|(c, pc)| pc.iter().flatten().copied().fold(c.release, f64::max))
            .collect();
        let objective = self
            .instance
            .coflows
            .iter()
            .zip(&completion)
            .map(|(c, t)| c.weight * t)
            .sum();
        ScheduleResult {
            model,
            coflow_ids: self.instance.coflows.iter().map(|c| c.id).collect(),
            events: self.events,
            segments: self.segments,
            per_core_completion: self.per_core,
            completion,
            objective,
        }
    }
}

/// Jobs on `core` in allocation priority order.
fn core_jobs(instance: &Instance, allocation: &Allocation, core: usize) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &m in allocation.order.indices() {
        for f in allocation.flows[m].iter().filter(|f| f.core == core) {
            jobs.push(Job {
                coflow: m,
                ingress: f.ingress,
                egress: f.egress,
                volume: f.volume,
                release: instance.coflows[m].release,
            });
        }
    }
    jobs
}

/// Main scheduler: each core dispatches its subflows independently in global
/// priority order, skipping blocked ones.
pub fn simulate_not_all_stop(instance: &Instance, allocation: &Allocation) -> Result<ScheduleResult, SimError> {
    allocation.check(instance)?;
    let config = &instance.config;
    let delay = config.effective_delay();
    let mut b = Builder::new(instance);
    for core in 0..config.num_cores() {
        let jobs = core_jobs(instance, allocation, core);
        let setup = dispatch(config.num_ports, config.core_rates[core], delay, &jobs, 0.0);
        for (job, s) in jobs.iter().zip(setup) {
            b.event(core, job.coflow, job.ingress, job.egress, s, s + delay, job.volume);
        }
    }
    Ok(b.finish(SimModel::NotAllStop))
}

/// Semi-active dispatch on one core: each job in `jobs` (priority order) is
/// set up as soon as it is released and every earlier job sharing one of its
/// ports has ended. Returns the setup time of each job.
pub fn dispatch_semi_active(n: usize, rate: f64, delay: f64, jobs: &[Job], t0: f64) -> Vec<f64> {
    let mut free_in = vec![t0; n];
    let mut free_out = vec![t0; n];
    jobs.iter()
        .map(|job| {
            let s = job.release.max(free_in[job.ingress]).max(free_out[job.egress]).max(t0);
            let end = s + delay + job.volume / rate;
            free_in[job.ingress] = end;
            free_out[job.egress] = end;
            s
        })
        .collect()
}

/// Like [`simulate_priority_list`] but with [`dispatch_semi_active`] on
/// each core.
pub fn simulate_semi_active(instance: &Instance, flows: &[(usize, AssignedFlow)]) -> ScheduleResult {
    simulate_list_with(instance, flows, dispatch_semi_active)
}

/// Dispatches an explicit subflow priority list: `flows` are
/// `(coflow index, assigned flow)` pairs in priority order, each core
/// scheduling its own entries with the not-all-stop dispatcher.
pub fn simulate_priority_list(instance: &Instance, flows: &[(usize, AssignedFlow)]) -> ScheduleResult {
    simulate_list_with(instance, flows, dispatch)
}

fn simulate_list_with(
    instance: &Instance,
    flows: &[(usize, AssignedFlow)],
    dispatcher: fn(usize, f64, f64, &[Job], f64) -> Vec<f64>,
) -> ScheduleResult {
    let config = &instance.config;
    let delay = config.effective_delay();
    let mut b = Builder::new(instance);
    for core in 0..config.num_cores() {
        let jobs: Vec<Job> = flows
            .iter()
            .filter(|(_, f)| f.core == core)
            .map(|&(m, f)| Job {
                coflow: m,
                ingress: f.ingress,
                egress: f.egress,
                volume: f.volume,
                release: instance.coflows[m].release,
            })
            .collect();
        let setup = dispatcher(config.num_ports, config.core_rates[core], delay, &jobs, 0.0);
        for (job, s) in jobs.iter().zip(setup) {
            b.event(core, job.coflow, job.ingress, job.egress, s, s + delay, job.volume);
        }
    }
    b.finish(SimModel::NotAllStop)
}

/// Serves released coflows one at a time per core in priority order.
/// `serve(core, m, start)` schedules coflow `m` from `start` and returns the
/// time the core becomes free again.
fn serve_exclusively(
    instance: &Instance,
    allocation: &Allocation,
    mut serve: impl FnMut(usize, usize, f64) -> Result<f64, SimError>,
) -> Result<(), SimError> {
    for core in 0..instance.config.num_cores() {
        let mut waiting: Vec<usize> = allocation
            .order
            .indices()
            .iter()
            .copied()
            .filter(|&m| allocation.flows[m].iter().any(|f| f.core == core))
            .collect();
        let mut clock = 0.0_f64;
        while !waiting.is_empty() {
            let pos = match waiting.iter().position(|&m| instance.coflows[m].release <= clock) {
                Some(p) => p,
                None => {
                    clock = waiting
                        .iter()
                        .map(|&m| instance.coflows[m].release)
                        .fold(f64::INFINITY, f64::min);
                    continue;
                }
            };
            let m = waiting.remove(pos);
            clock = serve(core, m, clock)?;
        }
    }
    Ok(())
}

/// Coflow-exclusive stand-in for the SUNFLOW-S baseline: on each core one
/// coflow is served at a time; within it the list dispatcher is used.
pub fn simulate_coflow_exclusive(instance: &Instance, allocation: &Allocation) -> Result<ScheduleResult, SimError> {
    allocation.check(instance)?;
    let config = &instance.config;
    let delay = config.effective_delay();
    let mut b = Builder::new(instance);
    serve_exclusively(instance, allocation, |core, m, start| {
        let jobs: Vec<Job> = core_jobs(instance, allocation, core)
            .into_iter()
            .filter(|j| j.coflow == m)
            .collect();
        let rate = config.core_rates[core];
        let setup = dispatch(config.num_ports, rate, delay, &jobs, start);
        let mut finish = start;
        for (job, s) in jobs.iter().zip(setup) {
            b.event(core, m, job.ingress, job.egress, s, s + delay, job.volume);
            finish = finish.max(s + delay + job.volume / rate);
        }
        Ok(finish)
    })?;
    Ok(b.finish(SimModel::NotAllStop))
}

/// All-stop BvN baseline: per core, released coflows are served one at a
/// time; each coflow's stuffed per-core matrix is decomposed and every term
/// is one synchronous configuration (delay, then hold for `weight / r`).
/// Real volume is credited first within each configuration and a subflow
/// completes when its last piece drains.
pub fn simulate_all_stop_bvn(instance: &Instance, allocation: &Allocation) -> Result<ScheduleResult, SimError> {
    allocation.check(instance)?;
    let config = &instance.config;
    let n = config.num_ports;
    let delay = config.effective_delay();
    let mut b = Builder::new(instance);
    serve_exclusively(instance, allocation, |core, m, start| {
        let rate = config.core_rates[core];
        let real = allocation.per_core_matrix(m, core, n);
        let id = instance.coflows[m].id;
        let dec = decompose(&real).map_err(|source| SimError::Decomposition { core, coflow: id, source })?;
        let mut residual = real.clone();
        // Index of the last piece emitted per entry, to absorb rounding residue.
        let mut last_piece = vec![usize::MAX; n * n];
        let mut clock = start;
        for term in &dec.terms {
            let hold_start = clock + delay;
            let hold_end = hold_start + term.weight / rate;
            for (i, &j) in term.perm.iter().enumerate() {
                let res = residual.get(i, j);
                if res <= 0.0 {
                    continue;
                }
                let piece = res.min(term.weight);
                residual.set(i, j, res - piece);
                last_piece[i * n + j] = b.events.len();
                b.event(core, m, i, j, clock, hold_start, piece);
            }
            b.segments.push(ConfigSegment {
                core,
                coflow: id,
                reconfig_start: clock,
                hold_start,
                hold_end,
                perm: term.perm.clone(),
            });
            clock = hold_end;
        }
        for (i, j, v) in residual.nonzeros() {
            let at = last_piece[i * n + j];
            if at == usize::MAX {
                return Err(SimError::Decomposition {
                    core,
                    coflow: id,
                    source: BvnError::NoPerfectMatching { terms: dec.terms.len() },
                });
            }
            let e = &mut b.events[at];
            e.volume += v;
            e.end_time = e.start_time + e.volume / rate;
        }
        Ok(clock)
    })?;
    // Completion bookkeeping after residue absorption.
    let mut per_core = vec![vec![None; config.num_cores()]; instance.num_coflows()];
    let index: std::collections::HashMap<CoflowId, usize> =
        instance.coflows.iter().enumerate().map(|(m, c)| (c.id, m)).collect();
    for e in &b.events {
        let slot: &mut Option<f64> = &mut per_core[index[&e.coflow]][e.core];
        *slot = Some(slot.map_or(e.end_time, |v| v.max(e.end_time)));
    }
    b.per_core = per_core;
    Ok(b.finish(SimModel::AllStop))
}

#[derive(Serialize, Deserialize)]
struct ScheduleLog {
    version: u32,
    #[serde(flatten)]
    result: ScheduleResult,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("schedule log: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schedule log version {0}")]
    Version(u32),
}

/// Writes the JSON schedule log.
pub fn write_schedule_log<W: io::Write>(result: &ScheduleResult, out: W) -> Result<(), LogError> {
    let log = ScheduleLog { version: SCHEDULE_LOG_VERSION, result: result.clone() };
    serde_json::to_writer_pretty(out, &log)?;
    Ok(())
}

pub fn read_schedule_log<R: io::Read>(input: R) -> Result<ScheduleResult, LogError> {
    let log: ScheduleLog = serde_json::from_reader(input)?;
    if log.version != SCHEDULE_LOG_VERSION {
        return Err(LogError::Version(log.version));
    }
    Ok(log.result)
}
