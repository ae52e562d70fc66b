//! Feasibility audit of a schedule against the instance and allocation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ScheduleResult, SimModel};
use crate::allocation::Allocation;
use crate::model::{CoflowId, Instance};

/// Relative time tolerance of the audit.
const TIME_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIME_TOL * a.abs().max(b.abs()).max(1.0)
}

fn le(a: f64, b: f64) -> bool {
    a <= b || close(a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeasibilityIssue {
    UnknownCoflow { event: usize, coflow: CoflowId },
    OutOfRange { event: usize },
    PortConflict { core: usize, port: usize, first: usize, second: usize },
    ReleaseViolation { event: usize, setup_time: f64, release: f64 },
    DelayMismatch { event: usize },
    DurationMismatch { event: usize },
    VolumeMismatch { coflow: CoflowId, core: Option<usize>, ingress: usize, egress: usize, scheduled: f64, expected: f64 },
    SplitFlow { coflow: CoflowId, ingress: usize, egress: usize },
    DuplicateEvent { coflow: CoflowId, core: usize, ingress: usize, egress: usize },
    CompletionMismatch { coflow: CoflowId, reported: f64, expected: f64 },
    ObjectiveMismatch { reported: f64, expected: f64 },
    SegmentOverlap { core: usize, first: usize, second: usize },
    SegmentShape { segment: usize },
    OutsideSegment { event: usize },
    ShapeMismatch,
}

impl fmt::Display for FeasibilityIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use FeasibilityIssue::*;
        match self {
            UnknownCoflow { event, coflow } => write!(f, "event {event}: unknown coflow {coflow}"),
            OutOfRange { event } => write!(f, "event {event}: core or port out of range"),
            PortConflict { core, port, first, second } => {
                write!(f, "port conflict on core {core} port {port}: events {first} and {second}")
            }
            ReleaseViolation { event, setup_time, release } => {
                write!(f, "release violation: event {event} set up at {setup_time} before release {release}")
            }
            DelayMismatch { event } => write!(f, "event {event}: start is not setup plus delay"),
            DurationMismatch { event } => write!(f, "event {event}: duration is not volume over rate"),
            VolumeMismatch { coflow, core, ingress, egress, scheduled, expected } => write!(
                f,
                "volume mismatch: coflow {coflow} core {core:?} ({ingress},{egress}) scheduled {scheduled}, expected {expected}"
            ),
            SplitFlow { coflow, ingress, egress } => {
                write!(f, "coflow {coflow} flow ({ingress},{egress}) spans several cores")
            }
            DuplicateEvent { coflow, core, ingress, egress } => {
                write!(f, "coflow {coflow} subflow ({ingress},{egress}) on core {core} has several circuits")
            }
            CompletionMismatch { coflow, reported, expected } => {
                write!(f, "coflow {coflow}: completion {reported}, events give {expected}")
            }
            ObjectiveMismatch { reported, expected } => write!(f, "objective {reported}, expected {expected}"),
            SegmentOverlap { core, first, second } => {
                write!(f, "segments {first} and {second} on core {core} overlap or are closer than the delay")
            }
            SegmentShape { segment } => write!(f, "segment {segment} is malformed"),
            OutsideSegment { event } => write!(f, "event {event} does not fit a configuration segment"),
            ShapeMismatch => write!(f, "schedule does not match the instance shape"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub issues: Vec<FeasibilityIssue>,
}

impl FeasibilityReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Audits `result`. Volumes are compared with `allocation` per core when
/// given, and with the instance demand otherwise.
pub fn check_feasibility(
    result: &ScheduleResult,
    instance: &Instance,
    allocation: Option<&Allocation>,
) -> FeasibilityReport {
    let mut out = Vec::new();
    let config = &instance.config;
    let n = config.num_ports;
    let k_count = config.num_cores();
    let m_count = instance.num_coflows();
    let delay = config.effective_delay();
    if result.completion.len() != m_count
        || result.per_core_completion.len() != m_count
        || result.coflow_ids.iter().ne(instance.coflows.iter().map(|c| &c.id))
    {
        return FeasibilityReport { issues: vec![FeasibilityIssue::ShapeMismatch] };
    }
    let index: HashMap<CoflowId, usize> = instance.coflows.iter().enumerate().map(|(m, c)| (c.id, m)).collect();

    // Per-event checks; collect valid events per (core, port).
    let mut owner = vec![usize::MAX; result.events.len()];
    let mut by_port: Vec<Vec<usize>> = vec![Vec::new(); k_count * 2 * n];
    for (e, ev) in result.events.iter().enumerate() {
        let Some(&m) = index.get(&ev.coflow) else {
            out.push(FeasibilityIssue::UnknownCoflow { event: e, coflow: ev.coflow });
            continue;
        };
        if ev.core >= k_count || ev.ingress >= n || ev.egress >= n || !(ev.volume > 0.0) {
            out.push(FeasibilityIssue::OutOfRange { event: e });
            continue;
        }
        owner[e] = m;
        let release = instance.coflows[m].release;
        if !le(release, ev.setup_time) {
            out.push(FeasibilityIssue::ReleaseViolation { event: e, setup_time: ev.setup_time, release });
        }
        if result.model == SimModel::NotAllStop && !close(ev.start_time, ev.setup_time + delay) {
            out.push(FeasibilityIssue::DelayMismatch { event: e });
        }
        if !close(ev.end_time - ev.start_time, ev.volume / config.core_rates[ev.core])
            && !close(ev.end_time, ev.start_time + ev.volume / config.core_rates[ev.core])
        {
            out.push(FeasibilityIssue::DurationMismatch { event: e });
        }
        by_port[(ev.core * 2 * n) + ev.ingress].push(e);
        by_port[(ev.core * 2 * n) + n + ev.egress].push(e);
    }

    // Port exclusivity over [setup, end).
    for (slot, list) in by_port.iter_mut().enumerate() {
        list.sort_by(|&a, &b| {
            let (ea, eb) = (&result.events[a], &result.events[b]);
            ea.setup_time.total_cmp(&eb.setup_time).then(a.cmp(&b))
        });
        for w in list.windows(2) {
            let (a, b) = (&result.events[w[0]], &result.events[w[1]]);
            if !le(a.end_time, b.setup_time) {
                out.push(FeasibilityIssue::PortConflict {
                    core: slot / (2 * n),
                    port: slot % (2 * n),
                    first: w[0],
                    second: w[1],
                });
            }
        }
    }

    // Volumes and the one-circuit-per-subflow rule.
    let mut per_core: HashMap<(usize, usize, usize, usize), (f64, usize)> = HashMap::new();
    for (e, ev) in result.events.iter().enumerate() {
        if owner[e] == usize::MAX {
            continue;
        }
        let slot = per_core.entry((owner[e], ev.core, ev.ingress, ev.egress)).or_insert((0.0, 0));
        slot.0 += ev.volume;
        slot.1 += 1;
    }
    let vol_close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
    let mut keys: Vec<_> = per_core.keys().copied().collect();
    keys.sort_unstable();
    if result.model == SimModel::NotAllStop {
        for &(m, core, i, j) in &keys {
            if per_core[&(m, core, i, j)].1 > 1 {
                out.push(FeasibilityIssue::DuplicateEvent { coflow: instance.coflows[m].id, core, ingress: i, egress: j });
            }
        }
    }
    match allocation {
        Some(alloc) => {
            let mut expected: HashMap<(usize, usize, usize, usize), f64> = HashMap::new();
            for (m, flows) in alloc.flows.iter().enumerate().take(m_count) {
                for f in flows {
                    *expected.entry((m, f.core, f.ingress, f.egress)).or_insert(0.0) += f.volume;
                }
            }
            let mut all: Vec<_> = expected.keys().chain(per_core.keys()).copied().collect();
            all.sort_unstable();
            all.dedup();
            for key in all {
                let got = per_core.get(&key).map_or(0.0, |s| s.0);
                let want = expected.get(&key).copied().unwrap_or(0.0);
                if !vol_close(got, want) {
                    out.push(FeasibilityIssue::VolumeMismatch {
                        coflow: instance.coflows[key.0].id,
                        core: Some(key.1),
                        ingress: key.2,
                        egress: key.3,
                        scheduled: got,
                        expected: want,
                    });
                }
            }
        }
        None => {
            let mut total: HashMap<(usize, usize, usize), (f64, Vec<usize>)> = HashMap::new();
            for &(m, core, i, j) in &keys {
                let slot = total.entry((m, i, j)).or_insert((0.0, Vec::new()));
                slot.0 += per_core[&(m, core, i, j)].0;
                slot.1.push(core);
            }
            for (m, c) in instance.coflows.iter().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        let (got, cores) = total.get(&(m, i, j)).map_or((0.0, 0), |s| (s.0, s.1.len()));
                        let want = c.demand.get(i, j);
                        if !vol_close(got, want) {
                            out.push(FeasibilityIssue::VolumeMismatch {
                                coflow: c.id,
                                core: None,
                                ingress: i,
                                egress: j,
                                scheduled: got,
                                expected: want,
                            });
                        }
                        if cores > 1 {
                            out.push(FeasibilityIssue::SplitFlow { coflow: c.id, ingress: i, egress: j });
                        }
                    }
                }
            }
        }
    }

    // Completion and objective consistency.
    let mut expect_core = vec![vec![None::<f64>; k_count]; m_count];
    for (e, ev) in result.events.iter().enumerate() {
        if owner[e] != usize::MAX {
            let slot = &mut expect_core[owner[e]][ev.core];
            *slot = Some(slot.map_or(ev.end_time, |v| v.max(ev.end_time)));
        }
    }
    let mut objective = 0.0;
    for (m, c) in instance.coflows.iter().enumerate() {
        let expected = expect_core[m].iter().flatten().copied().fold(c.release, f64::max);
        let per_core_ok = result.per_core_completion[m].len() == k_count
            && result.per_core_completion[m]
                .iter()
                .zip(&expect_core[m])
                .all(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) => close(*a, *b),
                    (None, None) => true,
                    _ => false,
                });
        if !close(result.completion[m], expected) || !per_core_ok {
            out.push(FeasibilityIssue::CompletionMismatch { coflow: c.id, reported: result.completion[m], expected });
        }
        objective += c.weight * result.completion[m];
    }
    if !close(result.objective, objective) {
        out.push(FeasibilityIssue::ObjectiveMismatch { reported: result.objective, expected: objective });
    }

    if result.model == SimModel::AllStop {
        check_segments(result, instance, &mut out);
    }
    FeasibilityReport { issues: out }
}

fn check_segments(result: &ScheduleResult, instance: &Instance, out: &mut Vec<FeasibilityIssue>) {
    let config = &instance.config;
    let n = config.num_ports;
    let delay = config.effective_delay();
    let mut per_core: Vec<Vec<usize>> = vec![Vec::new(); config.num_cores()];
    for (s, seg) in result.segments.iter().enumerate() {
        let mut seen = vec![false; n];
        let perm_ok = seg.perm.len() == n && seg.perm.iter().all(|&j| j < n && !std::mem::replace(&mut seen[j], true));
        if seg.core >= config.num_cores()
            || !perm_ok
            || !close(seg.hold_start, seg.reconfig_start + delay)
            || !le(seg.hold_start, seg.hold_end)
        {
            out.push(FeasibilityIssue::SegmentShape { segment: s });
            continue;
        }
        per_core[seg.core].push(s);
    }
    for (core, list) in per_core.iter_mut().enumerate() {
        let segs = &result.segments;
        list.sort_by(|&a, &b| segs[a].reconfig_start.total_cmp(&segs[b].reconfig_start).then(a.cmp(&b)));
        for w in list.windows(2) {
            let (a, b) = (&segs[w[0]], &segs[w[1]]);
            if !le(a.hold_end, b.reconfig_start) || !le(a.hold_end + delay, b.hold_start) {
                out.push(FeasibilityIssue::SegmentOverlap { core, first: w[0], second: w[1] });
            }
        }
    }
    // Every piece sits inside a segment of its core that connects its ports.
    let mut by_start: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
    for (s, seg) in result.segments.iter().enumerate() {
        by_start.entry((seg.core, seg.hold_start.to_bits())).or_default().push(s);
    }
    for (e, ev) in result.events.iter().enumerate() {
        let fits = by_start.get(&(ev.core, ev.start_time.to_bits())).is_some_and(|list| {
            list.iter().any(|&s| {
                let seg = &result.segments[s];
                seg.coflow == ev.coflow
                    && seg.perm.get(ev.ingress) == Some(&ev.egress)
                    && close(ev.setup_time, seg.reconfig_start)
                    && le(ev.end_time, seg.hold_end)
            })
        });
        if !fits {
            out.push(FeasibilityIssue::OutsideSegment { event: e });
        }
    }
}

/// Decision instants at which a released, not yet started subflow had both
/// ports idle after dispatch. Empty for a work-conserving schedule.
pub fn work_conservation_violations(result: &ScheduleResult, instance: &Instance) -> Vec<(usize, f64)> {
    let index: HashMap<CoflowId, usize> = instance.coflows.iter().enumerate().map(|(m, c)| (c.id, m)).collect();
    let mut out = Vec::new();
    for core in 0..instance.config.num_cores() {
        let evs: Vec<usize> = (0..result.events.len()).filter(|&e| result.events[e].core == core).collect();
        let mut points: Vec<f64> = vec![0.0];
        points.extend(instance.coflows.iter().map(|c| c.release));
        points.extend(evs.iter().map(|&e| result.events[e].end_time));
        points.sort_by(f64::total_cmp);
        points.dedup();
        for &t in &points {
            let busy = |port_in: Option<usize>, port_out: Option<usize>| {
                evs.iter().any(|&e| {
                    let ev = &result.events[e];
                    ev.setup_time <= t
                        && t < ev.end_time
                        && (Some(ev.ingress) == port_in || Some(ev.egress) == port_out)
                })
            };
            for &e in &evs {
                let ev = &result.events[e];
                let release = instance.coflows[index[&ev.coflow]].release;
                if release <= t && ev.setup_time > t && !busy(Some(ev.ingress), None) && !busy(None, Some(ev.egress)) {
                    out.push((e, t));
                }
            }
        }
    }
    out
}
