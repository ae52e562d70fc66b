//! Instance files, Facebook-benchmark trace ingestion, sampling and
//! synthetic generators.
//!
//! Canonical instance file (version 1), JSON with keys in sorted order and
//! numbers in shortest round-trip form:
//!
//! ```text
//! {
//!   "coflows": [
//!     {"flows": [[i, j, volume], ...], "id": 7, "release": 0.0, "weight": 1.0},
//!     ...
//!   ],
//!   "config": {"delay": 8.0, "mode": "ocs", "num_ports": 10, "rates": [10.0, 20.0, 30.0]},
//!   "version": 1
//! }
//! ```
//!
//! Flows are listed row-major; ports are 0-based.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Coflow, DemandMatrix, Instance, InvalidInstance, NetworkConfig, SwitchMode};

pub const CANONICAL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("instance file: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("instance file version {0} is not supported")]
    Version(u32),
    #[error("instance file: flow ({i},{j}) of coflow {id} is outside {n} ports")]
    FlowIndex { id: u64, i: usize, j: usize, n: usize },
    #[error(transparent)]
    Invalid(#[from] InvalidInstance),
    #[error("trace line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("trace header declares {declared} coflows, found {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("machine {0} is not mapped to a port")]
    Unmapped(u32),
    #[error("requested {requested} {what}, only {available} available")]
    NotEnough { what: &'static str, requested: usize, available: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    num_ports: usize,
    rates: Vec<f64>,
    delay: f64,
    mode: SwitchMode,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCoflow {
    id: u64,
    weight: f64,
    release: f64,
    flows: Vec<(usize, usize, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileInstance {
    version: u32,
    config: FileConfig,
    coflows: Vec<FileCoflow>,
}

fn num(v: f64) -> String {
    serde_json::to_string(&v).expect("finite numbers serialize")
}

fn num_list(vs: &[f64]) -> String {
    vs.iter().map(|&v| num(v)).collect::<Vec<_>>().join(", ")
}

/// Renders `instance` in canonical form. The instance must be valid.
pub fn write_canonical(instance: &Instance) -> Result<String, TraceError> {
    instance.ensure_valid()?;
    let c = &instance.config;
    let mut s = String::from("{\n  \"coflows\": [");
    for (idx, cf) in instance.coflows.iter().enumerate() {
        let flows: Vec<String> = cf
            .demand
            .nonzeros()
            .map(|(i, j, v)| format!("[{i}, {j}, {}]", num(v)))
            .collect();
        let sep = if idx == 0 { "\n" } else { ",\n" };
        let _ = write!(
            s,
            "{sep}    {{\"flows\": [{}], \"id\": {}, \"release\": {}, \"weight\": {}}}",
            flows.join(", "),
            cf.id.0,
            num(cf.release),
            num(cf.weight)
        );
    }
    if !instance.coflows.is_empty() {
        s.push_str("\n  ");
    }
    let _ = write!(
        s,
        "],\n  \"config\": {{\"delay\": {}, \"mode\": \"{}\", \"num_ports\": {}, \"rates\": [{}]}},\n  \"version\": {CANONICAL_VERSION}\n}}\n",
        num(c.reconfig_delay),
        c.mode,
        c.num_ports,
        num_list(&c.core_rates)
    );
    Ok(s)
}

/// Parses a canonical instance file and validates the instance.
pub fn parse_canonical(text: &str) -> Result<Instance, TraceError> {
    let f: FileInstance = serde_json::from_str(text)?;
    if f.version != CANONICAL_VERSION {
        return Err(TraceError::Version(f.version));
    }
    let n = f.config.num_ports;
    let config = NetworkConfig {
        num_ports: n,
        core_rates: f.config.rates,
        reconfig_delay: f.config.delay,
        mode: f.config.mode,
    };
    let mut coflows = Vec::with_capacity(f.coflows.len());
    for c in f.coflows {
        for &(i, j, _) in &c.flows {
            if i >= n || j >= n {
                return Err(TraceError::FlowIndex { id: c.id, i, j, n });
            }
        }
        coflows.push(Coflow::new(c.id, DemandMatrix::from_triplets(n, &c.flows), c.weight, c.release));
    }
    let instance = Instance::new(config, coflows);
    instance.ensure_valid()?;
    Ok(instance)
}

/// One coflow of a Facebook-benchmark trace: mapper locations and reducer
/// locations with received volume (MB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCoflowRecord {
    pub id: u64,
    /// Milliseconds.
    pub arrival_time: f64,
    pub senders: Vec<u32>,
    pub receivers: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbTrace {
    pub num_machines: usize,
    pub records: Vec<RawCoflowRecord>,
}

fn malformed(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Malformed { line, message: message.into() }
}

/// Parses the coflow-benchmark layout:
///
/// ```text
/// <machines> <coflows>
/// <id> <arrival ms> <#mappers> <loc>... <#reducers> <loc>:<MB>...
/// ```
///
/// Locations must be below the declared machine count. Blank lines are
/// ignored.
pub fn ingest_fb_trace(text: &str) -> Result<FbTrace, TraceError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| malformed(1, "empty trace"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |tok: &str, line: usize, what: &str| {
        tok.parse::<usize>().map_err(|_| malformed(line, format!("bad {what} `{tok}`")))
    };
    if h.len() != 2 {
        return Err(malformed(hline + 1, "header must be `<machines> <coflows>`"));
    }
    let num_machines = parse_usize(h[0], hline + 1, "machine count")?;
    let declared = parse_usize(h[1], hline + 1, "coflow count")?;
    let mut records = Vec::with_capacity(declared);
    for (idx, line) in lines {
        let ln = idx + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let mut at = 0;
        let mut next = |what: &str| -> Result<&str, TraceError> {
            let t = toks.get(at).copied().ok_or_else(|| malformed(ln, format!("missing {what}")))?;
            at += 1;
            Ok(t)
        };
        let machine = |tok: &str| -> Result<u32, TraceError> {
            let v: u32 = tok.parse().map_err(|_| malformed(ln, format!("bad location `{tok}`")))?;
            if v as usize >= num_machines {
                return Err(malformed(ln, format!("location {v} outside {num_machines} machines")));
            }
            Ok(v)
        };
        let id_tok = next("coflow id")?;
        let id: u64 = id_tok.parse().map_err(|_| malformed(ln, format!("bad coflow id `{id_tok}`")))?;
        let arr_tok = next("arrival time")?;
        let arrival_time: f64 = arr_tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| malformed(ln, format!("bad arrival time `{arr_tok}`")))?;
        let nm = parse_usize(next("mapper count")?, ln, "mapper count")?;
        let mut senders = Vec::with_capacity(nm);
        for _ in 0..nm {
            senders.push(machine(next("mapper location")?)?);
        }
        let nr = parse_usize(next("reducer count")?, ln, "reducer count")?;
        let mut receivers = Vec::with_capacity(nr);
        for _ in 0..nr {
            let tok = next("reducer entry")?;
            let (loc, mb) = tok
                .split_once(':')
                .ok_or_else(|| malformed(ln, format!("reducer entry `{tok}` is not `loc:MB`")))?;
            let v: f64 = mb
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| malformed(ln, format!("bad reducer volume `{mb}`")))?;
            receivers.push((machine(loc)?, v));
        }
        if at != toks.len() {
            return Err(malformed(ln, format!("{} trailing tokens", toks.len() - at)));
        }
        if senders.is_empty() && receivers.iter().any(|r| r.1 > 0.0) {
            return Err(malformed(ln, "receivers with volume but no mappers"));
        }
        records.push(RawCoflowRecord { id, arrival_time, senders, receivers });
    }
    if records.len() != declared {
        return Err(TraceError::CountMismatch { declared, found: records.len() });
    }
    Ok(FbTrace { num_machines, records })
}

/// Renders a trace in the coflow-benchmark layout.
pub fn write_fb_trace(trace: &FbTrace) -> String {
    let mut s = format!("{} {}\n", trace.num_machines, trace.records.len());
    for r in &trace.records {
        let _ = write!(s, "{} {} {}", r.id, r.arrival_time, r.senders.len());
        for m in &r.senders {
            let _ = write!(s, " {m}");
        }
        let _ = write!(s, " {}", r.receivers.len());
        for (m, v) in &r.receivers {
            let _ = write!(s, " {m}:{v}");
        }
        s.push('\n');
    }
    s
}

/// Bounds of the multiplicative perturbation applied before normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub low: f64,
    pub high: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self { low: 0.8, high: 1.2 }
    }
}

/// Splits each receiver's volume over its senders with perturbed,
/// normalised shares. The last share is computed by subtraction so every
/// receiver's column total is exact.
pub fn expand_receiver_level(
    record: &RawCoflowRecord,
    n: usize,
    port_of: impl Fn(u32) -> Option<usize>,
    perturbation: Perturbation,
    rng: &mut impl Rng,
) -> Result<DemandMatrix, TraceError> {
    let mut d = DemandMatrix::zeros(n);
    let senders: Vec<usize> = record
        .senders
        .iter()
        .map(|&s| port_of(s).ok_or(TraceError::Unmapped(s)))
        .collect::<Result<_, _>>()?;
    for &(r, v) in &record.receivers {
        let j = port_of(r).ok_or(TraceError::Unmapped(r))?;
        if v <= 0.0 || senders.is_empty() {
            continue;
        }
        let factors: Vec<f64> = senders
            .iter()
            .map(|_| {
                if perturbation.high > perturbation.low {
                    rng.gen_range(perturbation.low..perturbation.high)
                } else {
                    perturbation.low
                }
            })
            .collect();
        let total: f64 = factors.iter().sum();
        let mut given = 0.0;
        for (s, (&i, &f)) in senders.iter().zip(&factors).enumerate() {
            let share = if s + 1 == senders.len() { v - given } else { v * f / total };
            given += share;
            if share > 0.0 {
                d.add(i, j, share);
            }
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightPolicy {
    #[default]
    Unit,
    /// Integer weights drawn uniformly from `1..=max`.
    UniformInteger { max: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReleasePolicy {
    #[default]
    Zero,
    /// Trace arrival times rebased to the earliest sampled arrival and
    /// divided by `ms_per_unit`.
    Trace { ms_per_unit: f64 },
}

/// Handling of traffic that touches machines outside the sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemapPolicy {
    /// Every unselected machine is folded onto a uniformly drawn port.
    #[default]
    Redistribute,
    /// Traffic touching an unselected machine is dropped.
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub num_ports: usize,
    pub num_coflows: usize,
    pub seed: u64,
    #[serde(default)]
    pub weights: WeightPolicy,
    #[serde(default)]
    pub releases: ReleasePolicy,
    #[serde(default)]
    pub remap: RemapPolicy,
    #[serde(default)]
    pub perturbation: Perturbation,
}

fn draw_weight(policy: WeightPolicy, rng: &mut impl Rng) -> f64 {
    match policy {
        WeightPolicy::Unit => 1.0,
        WeightPolicy::UniformInteger { max } => rng.gen_range(1..=max.max(1)) as f64,
    }
}

/// Samples an `N`-port, `M`-coflow instance from a trace. Coflows keep trace
/// order; ports `0..N` follow the order machines were drawn in.
pub fn sample_instance(trace: &FbTrace, params: &SamplingParams, config: NetworkConfig) -> Result<Instance, TraceError> {
    let n = params.num_ports;
    if n != config.num_ports {
        return Err(TraceError::Parameter(format!(
            "sampling {n} ports under a {}-port config",
            config.num_ports
        )));
    }
    if n > trace.num_machines {
        return Err(TraceError::NotEnough { what: "machines", requested: n, available: trace.num_machines });
    }
    if params.num_coflows > trace.records.len() {
        return Err(TraceError::NotEnough {
            what: "coflows",
            requested: params.num_coflows,
            available: trace.records.len(),
        });
    }
    if let ReleasePolicy::Trace { ms_per_unit } = params.releases {
        if !(ms_per_unit.is_finite() && ms_per_unit > 0.0) {
            return Err(TraceError::Parameter("ms_per_unit must be positive".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut port = vec![None; trace.num_machines];
    for (p, machine) in sample(&mut rng, trace.num_machines, n).into_iter().enumerate() {
        port[machine] = Some(p);
    }
    if params.remap == RemapPolicy::Redistribute {
        for slot in port.iter_mut().filter(|s| s.is_none()) {
            *slot = Some(rng.gen_range(0..n));
        }
    }
    let chosen: BTreeSet<usize> = sample(&mut rng, trace.records.len(), params.num_coflows).into_iter().collect();
    let base = chosen.iter().map(|&c| trace.records[c].arrival_time).fold(f64::INFINITY, f64::min);
    let port_of = |m: u32| port.get(m as usize).copied().flatten();
    let mut coflows = Vec::with_capacity(chosen.len());
    for &c in &chosen {
        let rec = &trace.records[c];
        let kept;
        let rec = match params.remap {
            RemapPolicy::Redistribute => rec,
            RemapPolicy::Drop => {
                kept = RawCoflowRecord {
                    id: rec.id,
                    arrival_time: rec.arrival_time,
                    senders: rec.senders.iter().copied().filter(|&s| port_of(s).is_some()).collect(),
                    receivers: rec.receivers.iter().copied().filter(|&(r, _)| port_of(r).is_some()).collect(),
                };
                &kept
            }
        };
        let demand = expand_receiver_level(rec, n, port_of, params.perturbation, &mut rng)?;
        let weight = draw_weight(params.weights, &mut rng);
        let release = match params.releases {
            ReleasePolicy::Zero => 0.0,
            ReleasePolicy::Trace { ms_per_unit } => (rec.arrival_time - base) / ms_per_unit,
        };
        coflows.push(Coflow::new(rec.id, demand, weight, release));
    }
    let instance = Instance::new(config, coflows);
    instance.ensure_valid()?;
    Ok(instance)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynthRelease {
    #[default]
    Zero,
    /// Releases uniform on `[0, max]`.
    Uniform { max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub num_coflows: usize,
    /// Probability that an entry is nonzero.
    pub density: f64,
    pub volume_min: f64,
    pub volume_max: f64,
    pub seed: u64,
    #[serde(default)]
    pub weights: WeightPolicy,
    #[serde(default)]
    pub releases: SynthRelease,
}

/// Independent Bernoulli(density) entries with uniform volumes.
pub fn synth_generate(params: &SynthParams, config: NetworkConfig) -> Result<Instance, TraceError> {
    if !(params.density > 0.0 && params.density <= 1.0) {
        return Err(TraceError::Parameter(format!("density {} not in (0, 1]", params.density)));
    }
    if !(params.volume_min > 0.0 && params.volume_min <= params.volume_max && params.volume_max.is_finite()) {
        return Err(TraceError::Parameter("volume range must satisfy 0 < min <= max".into()));
    }
    if let SynthRelease::Uniform { max } = params.releases {
        if !(max.is_finite() && max >= 0.0) {
            return Err(TraceError::Parameter("release bound must be non-negative".into()));
        }
    }
    let n = config.num_ports;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut coflows = Vec::with_capacity(params.num_coflows);
    for m in 0..params.num_coflows {
        let mut d = DemandMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if rng.gen_bool(params.density) {
                    let v = if params.volume_max > params.volume_min {
                        rng.gen_range(params.volume_min..params.volume_max)
                    } else {
                        params.volume_min
                    };
                    d.set(i, j, v);
                }
            }
        }
        let weight = draw_weight(params.weights, &mut rng);
        let release = match params.releases {
            SynthRelease::Zero => 0.0,
            SynthRelease::Uniform { max } if max > 0.0 => rng.gen_range(0.0..max),
            SynthRelease::Uniform { .. } => 0.0,
        };
        coflows.push(Coflow::new(m as u64, d, weight, release));
    }
    let instance = Instance::new(config, coflows);
    instance.ensure_valid()?;
    Ok(instance)
}

/// Generates a stand-in for the public Facebook trace when the file is not
/// available: 150 machines, 526 coflows over one hour, with the
/// short/long and narrow/wide mix commonly reported for that trace
/// (longest flow under 5 MB is short, at most 50 flows is narrow).
/// Widths are log-uniform up to the machine count; per-flow sizes are
/// log-uniform on [0.01, 5) MB for short and [5, 1000] MB for long coflows.
pub fn fb_like_trace(seed: u64) -> FbTrace {
    const MACHINES: u32 = 150;
    const COFLOWS: usize = 526;
    const HOUR_MS: f64 = 3_600_000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.gen_range(lo.ln()..hi.ln())).exp();
    let mut arrivals: Vec<f64> = (0..COFLOWS).map(|_| rng.gen_range(0.0..HOUR_MS).floor()).collect();
    arrivals.sort_by(f64::total_cmp);
    let mut records = Vec::with_capacity(COFLOWS);
    for (idx, &arrival_time) in arrivals.iter().enumerate() {
        let u: f64 = rng.gen();
        // Short-narrow, long-narrow, short-wide, long-wide.
        let (long, wide) = match u {
            u if u < 0.52 => (false, false),
            u if u < 0.68 => (true, false),
            u if u < 0.83 => (false, true),
            _ => (true, true),
        };
        let (mappers, reducers) = if wide {
            loop {
                let a = log_uniform(&mut rng, 2.0, MACHINES as f64).round() as usize;
                let b = log_uniform(&mut rng, 2.0, MACHINES as f64).round() as usize;
                if a * b > 50 {
                    break (a, b);
                }
            }
        } else {
            loop {
                let a = rng.gen_range(1..=10);
                let b = rng.gen_range(1..=10);
                if a * b <= 50 {
                    break (a, b);
                }
            }
        };
        let senders: Vec<u32> = (0..mappers).map(|_| rng.gen_range(0..MACHINES)).collect();
        let receivers: Vec<(u32, f64)> = (0..reducers)
            .map(|_| {
                let flow_mb = if long {
                    log_uniform(&mut rng, 5.0, 1000.0)
                } else {
                    log_uniform(&mut rng, 0.01, 5.0)
                };
                let mb = (flow_mb * mappers as f64 * 1000.0).round() / 1000.0;
                (rng.gen_range(0..MACHINES), mb.max(0.001))
            })
            .collect();
        records.push(RawCoflowRecord { id: idx as u64 + 1, arrival_time, senders, receivers });
    }
    FbTrace { num_machines: MACHINES as usize, records }
}
