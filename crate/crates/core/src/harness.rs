//! Scheme wiring, comparisons and parameter sweeps.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{greedy_allocate, load_only_allocate, Allocation};
use crate::lp::{solve_instance, LpError, LpSolution};
use crate::metrics::{self, format_rates, ExperimentRecord};
use crate::model::{Instance, NetworkConfig, SwitchMode};
use crate::ordering::{lp_guided_order, wspt_order, CoflowOrder, OrderError};
use crate::sim::{
    check_feasibility, simulate_all_stop_bvn, simulate_coflow_exclusive, simulate_not_all_stop, FeasibilityReport,
    ScheduleResult, SimError,
};
use crate::trace::{
    fb_like_trace, ingest_fb_trace, parse_canonical, sample_instance, synth_generate, FbTrace, Perturbation,
    ReleasePolicy, RemapPolicy, SamplingParams, SynthParams, SynthRelease, TraceError, WeightPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "OURS")]
    Ours,
    #[serde(rename = "WSPT-ORDER")]
    WsptOrder,
    #[serde(rename = "LOAD-ONLY")]
    LoadOnly,
    #[serde(rename = "SUNFLOW-S")]
    SunflowS,
    #[serde(rename = "BVN-S")]
    BvnS,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Ours, Scheme::WsptOrder, Scheme::LoadOnly, Scheme::SunflowS, Scheme::BvnS];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ours => "OURS",
            Scheme::WsptOrder => "WSPT-ORDER",
            Scheme::LoadOnly => "LOAD-ONLY",
            Scheme::SunflowS => "SUNFLOW-S",
            Scheme::BvnS => "BVN-S",
        }
    }

    pub fn uses_lp_order(self) -> bool {
        self != Scheme::WsptOrder
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_uppercase().replace('_', "-");
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == norm || (norm == "BVN" && *x == Scheme::BvnS) || (norm == "SUNFLOW" && *x == Scheme::SunflowS))
            .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{scheme} produced an infeasible schedule:\n{report}")]
    Infeasible { scheme: Scheme, report: FeasibilityReport },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("plan: {0}")]
    Plan(String),
}

/// A scheme's output on one instance.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub order: CoflowOrder,
    pub allocation: Allocation,
    pub result: ScheduleResult,
    pub seconds: f64,
}

/// Runs one scheme. `lp` is the solved ordering LP, required by every
/// scheme except WSPT-ORDER. The schedule is feasibility-checked.
pub fn run_scheme_with(instance: &Instance, scheme: Scheme, lp: Option<&LpSolution>) -> Result<SchemeRun, HarnessError> {
    let start = Instant::now();
    let order = match (scheme, lp) {
        (Scheme::WsptOrder, _) => wspt_order(instance),
        (_, Some(sol)) => lp_guided_order(instance, sol)?,
        (_, None) => lp_guided_order(instance, &solve_instance(instance)?)?,
    };
    let allocation = match scheme {
        Scheme::LoadOnly => load_only_allocate(instance, &order)?,
        _ => greedy_allocate(instance, &order)?,
    };
    let result = match scheme {
        Scheme::SunflowS => simulate_coflow_exclusive(instance, &allocation)?,
        Scheme::BvnS => simulate_all_stop_bvn(instance, &allocation)?,
        _ => simulate_not_all_stop(instance, &allocation)?,
    };
    let report = check_feasibility(&result, instance, Some(&allocation));
    if !report.is_empty() {
        return Err(HarnessError::Infeasible { scheme, report });
    }
    Ok(SchemeRun { scheme, order, allocation, result, seconds: start.elapsed().as_secs_f64() })
}

/// Runs one scheme, solving the LP if needed, and records its metrics
/// (normalization against itself only when it is OURS).
pub fn run_scheme(instance: &Instance, scheme: Scheme) -> Result<(ScheduleResult, ExperimentRecord), HarnessError> {
    let meta = RecordMeta::for_instance(instance, 0, "given");
    let lp = if scheme.uses_lp_order() { Some(solve_instance(instance)?) } else { None };
    let run = run_scheme_with(instance, scheme, lp.as_ref())?;
    let reference = (scheme == Scheme::Ours).then_some(run.result.objective);
    let rec = record(&meta, &run, lp.as_ref().map(|s| s.objective), reference, false);
    Ok((run.result, rec))
}

/// Parameter-point fields shared by every record of one cell.
#[derive(Debug, Clone)]
pub struct RecordMeta {
    pub mode: SwitchMode,
    pub num_cores: usize,
    pub num_ports: usize,
    pub num_coflows: usize,
    pub delay: f64,
    pub rates: Vec<f64>,
    pub seed: u64,
    pub release_policy: String,
}

impl RecordMeta {
    pub fn for_instance(instance: &Instance, seed: u64, release_policy: &str) -> Self {
        let c = &instance.config;
        Self {
            mode: c.mode,
            num_cores: c.num_cores(),
            num_ports: c.num_ports,
            num_coflows: instance.num_coflows(),
            delay: c.reconfig_delay,
            rates: c.core_rates.clone(),
            seed,
            release_policy: release_policy.to_string(),
        }
    }

    fn empty_record(&self, scheme: Scheme) -> ExperimentRecord {
        ExperimentRecord {
            scheme: scheme.name().to_string(),
            mode: self.mode.to_string(),
            num_cores: self.num_cores,
            num_ports: self.num_ports,
            num_coflows: self.num_coflows,
            delay: self.delay,
            rates: format_rates(&self.rates),
            seed: self.seed,
            release_policy: self.release_policy.clone(),
            total_weighted_cct: None,
            normalized_weighted_cct: None,
            p95_cct: None,
            p99_cct: None,
            lp_bound: None,
            approx_ratio: None,
            runtime_seconds: None,
            error: None,
        }
    }
}

fn record(
    meta: &RecordMeta,
    run: &SchemeRun,
    lp_bound: Option<f64>,
    reference: Option<f64>,
    runtime: bool,
) -> ExperimentRecord {
    let mut rec = meta.empty_record(run.scheme);
    let obj = run.result.objective;
    rec.total_weighted_cct = Some(obj);
    rec.normalized_weighted_cct = reference.and_then(|r| metrics::normalized_weighted_cct(obj, r).ok());
    rec.p95_cct = metrics::percentile_cct(&run.result.completion, 95.0).ok();
    rec.p99_cct = metrics::percentile_cct(&run.result.completion, 99.0).ok();
    rec.lp_bound = lp_bound;
    if run.scheme == Scheme::Ours {
        rec.approx_ratio = lp_bound.map(|b| metrics::approx_ratio(obj, b));
    }
    rec.runtime_seconds = runtime.then_some(run.seconds);
    rec
}

/// Runs `schemes` on one instance, sharing a single LP solve. NormW is
/// relative to OURS when it is among the schemes. Failures become records
/// with the `error` field set.
pub fn compare(instance: &Instance, schemes: &[Scheme], meta: &RecordMeta, runtime: bool) -> Vec<ExperimentRecord> {
    let lp_start = Instant::now();
    let lp = if schemes.iter().any(|s| s.uses_lp_order()) {
        Some(solve_instance(instance).map_err(|e| e.to_string()))
    } else {
        None
    };
    let lp_seconds = lp_start.elapsed().as_secs_f64();
    let runs: Vec<(Scheme, Result<SchemeRun, String>)> = schemes
        .iter()
        .map(|&s| {
            let r = match (&lp, s.uses_lp_order()) {
                (Some(Err(e)), true) => Err(format!("LP: {e}")),
                (Some(Ok(sol)), true) => run_scheme_with(instance, s, Some(sol)).map_err(|e| e.to_string()),
                _ => run_scheme_with(instance, s, None).map_err(|e| e.to_string()),
            };
            let r = r.map(|mut run| {
                if s.uses_lp_order() {
                    run.seconds += lp_seconds;
                }
                run
            });
            (s, r)
        })
        .collect();
    let reference = runs
        .iter()
        .find(|(s, _)| *s == Scheme::Ours)
        .and_then(|(_, r)| r.as_ref().ok())
        .map(|r| r.result.objective);
    let lp_bound = match &lp {
        Some(Ok(sol)) => Some(sol.objective),
        _ => None,
    };
    runs.into_iter()
        .map(|(s, r)| match r {
            Ok(run) => record(meta, &run, lp_bound, reference, runtime),
            Err(e) => ExperimentRecord { error: Some(e), ..meta.empty_record(s) },
        })
        .collect()
}

/// Where a plan's instances come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceSource {
    /// A fixed canonical instance file; sweeps override its network fields.
    Canonical { path: PathBuf },
    /// Sampled from a Facebook-benchmark trace file.
    Trace {
        path: PathBuf,
        #[serde(default)]
        weights: WeightPolicy,
        #[serde(default)]
        releases: ReleasePolicy,
        #[serde(default)]
        remap: RemapPolicy,
        #[serde(default)]
        perturbation: Perturbation,
    },
    /// Sampled from the generated stand-in trace ([`fb_like_trace`]).
    FbLike {
        #[serde(default)]
        trace_seed: u64,
        #[serde(default)]
        weights: WeightPolicy,
        #[serde(default)]
        releases: ReleasePolicy,
        #[serde(default)]
        remap: RemapPolicy,
        #[serde(default)]
        perturbation: Perturbation,
    },
    /// Independent random entries ([`synth_generate`]).
    Synthetic {
        density: f64,
        volume_min: f64,
        volume_max: f64,
        #[serde(default)]
        weights: WeightPolicy,
        #[serde(default)]
        releases: SynthRelease,
    },
}

impl InstanceSource {
    fn release_label(&self) -> String {
        let label = match self {
            InstanceSource::Canonical { .. } => return "file".into(),
            InstanceSource::Trace { releases, .. } | InstanceSource::FbLike { releases, .. } => {
                serde_json::to_value(releases)
            }
            InstanceSource::Synthetic { releases, .. } => serde_json::to_value(releases),
        };
        label
            .ok()
            .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub num_ports: usize,
    pub rates: Vec<f64>,
    pub delay: f64,
    #[serde(default = "default_mode")]
    pub mode: SwitchMode,
}

fn default_mode() -> SwitchMode {
    SwitchMode::Ocs
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self { num_ports: 10, rates: vec![10.0, 20.0, 30.0], delay: 8.0, mode: SwitchMode::Ocs }
    }
}

impl NetworkSpec {
    pub fn config(&self) -> NetworkConfig {
        let delay = if self.mode == SwitchMode::Eps { 0.0 } else { self.delay };
        NetworkConfig { num_ports: self.num_ports, core_rates: self.rates.clone(), reconfig_delay: delay, mode: self.mode }
    }
}

/// One sweep dimension. Several axes form a Cartesian product, first axis
/// outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SweepAxis {
    Delay { values: Vec<f64> },
    Ports { values: Vec<usize> },
    /// Core configurations, one rate vector each.
    Cores { rates: Vec<Vec<f64>> },
}

impl SweepAxis {
    fn len(&self) -> usize {
        match self {
            SweepAxis::Delay { values } => values.len(),
            SweepAxis::Ports { values } => values.len(),
            SweepAxis::Cores { rates } => rates.len(),
        }
    }

    fn apply(&self, idx: usize, net: &mut NetworkSpec) {
        match self {
            SweepAxis::Delay { values } => net.delay = values[idx],
            SweepAxis::Ports { values } => net.num_ports = values[idx],
            SweepAxis::Cores { rates } => net.rates = rates[idx].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub source: InstanceSource,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default = "default_coflows")]
    pub num_coflows: usize,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Adds wall-clock seconds to each record (makes output run-dependent).
    #[serde(default)]
    pub record_runtime: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_coflows() -> usize {
    100
}

fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn default_reps() -> usize {
    1
}

impl ExperimentPlan {
    /// Defaults: N=10, M=100, K=3 with rates (10, 20, 30), delay 8, unit
    /// weights, zero releases, all schemes.
    pub fn defaults(source: InstanceSource) -> Self {
        Self {
            source,
            network: NetworkSpec::default(),
            num_coflows: default_coflows(),
            schemes: default_schemes(),
            sweep: Vec::new(),
            repetitions: 1,
            base_seed: 0,
            record_runtime: false,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schemes.is_empty() {
            return Err(HarnessError::Plan("at least one scheme is required".into()));
        }
        if self.sweep.iter().any(|a| a.len() == 0) {
            return Err(HarnessError::Plan("sweep axis without values".into()));
        }
        Ok(())
    }

    /// Network settings of every sweep point, first axis outermost.
    pub fn points(&self) -> Vec<NetworkSpec> {
        let mut points = vec![self.network.clone()];
        for axis in &self.sweep {
            points = points
                .into_iter()
                .flat_map(|p| {
                    (0..axis.len()).map(move |i| {
                        let mut q = p.clone();
                        axis.apply(i, &mut q);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// Resolved instance source with any trace loaded once.
enum Loaded {
    Fixed(Instance),
    Trace(FbTrace, WeightPolicy, ReleasePolicy, RemapPolicy, Perturbation),
    Synthetic(f64, f64, f64, WeightPolicy, SynthRelease),
}

fn read(path: &PathBuf) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.clone(), source })
}

fn load(source: &InstanceSource) -> Result<Loaded, HarnessError> {
    Ok(match source {
        InstanceSource::Canonical { path } => Loaded::Fixed(parse_canonical(&read(path)?)?),
        InstanceSource::Trace { path, weights, releases, remap, perturbation } => {
            Loaded::Trace(ingest_fb_trace(&read(path)?)?, *weights, *releases, *remap, *perturbation)
        }
        InstanceSource::FbLike { trace_seed, weights, releases, remap, perturbation } => {
            Loaded::Trace(fb_like_trace(*trace_seed), *weights, *releases, *remap, *perturbation)
        }
        InstanceSource::Synthetic { density, volume_min, volume_max, weights, releases } => {
            Loaded::Synthetic(*density, *volume_min, *volume_max, *weights, *releases)
        }
    })
}

fn build(loaded: &Loaded, net: &NetworkSpec, num_coflows: usize, seed: u64) -> Result<Instance, HarnessError> {
    let config = net.config();
    Ok(match loaded {
        Loaded::Fixed(inst) => {
            let mut inst = inst.clone();
            if inst.config.num_ports != config.num_ports {
                return Err(HarnessError::Plan("a canonical source cannot sweep the port count".into()));
            }
            inst.config = config;
            inst
        }
        Loaded::Trace(trace, weights, releases, remap, perturbation) => {
            let params = SamplingParams {
                num_ports: net.num_ports,
                num_coflows,
                seed,
                weights: *weights,
                releases: *releases,
                remap: *remap,
                perturbation: *perturbation,
            };
            sample_instance(trace, &params, config)?
        }
        Loaded::Synthetic(density, volume_min, volume_max, weights, releases) => {
            let params = SynthParams {
                num_coflows,
                density: *density,
                volume_min: *volume_min,
                volume_max: *volume_max,
                seed,
                weights: *weights,
                releases: *releases,
            };
            synth_generate(&params, config)?
        }
    })
}

/// Builds the instance of one sweep point and repetition.
pub fn plan_instance(plan: &ExperimentPlan, point: &NetworkSpec, repetition: usize) -> Result<Instance, HarnessError> {
    build(&load(&plan.source)?, point, plan.num_coflows, plan.base_seed + repetition as u64)
}

/// Runs every (sweep point, repetition) cell, possibly in parallel, and
/// returns records in cell order (points, then repetitions, then schemes
/// in plan order). Cell failures are recorded and the sweep continues.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<Vec<ExperimentRecord>, HarnessError> {
    plan.validate()?;
    let loaded = load(&plan.source)?;
    let release_label = plan.source.release_label();
    let cells: Vec<(NetworkSpec, u64)> = plan
        .points()
        .into_iter()
        .flat_map(|p| (0..plan.repetitions).map(move |r| (p.clone(), plan.base_seed + r as u64)))
        .collect();
    let per_cell: Vec<Vec<ExperimentRecord>> = cells
        .par_iter()
        .map(|(net, seed)| {
            let meta = RecordMeta {
                mode: net.mode,
                num_cores: net.rates.len(),
                num_ports: net.num_ports,
                num_coflows: plan.num_coflows,
                delay: net.config().reconfig_delay,
                rates: net.rates.clone(),
                seed: *seed,
                release_policy: release_label.clone(),
            };
            match build(&loaded, net, plan.num_coflows, *seed) {
                Ok(inst) => compare(&inst, &plan.schemes, &meta, plan.record_runtime),
                Err(e) => plan
                    .schemes
                    .iter()
                    .map(|&s| ExperimentRecord { error: Some(e.to_string()), ..meta.empty_record(s) })
                    .collect(),
            }
        })
        .collect();
    Ok(per_cell.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coflow, DemandMatrix};

    fn synth_plan() -> ExperimentPlan {
        let mut plan = ExperimentPlan::defaults(InstanceSource::Synthetic {
            density: 0.5,
            volume_min: 1.0,
            volume_max: 10.0,
            weights: WeightPolicy::Unit,
            releases: SynthRelease::Zero,
        });
        plan.network.num_ports = 4;
        plan.num_coflows = 5;
        plan
    }

    #[test]
    fn scheme_names_parse() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert_eq!("bvn".parse::<Scheme>().unwrap(), Scheme::BvnS);
        assert!("fifo".parse::<Scheme>().is_err());
    }

    #[test]
    fn empty_instance_has_zero_objective_everywhere() {
        let inst = Instance::new(NetworkConfig::ocs(2, vec![1.0], 1.0), vec![]);
        for s in Scheme::ALL {
            let (res, rec) = run_scheme(&inst, s).unwrap();
            assert_eq!(res.objective, 0.0);
            assert_eq!(rec.total_weighted_cct, Some(0.0));
        }
    }

    #[test]
    fn ours_normalizes_to_one() {
        let inst = Instance::new(
            NetworkConfig::ocs(2, vec![1.0, 2.0], 1.0),
            vec![
                Coflow::new(0, DemandMatrix::from_triplets(2, &[(0, 0, 3.0), (1, 0, 1.0)]), 1.0, 0.0),
                Coflow::new(1, DemandMatrix::from_triplets(2, &[(0, 1, 2.0)]), 2.0, 0.0),
            ],
        );
        let meta = RecordMeta::for_instance(&inst, 0, "zero");
        let recs = compare(&inst, &Scheme::ALL, &meta, false);
        assert_eq!(recs.len(), 5);
        assert!(recs.iter().all(|r| r.error.is_none()));
        assert_eq!(recs[0].normalized_weighted_cct, Some(1.0));
        assert!(recs[0].approx_ratio.unwrap() >= 1.0 - 1e-6);
        assert!(recs[1..].iter().all(|r| r.approx_ratio.is_none()));
    }

    #[test]
    fn sweep_cardinality_and_reproducibility() {
        let mut plan = synth_plan();
        plan.sweep = vec![SweepAxis::Delay { values: vec![2.0, 4.0, 6.0] }];
        plan.repetitions = 2;
        plan.schemes = vec![Scheme::Ours, Scheme::BvnS];
        let a = run_sweep(&plan).unwrap();
        assert_eq!(a.len(), 3 * 2 * 2);
        assert!(a.iter().all(|r| r.error.is_none()), "{a:?}");
        assert_eq!(a, run_sweep(&plan).unwrap());
        assert_eq!(a[0].delay, 2.0);
        assert_eq!(a[4].delay, 4.0);
        assert_eq!((a[0].seed, a[2].seed), (0, 1));
    }

    #[test]
    fn zero_repetitions_is_empty() {
        let mut plan = synth_plan();
        plan.repetitions = 0;
        assert!(run_sweep(&plan).unwrap().is_empty());
        plan.schemes.clear();
        assert!(run_sweep(&plan).is_err());
    }

    #[test]
    fn plan_json_defaults() {
        let plan: ExperimentPlan = serde_json::from_str(
            r#"{"source": {"kind": "fb-like"}, "sweep": [{"axis": "cores", "rates": [[10, 20, 30], [5, 10, 20, 25]]}]}"#,
        )
        .unwrap();
        assert_eq!(plan.network, NetworkSpec::default());
        assert_eq!(plan.num_coflows, 100);
        assert_eq!(plan.schemes.len(), 5);
        assert_eq!(plan.points().len(), 2);
        assert_eq!(plan.points()[1].rates, vec![5.0, 10.0, 20.0, 25.0]);
    }
}
