mod common;

use std::path::PathBuf;

use common::{random_instance, rel_close, Shape};
use ocsched::model::{validate_instance, NetworkConfig};
use ocsched::trace::{
    expand_receiver_level, fb_like_trace, ingest_fb_trace, parse_canonical, sample_instance, synth_generate,
    write_canonical, FbTrace, Perturbation, RawCoflowRecord, ReleasePolicy, RemapPolicy, SamplingParams, SynthParams,
    SynthRelease, TraceError, WeightPolicy,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn golden_instance_round_trips_byte_for_byte() {
    let text = fixture("instance_small.json");
    let inst = parse_canonical(&text).unwrap();
    assert_eq!(inst.coflows[2].demand.get(1, 2), 1e6);
    assert_eq!(write_canonical(&inst).unwrap(), text);
}

#[test]
fn random_instances_round_trip() {
    for seed in 0..100 {
        let inst = random_instance(seed, Shape::default());
        let text = write_canonical(&inst).unwrap();
        let back = parse_canonical(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(write_canonical(&back).unwrap(), text);
    }
}

#[test]
fn golden_trace_grammar() {
    let t = ingest_fb_trace(&fixture("fb_two_line.txt")).unwrap();
    assert_eq!(t.records, vec![RawCoflowRecord { id: 1, arrival_time: 100.0, senders: vec![0, 3], receivers: vec![(2, 10.0)] }]);

    let t = ingest_fb_trace(&fixture("fb_small.txt")).unwrap();
    assert_eq!(t.num_machines, 6);
    assert_eq!(t.records.len(), 4);
    assert_eq!(t.records[2].senders, vec![1, 2, 5]);
    assert_eq!(t.records[3].receivers, vec![(0, 1.0), (1, 2.0), (3, 3.0)]);

    assert!(matches!(
        ingest_fb_trace(&fixture("fb_count_mismatch.txt")),
        Err(TraceError::CountMismatch { declared: 3, found: 2 })
    ));
    for bad in ["fb_bad_reducer.txt", "fb_bad_location.txt"] {
        let err = ingest_fb_trace(&fixture(bad)).unwrap_err();
        assert!(matches!(err, TraceError::Malformed { line: 2, .. }), "{bad}: {err}");
    }
}

#[test]
fn expansion_conserves_column_sums() {
    let t = fb_like_trace(4);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for rec in t.records.iter().take(100) {
        let d = expand_receiver_level(rec, t.num_machines, |m| Some(m as usize), Perturbation::default(), &mut rng).unwrap();
        let mut expect = vec![0.0; t.num_machines];
        for &(r, v) in &rec.receivers {
            expect[r as usize] += v;
        }
        for (j, e) in expect.iter().enumerate() {
            assert!(rel_close(d.col_sum(j), *e, 1e-9), "coflow {} receiver {j}", rec.id);
        }
    }
}

#[test]
fn sampling_conserves_fully_selected_coflows() {
    // Six machines onto six ports: every machine is selected.
    let t = ingest_fb_trace(&fixture("fb_small.txt")).unwrap();
    for remap in [RemapPolicy::Redistribute, RemapPolicy::Drop] {
        let params = SamplingParams {
            num_ports: 6,
            num_coflows: 4,
            seed: 2,
            weights: WeightPolicy::UniformInteger { max: 4 },
            releases: ReleasePolicy::Trace { ms_per_unit: 10.0 },
            remap,
            perturbation: Perturbation::default(),
        };
        let inst = sample_instance(&t, &params, NetworkConfig::ocs(6, vec![1.0], 1.0)).unwrap();
        assert!(validate_instance(&inst).is_ok());
        for (c, rec) in inst.coflows.iter().zip(&t.records) {
            let v: f64 = rec.receivers.iter().map(|r| r.1).sum();
            assert!(rel_close(c.demand.total(), v, 1e-9));
            assert!(c.weight >= 1.0 && c.weight <= 4.0 && c.weight.fract() == 0.0);
        }
        let releases: Vec<f64> = inst.coflows.iter().map(|c| c.release).collect();
        assert_eq!(releases, vec![0.0, 13.0, 26.0, 100.0]);
    }
}

#[test]
fn sampling_defaults_and_limits() {
    let t = fb_like_trace(0);
    let cfg = NetworkConfig::ocs(10, vec![10.0, 20.0, 30.0], 8.0);
    let params = SamplingParams {
        num_ports: 10,
        num_coflows: 100,
        seed: 1,
        weights: WeightPolicy::Unit,
        releases: ReleasePolicy::Zero,
        remap: RemapPolicy::Redistribute,
        perturbation: Perturbation::default(),
    };
    let inst = sample_instance(&t, &params, cfg.clone()).unwrap();
    assert_eq!((inst.config.num_ports, inst.num_coflows()), (10, 100));
    assert!(inst.coflows.iter().all(|c| c.weight == 1.0 && c.release == 0.0 && !c.demand.is_zero()));
    let wide = SamplingParams { num_ports: 151, ..params };
    assert!(sample_instance(&t, &wide, NetworkConfig::ocs(151, vec![1.0], 1.0)).is_err());
    let empty = FbTrace { num_machines: 10, records: vec![] };
    assert!(sample_instance(&empty, &SamplingParams { num_coflows: 1, ..params }, cfg).is_err());
}

#[test]
fn synthetic_density_matches_expectation() {
    let (n, m, density) = (6usize, 10usize, 0.3);
    let trials = 50;
    let mut total = 0usize;
    for seed in 0..trials {
        let p = SynthParams {
            num_coflows: m,
            density,
            volume_min: 1.0,
            volume_max: 5.0,
            seed,
            weights: WeightPolicy::Unit,
            releases: SynthRelease::Uniform { max: 10.0 },
        };
        let inst = synth_generate(&p, NetworkConfig::ocs(n, vec![1.0, 2.0], 1.0)).unwrap();
        assert!(validate_instance(&inst).is_ok());
        total += inst.coflows.iter().map(|c| c.demand.nnz()).sum::<usize>();
    }
    let cells = (n * n * m) as f64 * trials as f64;
    let mean = cells * density;
    let sigma = (cells * density * (1.0 - density)).sqrt();
    assert!((total as f64 - mean).abs() <= 3.0 * sigma, "{total} vs {mean} ± {sigma}");
}
