mod common;

use common::{random_instance, rel_close, Shape};
use ocsched::harness::{run_scheme_with, Scheme};
use ocsched::lp::{audit_solution, build_lp, certified_lower_bound, solve_instance, SolverKind, FEASIBILITY_TOL};
use ocsched::model::{Coflow, Instance};

fn scaled(inst: &Instance, c: f64, scale_delay: bool) -> Instance {
    let mut config = inst.config.clone();
    if scale_delay {
        config.reconfig_delay *= c;
    }
    let coflows = inst
        .coflows
        .iter()
        .map(|cf| Coflow::new(cf.id.0, cf.demand.scaled(c), cf.weight, cf.release * c))
        .collect();
    Instance::new(config, coflows)
}

#[test]
fn lower_bound_dominates_every_scheme() {
    for seed in 0..200 {
        let inst = random_instance(seed, Shape { max_coflows: 8, eps: seed % 4 == 0, ..Shape::default() });
        let lp = solve_instance(&inst).unwrap();
        let bound = certified_lower_bound(&lp).unwrap();
        for s in Scheme::ALL {
            let run = run_scheme_with(&inst, s, Some(&lp)).unwrap();
            assert!(bound <= run.result.objective * (1.0 + 1e-6), "seed {seed} {s}: {bound} > {}", run.result.objective);
        }
    }
}

#[test]
fn solutions_pass_the_constraint_audit() {
    for seed in 0..100 {
        let inst = random_instance(seed, Shape { max_coflows: 10, ..Shape::default() });
        let lp = build_lp(&inst).unwrap();
        let sol = SolverKind::RowGen.solve(&lp).unwrap();
        let bad = audit_solution(&lp, &sol, FEASIBILITY_TOL);
        assert!(bad.is_empty(), "seed {seed}: {bad:?}");
    }
}

#[test]
fn backends_agree() {
    for seed in 0..60 {
        let inst = random_instance(seed, Shape { max_coflows: 5, max_ports: 4, ..Shape::default() });
        let lp = build_lp(&inst).unwrap();
        let a = SolverKind::RowGen.solve(&lp).unwrap().objective;
        let b = SolverKind::DenseTableau.solve(&lp).unwrap().objective;
        assert!(rel_close(a, b, 1e-6), "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn scale_covariance() {
    for seed in 0..50 {
        let eps = seed % 2 == 0;
        let inst = random_instance(seed, Shape { max_coflows: 6, eps, ..Shape::default() });
        let c = 2.5;
        let base = solve_instance(&inst).unwrap();
        let big = solve_instance(&scaled(&inst, c, !eps)).unwrap();
        assert!(rel_close(big.objective, c * base.objective, 1e-6), "seed {seed}");
    }
}

#[test]
fn zero_demand_bound_is_weighted_release_sum() {
    let mut inst = random_instance(3, Shape::default());
    for c in &mut inst.coflows {
        c.demand = ocsched::model::DemandMatrix::zeros(inst.config.num_ports);
    }
    let sol = solve_instance(&inst).unwrap();
    let expect: f64 = inst.coflows.iter().map(|c| c.weight * c.release).sum();
    assert!(rel_close(sol.objective, expect, 1e-9));
}
