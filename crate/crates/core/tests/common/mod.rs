#![allow(dead_code)]

use ocsched::model::{Coflow, DemandMatrix, Instance, NetworkConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of a random test instance.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_ports: usize,
    pub max_coflows: usize,
    pub max_cores: usize,
    pub eps: bool,
    pub releases: bool,
    pub weights: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Self { max_ports: 6, max_coflows: 6, max_cores: 3, eps: false, releases: true, weights: true }
    }
}

pub const DELAYS: [f64; 3] = [0.0, 1.0, 8.0];

pub fn random_instance(seed: u64, shape: Shape) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=shape.max_ports);
    let k = rng.gen_range(1..=shape.max_cores);
    let m = rng.gen_range(1..=shape.max_coflows);
    let rates: Vec<f64> = (0..k).map(|_| rng.gen_range(1..=6) as f64 * 5.0).collect();
    let config = if shape.eps {
        NetworkConfig::eps(n, rates)
    } else {
        NetworkConfig::ocs(n, rates, DELAYS[rng.gen_range(0..DELAYS.len())])
    };
    let density = rng.gen_range(0.1..0.7);
    let coflows = (0..m)
        .map(|c| {
            let mut d = DemandMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    if rng.gen_bool(density) {
                        d.set(i, j, rng.gen_range(1..=200) as f64 * 0.5);
                    }
                }
            }
            let w = if shape.weights { rng.gen_range(1..=5) as f64 } else { 1.0 };
            let a = if shape.releases && rng.gen_bool(0.5) { rng.gen_range(0..=40) as f64 } else { 0.0 };
            Coflow::new(c as u64, d, w, a)
        })
        .collect();
    Instance::new(config, coflows)
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, density: f64) -> DemandMatrix {
    let mut d = DemandMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if rng.gen_bool(density) {
                d.set(i, j, rng.gen_range(0.01..100.0));
            }
        }
    }
    d
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
