mod common;

use ocsched::bvn::{birkhoff_decompose, decompose, max_line_sum, stuff_matrix};
use ocsched::model::DemandMatrix;
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = DemandMatrix> {
    (1usize..=8)
        .prop_flat_map(|n| proptest::collection::vec(prop_oneof![3 => Just(0.0), 2 => 0.01f64..100.0], n * n))
        .prop_map(|v| {
            let n = (v.len() as f64).sqrt() as usize;
            let rows: Vec<Vec<f64>> = v.chunks(n).map(|r| r.to_vec()).collect();
            DemandMatrix::from_rows(&rows)
        })
        .prop_filter("nonzero", |d| !d.is_zero())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn stuffing_balances_every_line(d in matrix()) {
        let (s, pad) = stuff_matrix(&d).unwrap();
        let rho = max_line_sum(&d);
        prop_assert!(pad.entries().iter().all(|&v| v >= 0.0));
        for p in 0..d.n() {
            prop_assert!(common::rel_close(s.row_sum(p), rho, 1e-9));
            prop_assert!(common::rel_close(s.col_sum(p), rho, 1e-9));
        }
    }

    #[test]
    fn decomposition_reconstructs(d in matrix()) {
        let n = d.n();
        let dec = decompose(&d).unwrap();
        let stuffed = d.plus(&dec.stuffing);
        let back = dec.reconstruct(n);
        let rho = max_line_sum(&d);
        for (a, b) in back.entries().iter().zip(stuffed.entries()) {
            prop_assert!((a - b).abs() <= 1e-9 * rho, "{a} vs {b}");
        }
        prop_assert!(dec.terms.len() <= n * n + 2 - 2 * n, "{} terms for n={n}", dec.terms.len());
        let total: f64 = dec.terms.iter().map(|t| t.weight).sum();
        prop_assert!(common::rel_close(total, rho, 1e-9));
        for t in &dec.terms {
            prop_assert!(t.weight > 0.0);
            let mut seen = vec![false; n];
            for &j in &t.perm {
                prop_assert!(!seen[j]);
                seen[j] = true;
            }
        }
    }

    #[test]
    fn scaled_permutation_is_one_term(n in 1usize..=8, shift in 0usize..8, v in 0.5f64..50.0) {
        let mut d = DemandMatrix::zeros(n);
        for i in 0..n {
            d.set(i, (i + shift) % n, v);
        }
        let terms = birkhoff_decompose(&d).unwrap();
        prop_assert_eq!(terms.len(), 1);
        prop_assert_eq!(terms[0].weight, v);
    }
}
