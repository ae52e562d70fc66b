mod common;

use common::{random_instance, Shape};
use ocsched::allocation::{greedy_allocate, load_only_allocate};
use ocsched::guarantees::{allocation_prefix, prefix_stats};
use ocsched::model::NetworkConfig;
use ocsched::ordering::{wspt_order, CoflowOrder};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn conservation_and_no_split(seed in any::<u64>()) {
        let inst = random_instance(seed, Shape::default());
        let order = wspt_order(&inst);
        for alloc in [greedy_allocate(&inst, &order).unwrap(), load_only_allocate(&inst, &order).unwrap()] {
            prop_assert!(alloc.check(&inst).is_ok());
            prop_assert_eq!(alloc.flows.iter().map(Vec::len).sum::<usize>(), inst.num_flows());
        }
    }

    #[test]
    fn allocation_prefix_bound(seed in any::<u64>()) {
        let inst = random_instance(seed, Shape { max_cores: 5, ..Shape::default() });
        let alloc = greedy_allocate(&inst, &wspt_order(&inst)).unwrap();
        let breaches = allocation_prefix(&inst, &alloc);
        prop_assert!(breaches.is_empty(), "{:?}", breaches);
    }

    #[test]
    fn allocation_is_deterministic(seed in any::<u64>()) {
        let inst = random_instance(seed, Shape::default());
        let order = CoflowOrder::identity(inst.num_coflows());
        prop_assert_eq!(greedy_allocate(&inst, &order).unwrap(), greedy_allocate(&inst, &order).unwrap());
    }

    #[test]
    fn single_core_takes_everything(seed in any::<u64>()) {
        let mut inst = random_instance(seed, Shape::default());
        inst.config.core_rates.truncate(1);
        let alloc = greedy_allocate(&inst, &wspt_order(&inst)).unwrap();
        prop_assert!(alloc.flows.iter().flatten().all(|f| f.core == 0));
    }

    #[test]
    fn zero_delay_makes_load_only_identical(seed in any::<u64>()) {
        let mut inst = random_instance(seed, Shape::default());
        inst.config = NetworkConfig::ocs(inst.config.num_ports, inst.config.core_rates.clone(), 0.0);
        let order = wspt_order(&inst);
        let a = greedy_allocate(&inst, &order).unwrap();
        let b = load_only_allocate(&inst, &order).unwrap();
        prop_assert_eq!(a.flows, b.flows);
    }
}

#[test]
fn prefix_stats_accumulate() {
    let inst = random_instance(11, Shape::default());
    let order: Vec<usize> = (0..inst.num_coflows()).collect();
    let stats = prefix_stats(&inst, &order);
    for w in stats.windows(2) {
        assert!(w[1].max_load >= w[0].max_load && w[1].max_count >= w[0].max_count);
    }
}
