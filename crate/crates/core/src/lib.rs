//! Scheduling multiple coflows on a network of parallel optical circuit
//! switch cores: LP-guided coflow ordering, greedy per-flow core
//! allocation, a not-all-stop circuit simulator, baselines, metrics, trace
//! I/O and an experiment harness.

pub mod allocation;
pub mod bounds;
pub mod bvn;
pub mod guarantees;
pub mod harness;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod ordering;
pub mod sim;
pub mod trace;
