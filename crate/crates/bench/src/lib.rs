//! Workloads shared by the criterion benches.

use boxreach::fixtures;
use boxreach::{BoxUnion, NetworkModel, PartitionSpec, Scenario};

/// The 2-7-2 example network on the unit box.
pub fn mlp_workload() -> (NetworkModel, BoxUnion) {
    (fixtures::mlp_example(), fixtures::mlp_example_input())
}

pub fn grid(m: usize) -> PartitionSpec {
    PartitionSpec::uniform(2, m).expect("positive segment count")
}

pub fn closed_loop_workload(m: usize) -> Scenario {
    fixtures::closed_loop_example(m)
}
