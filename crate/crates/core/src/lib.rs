//! Sound reachability analysis with hyper-rectangles.
//!
//! * [`network`]: output-set over-approximation of feedforward networks by
//!   gridding the input set and propagating each cell layer by layer.
//! * [`closed_loop`]: reach tubes and safety verdicts for discrete-time
//!   plants driven by a network controller.
//! * [`mc_oracle`]: seeded simulation used to cross-check every estimate.
//! * [`io`]: network, scenario and report documents.

pub mod closed_loop;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod mc_oracle;
pub mod network;
pub mod plant;

pub use closed_loop::{
    check_tube, reach_nncs, verify_nncs, ReachStep, ReachTube, SafetySpec, Scenario, Verdict,
    Witness,
};
pub use error::{ReachError, Result};
pub use geometry::{
    boxes_intersect, cartesian_product, interval_hull, partition_box, partition_union,
    sampled_hausdorff_gap, BoxUnion, HyperBox, Interval, PartitionSpec,
};
pub use mc_oracle::{sample_network_outputs, simulate_trajectories, SampleConfig, Trajectory};
pub use network::{
    affine_bounds, eval_activation, eval_network, layer_output_box, reach_mlp, reach_mlp_padded,
    ActivationKind, Layer, NetworkModel,
};
pub use plant::{
    reach_ode_x, reach_ode_y, step_plant, ExprPlant, LinearPlant, Matrix, PlantModel,
};
