//! Reach tubes for a plant closed under a network controller, and safety
//! checks of those tubes against unsafe boxes.
//!
//! At each step the state set is a single box. That box is cut into a
//! uniform grid of `state_split` segments per state axis. For every piece,
//! the output image is stacked with the exogenous input box, the
//! controller's output union is computed over that stacked box, and the
//! union's interval hull drives the plant from that piece. The next state
//! box is the hull of the pieces' images.
//!
//! With `state_split = 1` the control box is decoupled from the whole state
//! box and the tube can blow up through the wrapping effect; a few segments
//! per axis keep the control input tied to the part of the state that
//! produced it.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{check_dim, ReachError, Result};
use crate::geometry::{
    boxes_intersect, cartesian_product, interval_hull, partition_box, BoxUnion, HyperBox,
    PartitionSpec,
};
use crate::network::{reach_mlp_padded, NetworkModel};
use crate::plant::{reach_ode_x, reach_ode_y, PlantModel};

/// Closed-loop reachability problem.
///
/// The controller sees `eta = [y; v]`: the plant output followed by the
/// exogenous input `v` drawn from `disturbance` (when present).
#[derive(Clone)]
pub struct Scenario {
    plant: Arc<dyn PlantModel>,
    controller: NetworkModel,
    initial: HyperBox,
    disturbance: Option<HyperBox>,
    horizon: usize,
    partition: PartitionSpec,
    padding: f64,
    state_split: usize,
}

impl Scenario {
    pub fn new(
        plant: Arc<dyn PlantModel>,
        controller: NetworkModel,
        initial: HyperBox,
        disturbance: Option<HyperBox>,
        horizon: usize,
        partition: PartitionSpec,
    ) -> Result<Self> {
        check_dim("initial set", plant.state_dim(), initial.dim())?;
        let v_dim = disturbance.as_ref().map_or(0, HyperBox::dim);
        check_dim(
            "controller input (plant outputs + exogenous inputs)",
            plant.output_dim() + v_dim,
            controller.input_dim(),
        )?;
        check_dim("controller output", plant.input_dim(), controller.output_dim())?;
        check_dim("partition", controller.input_dim(), partition.dim())?;
        Ok(Self {
            plant,
            controller,
            initial,
            disturbance,
            horizon,
            partition,
            padding: 0.0,
            state_split: 1,
        })
    }

    /// Widens every controller output box and every propagated state box
    /// by `eps`.
    pub fn with_padding(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(ReachError::InvalidArgument(format!(
                "padding must be finite and non-negative, got {eps}"
            )));
        }
        self.padding = eps;
        Ok(self)
    }

    pub fn with_partition(mut self, partition: PartitionSpec) -> Result<Self> {
        check_dim("partition", self.controller.input_dim(), partition.dim())?;
        self.partition = partition;
        Ok(self)
    }

    /// Segments per state axis used to split the state box at each step.
    pub fn with_state_split(mut self, segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(ReachError::InvalidArgument("state split must be >= 1".into()));
        }
        PartitionSpec::uniform(self.plant.state_dim(), segments)?.cell_count()?;
        self.state_split = segments;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn plant(&self) -> &dyn PlantModel {
        self.plant.as_ref()
    }

    pub fn controller(&self) -> &NetworkModel {
        &self.controller
    }

    pub fn initial(&self) -> &HyperBox {
        &self.initial
    }

    pub fn disturbance(&self) -> Option<&HyperBox> {
        self.disturbance.as_ref()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn partition(&self) -> &PartitionSpec {
        &self.partition
    }

    pub fn padding(&self) -> f64 {
        self.padding
    }

    pub fn state_split(&self) -> usize {
        self.state_split
    }

    /// Controller input for plant output `y` and exogenous input `v`.
    pub fn controller_input(&self, y: &[f64], v: &[f64]) -> Vec<f64> {
        let mut eta = Vec::with_capacity(y.len() + v.len());
        eta.extend_from_slice(y);
        eta.extend_from_slice(v);
        eta
    }
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("plant", &self.plant)
            .field("controller_layers", &self.controller.layers().len())
            .field("initial", &self.initial)
            .field("disturbance", &self.disturbance)
            .field("horizon", &self.horizon)
            .field("partition", &self.partition)
            .field("padding", &self.padding)
            .field("state_split", &self.state_split)
            .finish()
    }
}

/// Sets computed at one time step. The controller fields are `None` at
/// the final step, where no further control is applied.
///
/// `controller` holds the output boxes of every state piece in piece
/// order. Its source ids are `piece * cells_per_piece + cell`, where `cell`
/// indexes the controller-input grid of that piece.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachStep {
    pub t: usize,
    pub state: HyperBox,
    pub output: HyperBox,
    pub controller: Option<BoxUnion>,
    pub control_hull: Option<HyperBox>,
}

impl ReachStep {
    pub fn cell_count(&self) -> usize {
        self.controller.as_ref().map_or(0, BoxUnion::len)
    }
}

#[derive(Clone, Debug)]
pub struct ReachTube {
    steps: Vec<ReachStep>,
    step_times: Vec<Duration>,
}

impl ReachTube {
    pub fn steps(&self) -> &[ReachStep] {
        &self.steps
    }

    /// Wall-clock time spent producing each step.
    pub fn step_times(&self) -> &[Duration] {
        &self.step_times
    }

    pub fn state_boxes(&self) -> impl Iterator<Item = &HyperBox> {
        self.steps.iter().map(|s| &s.state)
    }

    /// The union of state boxes over the whole horizon.
    pub fn reach_set(&self) -> BoxUnion {
        BoxUnion::new(self.state_boxes().cloned().collect()).expect("tube has at least one step")
    }

    /// Whether `trajectory[t]` lies in the state box of step `t` for every
    /// step of the tube.
    pub fn contains_trajectory(&self, trajectory: &[Vec<f64>]) -> bool {
        trajectory.len() == self.steps.len()
            && self
                .steps
                .iter()
                .zip(trajectory)
                .all(|(s, x)| s.state.contains_point(x))
    }

    /// Per-step containment of every state box in `outer`'s.
    pub fn nested_in(&self, outer: &ReachTube) -> bool {
        self.steps.len() == outer.steps.len()
            && self
                .steps
                .iter()
                .zip(&outer.steps)
                .all(|(a, b)| b.state.contains_box(&a.state))
    }
}

/// Unsafe region as a union of boxes in state space.
#[derive(Clone, Debug, PartialEq)]
pub struct SafetySpec {
    unsafe_set: BoxUnion,
}

impl SafetySpec {
    pub fn new(unsafe_set: BoxUnion) -> Self {
        Self { unsafe_set }
    }

    /// No unsafe states at all.
    pub fn unrestricted(dim: usize) -> Self {
        Self {
            unsafe_set: BoxUnion::empty(dim),
        }
    }

    pub fn unsafe_set(&self) -> &BoxUnion {
        &self.unsafe_set
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub t: usize,
    pub state: HyperBox,
    pub unsafe_index: usize,
    pub unsafe_box: HyperBox,
}

/// `Safe` is a proof; `Uncertain` only says the over-approximation touches
/// the unsafe region.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Safe,
    Uncertain(Vec<Witness>),
}

impl Verdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, Verdict::Safe)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Safe => "SAFE",
            Verdict::Uncertain(_) => "UNCERTAIN",
        }
    }

    pub fn witnesses(&self) -> &[Witness] {
        match self {
            Verdict::Safe => &[],
            Verdict::Uncertain(w) => w,
        }
    }
}

/// Computes the reach tube over steps `0..=horizon`.
pub fn reach_nncs(s: &Scenario) -> Result<ReachTube> {
    let plant = s.plant();
    let mut steps = Vec::with_capacity(s.horizon + 1);
    let mut step_times = Vec::with_capacity(s.horizon + 1);
    let mut state = s.initial.clone();
    for t in 0..=s.horizon {
        let started = Instant::now();
        let output = reach_ode_y(plant, &state)?;
        if t == s.horizon {
            steps.push(ReachStep {
                t,
                state,
                output,
                controller: None,
                control_hull: None,
            });
            step_times.push(started.elapsed());
            break;
        }
        let pieces = if s.state_split == 1 {
            BoxUnion::singleton(state.clone())
        } else {
            partition_box(&state, &PartitionSpec::uniform(state.dim(), s.state_split)?)?
        };
        let cells_per_piece = s.partition.cell_count()?;
        let mut boxes = Vec::new();
        let mut sources = Vec::new();
        let mut images = Vec::with_capacity(pieces.len());
        for (k, piece) in pieces.iter().enumerate() {
            let y = reach_ode_y(plant, piece)?;
            let eta = match &s.disturbance {
                Some(v) => cartesian_product(&y, v),
                None => y,
            };
            let u = reach_mlp_padded(&s.controller, &BoxUnion::singleton(eta), &s.partition, s.padding)?;
            images.push(reach_ode_x(plant, &interval_hull(&u)?, piece)?);
            let src = u.sources().expect("grid cells carry sources");
            sources.extend(src.iter().map(|c| k * cells_per_piece + c));
            boxes.extend(u.boxes().iter().cloned());
        }
        let controller = BoxUnion::with_sources(boxes, sources)?;
        let control_hull = interval_hull(&controller)?;
        let next = interval_hull(&BoxUnion::new(images)?)?.inflate(s.padding)?;
        steps.push(ReachStep {
            t,
            state: std::mem::replace(&mut state, next),
            output,
            controller: Some(controller),
            control_hull: Some(control_hull),
        });
        step_times.push(started.elapsed());
    }
    Ok(ReachTube { steps, step_times })
}

/// Checks every state box of `tube` against every unsafe box.
pub fn check_tube(tube: &ReachTube, spec: &SafetySpec) -> Result<Verdict> {
    let mut witnesses = Vec::new();
    for step in &tube.steps {
        check_dim("unsafe region", step.state.dim(), spec.unsafe_set.dim())?;
        for (k, bad) in spec.unsafe_set.iter().enumerate() {
            if boxes_intersect(&step.state, bad)? {
                witnesses.push(Witness {
                    t: step.t,
                    state: step.state.clone(),
                    unsafe_index: k,
                    unsafe_box: bad.clone(),
                });
            }
        }
    }
    Ok(if witnesses.is_empty() {
        Verdict::Safe
    } else {
        Verdict::Uncertain(witnesses)
    })
}

pub fn verify_nncs(s: &Scenario, spec: &SafetySpec) -> Result<Verdict> {
    check_dim("unsafe region", s.plant.state_dim(), spec.unsafe_set.dim())?;
    check_tube(&reach_nncs(s)?, spec)
}
