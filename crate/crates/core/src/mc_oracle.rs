//! Seeded Monte Carlo sampling of network outputs and closed-loop
//! trajectories. Any sample that escapes a computed over-approximation is a
//! soundness bug in the engine.
//!
//! Sample `i` draws from its own ChaCha stream keyed by `(seed, i)`, so the
//! results do not depend on how the work is split across threads.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::closed_loop::{SafetySpec, Scenario};
use crate::error::{check_dim, ReachError, Result};
use crate::geometry::{BoxUnion, HyperBox};
use crate::network::{eval_network, NetworkModel};

/// States `x(t0) .. x(tf)` of one simulated run.
pub type Trajectory = Vec<Vec<f64>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleConfig {
    count: usize,
    seed: u64,
}

impl SampleConfig {
    pub fn new(count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(ReachError::InvalidArgument("sample count must be >= 1".into()));
        }
        Ok(Self { count, seed })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Generator for sample `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform point in `b`; point boxes yield their single point.
pub fn sample_box<R: Rng + ?Sized>(rng: &mut R, b: &HyperBox) -> Vec<f64> {
    b.intervals()
        .iter()
        .map(|iv| {
            if iv.is_point() {
                iv.lo()
            } else {
                rng.gen_range(iv.lo()..=iv.hi()).clamp(iv.lo(), iv.hi())
            }
        })
        .collect()
}

/// Picks a member box with probability proportional to its volume (or
/// uniformly when every member has zero volume).
struct UnionSampler<'a> {
    union: &'a BoxUnion,
    weights: Option<WeightedIndex<f64>>,
}

impl<'a> UnionSampler<'a> {
    fn new(union: &'a BoxUnion) -> Result<Self> {
        if union.is_empty() {
            return Err(ReachError::EmptySet("cannot sample an empty union"));
        }
        let volumes: Vec<f64> = union.iter().map(HyperBox::volume).collect();
        let weights = if volumes.iter().any(|&v| v > 0.0) {
            Some(WeightedIndex::new(&volumes).map_err(|e| {
                ReachError::InvalidArgument(format!("box volumes unusable as weights: {e}"))
            })?)
        } else {
            None
        };
        Ok(Self { union, weights })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = match &self.weights {
            Some(w) => w.sample(rng),
            None => rng.gen_range(0..self.union.len()),
        };
        sample_box(rng, &self.union.boxes()[k])
    }
}

/// `cfg.count` points drawn uniformly from the union `h`.
pub fn sample_union(h: &BoxUnion, cfg: &SampleConfig) -> Result<Vec<Vec<f64>>> {
    let sampler = UnionSampler::new(h)?;
    Ok((0..cfg.count as u64)
        .into_par_iter()
        .map(|i| sampler.sample(&mut stream_rng(cfg.seed, i)))
        .collect())
}

/// Network outputs at `cfg.count` inputs drawn uniformly from `h`.
pub fn sample_network_outputs(
    net: &NetworkModel,
    h: &BoxUnion,
    cfg: &SampleConfig,
) -> Result<Vec<Vec<f64>>> {
    check_dim("sampled input set", net.input_dim(), h.dim())?;
    sample_union(h, cfg)?
        .par_iter()
        .map(|x| eval_network(net, x))
        .collect()
}

/// Closed-loop runs with `x(t0)` uniform in the initial box and a fresh
/// exogenous input drawn every step.
pub fn simulate_trajectories(s: &Scenario, cfg: &SampleConfig) -> Result<Vec<Trajectory>> {
    (0..cfg.count as u64)
        .into_par_iter()
        .map(|i| simulate_one(s, &mut stream_rng(cfg.seed, i)))
        .collect()
}

fn simulate_one<R: Rng + ?Sized>(s: &Scenario, rng: &mut R) -> Result<Trajectory> {
    let plant = s.plant();
    let mut x = sample_box(rng, s.initial());
    let mut traj = Vec::with_capacity(s.horizon() + 1);
    for _ in 0..s.horizon() {
        let y = plant.output(&x);
        let v = s.disturbance().map(|b| sample_box(rng, b)).unwrap_or_default();
        let u = eval_network(s.controller(), &s.controller_input(&y, &v))?;
        let next = plant.next_state(&x, &u);
        traj.push(std::mem::replace(&mut x, next));
    }
    traj.push(x);
    Ok(traj)
}

/// A simulated state found inside an unsafe box.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub sample: usize,
    pub t: usize,
    pub unsafe_index: usize,
    pub state: Vec<f64>,
}

/// First sampled trajectory (in sample order) that enters the unsafe set.
pub fn falsify(
    s: &Scenario,
    spec: &SafetySpec,
    cfg: &SampleConfig,
) -> Result<Option<Counterexample>> {
    check_dim("unsafe region", s.plant().state_dim(), spec.unsafe_set().dim())?;
    let trajectories = simulate_trajectories(s, cfg)?;
    for (sample, traj) in trajectories.iter().enumerate() {
        for (t, x) in traj.iter().enumerate() {
            if let Some(k) = spec.unsafe_set().iter().position(|b| b.contains_point(x)) {
                return Ok(Some(Counterexample {
                    sample,
                    t,
                    unsafe_index: k,
                    state: x.clone(),
                }));
            }
        }
    }
    Ok(None)
}
