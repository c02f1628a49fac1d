//! Multi-layer perceptron model, pointwise evaluation and box propagation.
//!
//! A layer maps `eta` to `phi(W eta + theta)`. Over a box input the
//! pre-activation range of each neuron is computed exactly by choosing,
//! per weight sign, the lower or upper corner coordinate. The activation
//! is then applied to that range: monotone activations map endpoints to
//! endpoints, the Gaussian uses its four-case rule around the peak at 0.
//!
//! Pointwise evaluation and the bound formulas accumulate terms in the same
//! order (`theta` first, then `w_j * eta_j` for increasing `j`), so a point
//! inside a box always evaluates inside that box's bounds, rounding included.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ReachError, Result};
use crate::geometry::{interval_hull, partition_union, BoxUnion, HyperBox, Interval, PartitionSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    #[serde(alias = "poslin")]
    Relu,
    #[serde(alias = "logsig", alias = "sigmoid")]
    Logistic,
    #[serde(alias = "tansig")]
    Tanh,
    #[serde(alias = "purelin")]
    Linear,
    #[serde(alias = "radbas")]
    Gaussian,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 5] = [
        ActivationKind::Relu,
        ActivationKind::Logistic,
        ActivationKind::Tanh,
        ActivationKind::Linear,
        ActivationKind::Gaussian,
    ];

    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            ActivationKind::Relu => z.max(0.0),
            ActivationKind::Logistic => 1.0 / (1.0 + (-z).exp()),
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::Linear => z,
            ActivationKind::Gaussian => (-(z * z)).exp(),
        }
    }

    /// Whether the activation is monotone non-decreasing.
    pub fn is_monotone(self) -> bool {
        !matches!(self, ActivationKind::Gaussian)
    }

    /// Exact range of the activation over `z`.
    pub fn image(self, z: Interval) -> Result<Interval> {
        let (lo, hi) = (z.lo(), z.hi());
        match self {
            ActivationKind::Gaussian => gaussian_image(lo, hi),
            _ => Interval::new(self.eval(lo), self.eval(hi)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Logistic => "logistic",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Linear => "linear",
            ActivationKind::Gaussian => "gaussian",
        }
    }
}

/// Range of `exp(-z^2)` over `[lo, hi]`: increasing on `(-inf, 0]`,
/// decreasing on `[0, inf)`, peak 1 at the origin.
fn gaussian_image(lo: f64, hi: f64) -> Result<Interval> {
    let g = |z: f64| ActivationKind::Gaussian.eval(z);
    if hi <= 0.0 {
        Interval::new(g(lo), g(hi))
    } else if lo >= 0.0 {
        Interval::new(g(hi), g(lo))
    } else if lo + hi <= 0.0 {
        Interval::new(g(lo), 1.0)
    } else {
        Interval::new(g(hi), 1.0)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = ReachError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" | "poslin" => Ok(ActivationKind::Relu),
            "logistic" | "logsig" | "sigmoid" => Ok(ActivationKind::Logistic),
            "tanh" | "tansig" => Ok(ActivationKind::Tanh),
            "linear" | "purelin" => Ok(ActivationKind::Linear),
            "gaussian" | "radbas" => Ok(ActivationKind::Gaussian),
            _ => Err(ReachError::UnsupportedActivation(s.to_string())),
        }
    }
}

/// One fully connected layer: `rows x cols` weights stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: ActivationKind,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: ActivationKind) -> Result<Self> {
        let rows = weights.len();
        if rows == 0 {
            return Err(ReachError::InvalidArgument(
                "layer needs at least one neuron".into(),
            ));
        }
        let cols = weights[0].len();
        if cols == 0 {
            return Err(ReachError::InvalidArgument(
                "layer needs at least one input".into(),
            ));
        }
        for row in &weights {
            check_dim("weight row length", cols, row.len())?;
        }
        check_dim("bias length", rows, bias.len())?;
        let flat: Vec<f64> = weights.into_iter().flatten().collect();
        if flat.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(ReachError::InvalidArgument(
                "layer parameters must be finite".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            weights: flat,
            bias,
            activation,
        })
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.rows
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.cols..(i + 1) * self.cols]
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn eval(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_dim("layer input", self.cols, input.len())?;
        Ok((0..self.rows)
            .map(|i| self.activation.eval(affine(self.row(i), self.bias[i], input)))
            .collect())
    }
}

#[inline]
fn affine(w: &[f64], theta: f64, x: &[f64]) -> f64 {
    let mut acc = theta;
    for (wj, xj) in w.iter().zip(x) {
        acc += wj * xj;
    }
    acc
}

/// A feedforward network `phi_L o ... o phi_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    layers: Vec<Layer>,
}

impl NetworkModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(ReachError::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        for pair in layers.windows(2) {
            check_dim(
                "consecutive layer sizes",
                pair[0].output_dim(),
                pair[1].input_dim(),
            )?;
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }
}

pub fn eval_activation(kind: ActivationKind, z: f64) -> f64 {
    kind.eval(z)
}

pub fn eval_network(net: &NetworkModel, input: &[f64]) -> Result<Vec<f64>> {
    check_dim("network input", net.input_dim(), input.len())?;
    let mut current = input.to_vec();
    for layer in &net.layers {
        current = layer.eval(&current)?;
    }
    Ok(current)
}

/// Exact range of `w . eta + theta` over `b`.
pub fn affine_bounds(w_row: &[f64], theta: f64, b: &HyperBox) -> Result<Interval> {
    check_dim("affine_bounds", b.dim(), w_row.len())?;
    let mut lo = theta;
    let mut hi = theta;
    for (&w, iv) in w_row.iter().zip(b.intervals()) {
        if w >= 0.0 {
            lo += w * iv.lo();
            hi += w * iv.hi();
        } else {
            lo += w * iv.hi();
            hi += w * iv.lo();
        }
    }
    Interval::new(lo, hi)
}

/// Box enclosing `phi(W eta + theta)` for every `eta` in `in_box`.
pub fn layer_output_box(layer: &Layer, in_box: &HyperBox) -> Result<HyperBox> {
    check_dim("layer input box", layer.input_dim(), in_box.dim())?;
    let dims = (0..layer.output_dim())
        .map(|i| {
            let z = affine_bounds(layer.row(i), layer.bias[i], in_box)?;
            layer.activation.image(z)
        })
        .collect::<Result<Vec<_>>>()?;
    HyperBox::new(dims)
}

/// Pushes a single box through every layer.
pub fn propagate_box(net: &NetworkModel, input: &HyperBox) -> Result<HyperBox> {
    check_dim("network input box", net.input_dim(), input.dim())?;
    let mut current = input.clone();
    for layer in &net.layers {
        current = layer_output_box(layer, &current)?;
    }
    Ok(current)
}

/// Output-set over-approximation of `net` on `h`: grid the hull of `h`,
/// keep cells meeting `h`, propagate each cell. Output box `k` is tagged
/// with the grid index of its source cell.
pub fn reach_mlp(net: &NetworkModel, h: &BoxUnion, m: &PartitionSpec) -> Result<BoxUnion> {
    reach_mlp_padded(net, h, m, 0.0)
}

/// [`reach_mlp`] with every output box widened by `padding`.
pub fn reach_mlp_padded(
    net: &NetworkModel,
    h: &BoxUnion,
    m: &PartitionSpec,
    padding: f64,
) -> Result<BoxUnion> {
    check_dim("reach_mlp input set", net.input_dim(), h.dim())?;
    check_dim("reach_mlp partition", net.input_dim(), m.dim())?;
    let bounding = interval_hull(h)?;
    let cells = partition_union(h, &bounding, m)?;
    let outputs = cells
        .boxes()
        .par_iter()
        .map(|cell| propagate_box(net, cell)?.inflate(padding))
        .collect::<Result<Vec<_>>>()?;
    let sources = cells.sources().map(<[usize]>::to_vec).unwrap_or_default();
    BoxUnion::with_sources(outputs, sources)
}
