//! The two reference systems used throughout the tests, benches and the
//! shipped data files: a 2-7-2 tanh/linear network, and a 2-state linear
//! plant under a 2-5-1 tanh/linear controller.

use std::sync::Arc;

use crate::closed_loop::{SafetySpec, Scenario};
use crate::geometry::{BoxUnion, HyperBox, PartitionSpec};
use crate::network::{ActivationKind, Layer, NetworkModel};
use crate::plant::{LinearPlant, Matrix};

fn rows<const C: usize>(r: &[[f64; C]]) -> Vec<Vec<f64>> {
    r.iter().map(|row| row.to_vec()).collect()
}

fn transpose<const C: usize>(r: &[[f64; C]]) -> Vec<Vec<f64>> {
    (0..C).map(|j| r.iter().map(|row| row[j]).collect()).collect()
}

/// 2 inputs, 7 tanh hidden units, 2 linear outputs.
#[allow(clippy::approx_constant)] // 0.5236 is a printed weight
pub fn mlp_example() -> NetworkModel {
    let w1 = [
        [-1.0927, -0.9738],
        [0.0974, -1.6347],
        [-1.3900, 1.3535],
        [0.2311, 3.2967],
        [0.1067, -0.4837],
        [-0.1264, 0.3281],
        [0.8038, 0.5583],
    ];
    let b1 = vec![0.7752, -0.7823, -0.5119, 0.3074, -0.7417, 0.7618, 1.2038];
    // printed as a 7x2 matrix to be transposed
    let w2t = [
        [1.5441, -1.0941],
        [1.4009, -0.7114],
        [-0.9595, 0.5236],
        [-0.4089, -0.7377],
        [0.3599, -0.7392],
        [0.0068, 0.1388],
        [-0.2026, 0.0655],
    ];
    let b2 = vec![0.2315, -0.3555];
    NetworkModel::new(vec![
        Layer::new(rows(&w1), b1, ActivationKind::Tanh).expect("valid layer"),
        Layer::new(transpose(&w2t), b2, ActivationKind::Linear).expect("valid layer"),
    ])
    .expect("valid network")
}

/// Unit sup-norm ball in the plane, the input set for [`mlp_example`].
pub fn mlp_example_input() -> BoxUnion {
    BoxUnion::singleton(HyperBox::cube(&[0.0, 0.0], 1.0).expect("valid box"))
}

pub fn linear_plant_example() -> LinearPlant {
    LinearPlant::new(
        Matrix::from_rows(vec![vec![-0.6722, 0.0935], vec![-0.4011, 0.4969]]).expect("A"),
        Matrix::from_rows(vec![vec![0.4805], vec![-0.3911]]).expect("B"),
        Matrix::from_rows(vec![vec![-0.4625, 1.4874]]).expect("C"),
    )
    .expect("valid plant")
}

/// Controller `u = Phi(y, v)`: 2 inputs, 5 tanh hidden units, 1 linear output.
pub fn controller_example() -> NetworkModel {
    let w1 = [
        [0.8530, -1.0127],
        [-1.1751, -1.2403],
        [-0.4544, 0.2666],
        [-0.5061, -1.2078],
        [1.8037, -1.0501],
    ];
    let b1 = vec![0.7996, 1.6286, 0.1291, -2.0848, -0.6471];
    let w2 = vec![vec![0.4687, 0.2829, 1.3412, 0.3806, 1.4354]];
    NetworkModel::new(vec![
        Layer::new(rows(&w1), b1, ActivationKind::Tanh).expect("valid layer"),
        Layer::new(w2, vec![-0.2517], ActivationKind::Linear).expect("valid layer"),
    ])
    .expect("valid network")
}

/// Closed loop over steps 0..=10 from `||x - (2.5, 2.5)||_inf <= 0.5` with
/// `|v| <= 0.5`, gridding the controller input with `m` segments per axis
/// and splitting the state box into 4 segments per axis at each step.
pub fn closed_loop_example(m: usize) -> Scenario {
    Scenario::new(
        Arc::new(linear_plant_example()),
        controller_example(),
        HyperBox::cube(&[2.5, 2.5], 0.5).expect("valid box"),
        Some(HyperBox::cube(&[0.0], 0.5).expect("valid box")),
        10,
        PartitionSpec::uniform(2, m).expect("valid partition"),
    )
    .expect("consistent scenario")
    .with_state_split(4)
    .expect("valid split")
}

/// Unsafe region `||x - (-2.5, 2.5)||_inf <= 0.5`.
pub fn unsafe_example() -> SafetySpec {
    SafetySpec::new(BoxUnion::singleton(
        HyperBox::cube(&[-2.5, 2.5], 0.5).expect("valid box"),
    ))
}
