//! Discrete-time plants `x(t+1) = f(x(t), u(t))`, `y(t) = h(x(t))` and
//! their set-valued images over boxes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ReachError, Result};
use crate::geometry::{HyperBox, Interval};
use crate::network::ActivationKind;

/// A plant with pointwise maps and sound box images of those maps.
///
/// Implementations must guarantee `f(x, u) ∈ state_image(X, U)` whenever
/// `x ∈ X` and `u ∈ U`, and likewise for `output_image`. Callers go
/// through [`reach_ode_x`], [`reach_ode_y`] and [`step_plant`], which check
/// dimensions before delegating.
pub trait PlantModel: fmt::Debug + Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    fn next_state(&self, x: &[f64], u: &[f64]) -> Vec<f64>;
    fn output(&self, x: &[f64]) -> Vec<f64>;

    fn state_image(&self, x: &HyperBox, u: &HyperBox) -> Result<HyperBox>;
    fn output_image(&self, x: &HyperBox) -> Result<HyperBox>;
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 {
            return Err(ReachError::InvalidArgument("matrix must be non-empty".into()));
        }
        for r in &rows {
            check_dim("matrix row length", m, r.len())?;
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ReachError::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(Self { rows: n, cols: m, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }
}

/// `x(t+1) = A x + B u`, `y = C x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPlant {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl LinearPlant {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        check_dim("A must be square", a.rows, a.cols)?;
        check_dim("B row count", a.rows, b.rows)?;
        check_dim("C column count", a.cols, c.cols)?;
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }
}

// Accumulation order here matches `interval_dot` term for term.
fn dot_into(acc: &mut f64, w: &[f64], x: &[f64]) {
    for (wj, xj) in w.iter().zip(x) {
        *acc += wj * xj;
    }
}

fn interval_dot_into(lo: &mut f64, hi: &mut f64, w: &[f64], b: &HyperBox) {
    for (&wj, iv) in w.iter().zip(b.intervals()) {
        if wj >= 0.0 {
            *lo += wj * iv.lo();
            *hi += wj * iv.hi();
        } else {
            *lo += wj * iv.hi();
            *hi += wj * iv.lo();
        }
    }
}

impl PlantModel for LinearPlant {
    fn state_dim(&self) -> usize {
        self.a.rows
    }

    fn input_dim(&self) -> usize {
        self.b.cols
    }

    fn output_dim(&self) -> usize {
        self.c.rows
    }

    fn next_state(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (0..self.a.rows)
            .map(|i| {
                let mut acc = 0.0;
                dot_into(&mut acc, self.a.row(i), x);
                dot_into(&mut acc, self.b.row(i), u);
                acc
            })
            .collect()
    }

    fn output(&self, x: &[f64]) -> Vec<f64> {
        (0..self.c.rows)
            .map(|i| {
                let mut acc = 0.0;
                dot_into(&mut acc, self.c.row(i), x);
                acc
            })
            .collect()
    }

    fn state_image(&self, x: &HyperBox, u: &HyperBox) -> Result<HyperBox> {
        let dims = (0..self.a.rows)
            .map(|i| {
                let (mut lo, mut hi) = (0.0, 0.0);
                interval_dot_into(&mut lo, &mut hi, self.a.row(i), x);
                interval_dot_into(&mut lo, &mut hi, self.b.row(i), u);
                Interval::new(lo, hi)
            })
            .collect::<Result<Vec<_>>>()?;
        HyperBox::new(dims)
    }

    fn output_image(&self, x: &HyperBox) -> Result<HyperBox> {
        let dims = (0..self.c.rows)
            .map(|i| {
                let (mut lo, mut hi) = (0.0, 0.0);
                interval_dot_into(&mut lo, &mut hi, self.c.row(i), x);
                Interval::new(lo, hi)
            })
            .collect::<Result<Vec<_>>>()?;
        HyperBox::new(dims)
    }
}

/// Scalar expression over state `x` and input `u`, with a natural interval
/// extension.
///
/// Serialized externally tagged, e.g.
/// `{"add": [{"state": 0}, {"mul": [{"const": 0.1}, {"input": 0}]}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expr {
    Const(f64),
    State(usize),
    Input(usize),
    Neg(Box<Expr>),
    Sqr(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Apply(ActivationKind, Box<Expr>),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn x(i: usize) -> Expr {
        Expr::State(i)
    }

    pub fn u(i: usize) -> Expr {
        Expr::Input(i)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn sqr(a: Expr) -> Expr {
        Expr::Sqr(Box::new(a))
    }

    pub fn apply(kind: ActivationKind, a: Expr) -> Expr {
        Expr::Apply(kind, Box::new(a))
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::State(i) => x[*i],
            Expr::Input(i) => u[*i],
            Expr::Neg(a) => -a.eval(x, u),
            Expr::Sqr(a) => {
                let v = a.eval(x, u);
                v * v
            }
            Expr::Add(a, b) => a.eval(x, u) + b.eval(x, u),
            Expr::Sub(a, b) => a.eval(x, u) - b.eval(x, u),
            Expr::Mul(a, b) => a.eval(x, u) * b.eval(x, u),
            Expr::Apply(k, a) => k.eval(a.eval(x, u)),
        }
    }

    /// Natural interval extension over `x_set × u_set`.
    pub fn eval_box(&self, x: &HyperBox, u: Option<&HyperBox>) -> Result<Interval> {
        match self {
            Expr::Const(v) => Interval::point(*v),
            Expr::State(i) => Ok(x.interval(*i)),
            Expr::Input(i) => u
                .map(|b| b.interval(*i))
                .ok_or_else(|| ReachError::InvalidArgument("output map refers to an input".into())),
            Expr::Neg(a) => {
                let v = a.eval_box(x, u)?;
                Interval::new(-v.hi(), -v.lo())
            }
            Expr::Sqr(a) => {
                let v = a.eval_box(x, u)?;
                let (l2, h2) = (v.lo() * v.lo(), v.hi() * v.hi());
                if v.contains(0.0) {
                    Interval::new(0.0, l2.max(h2))
                } else {
                    Interval::new(l2.min(h2), l2.max(h2))
                }
            }
            Expr::Add(a, b) => {
                let (p, q) = (a.eval_box(x, u)?, b.eval_box(x, u)?);
                Interval::new(p.lo() + q.lo(), p.hi() + q.hi())
            }
            Expr::Sub(a, b) => {
                let (p, q) = (a.eval_box(x, u)?, b.eval_box(x, u)?);
                Interval::new(p.lo() - q.hi(), p.hi() - q.lo())
            }
            Expr::Mul(a, b) => {
                let (p, q) = (a.eval_box(x, u)?, b.eval_box(x, u)?);
                let corners = [
                    p.lo() * q.lo(),
                    p.lo() * q.hi(),
                    p.hi() * q.lo(),
                    p.hi() * q.hi(),
                ];
                let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Interval::new(lo, hi)
            }
            Expr::Apply(k, a) => k.image(a.eval_box(x, u)?),
        }
    }

    fn max_indices(&self) -> (Option<usize>, Option<usize>) {
        let join = |(a, b): (Option<usize>, Option<usize>), (c, d): (Option<usize>, Option<usize>)| {
            (a.max(c), b.max(d))
        };
        match self {
            Expr::Const(_) => (None, None),
            Expr::State(i) => (Some(*i), None),
            Expr::Input(i) => (None, Some(*i)),
            Expr::Neg(a) | Expr::Sqr(a) | Expr::Apply(_, a) => a.max_indices(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                join(a.max_indices(), b.max_indices())
            }
        }
    }
}

/// Nonlinear plant whose maps are given as [`Expr`] trees; the interval
/// images come from the natural interval extension.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprPlant {
    input_dim: usize,
    state: Vec<Expr>,
    output: Vec<Expr>,
}

impl ExprPlant {
    pub fn new(input_dim: usize, state: Vec<Expr>, output: Vec<Expr>) -> Result<Self> {
        let n = state.len();
        if n == 0 || output.is_empty() || input_dim == 0 {
            return Err(ReachError::InvalidArgument(
                "plant needs state, input and output dimensions >= 1".into(),
            ));
        }
        for e in &state {
            let (xs, us) = e.max_indices();
            check_index("state variable", xs, n)?;
            check_index("input variable", us, input_dim)?;
        }
        for e in &output {
            let (xs, us) = e.max_indices();
            check_index("state variable", xs, n)?;
            if us.is_some() {
                return Err(ReachError::InvalidArgument(
                    "output map must not depend on the input".into(),
                ));
            }
        }
        Ok(Self {
            input_dim,
            state,
            output,
        })
    }

    pub fn state_exprs(&self) -> &[Expr] {
        &self.state
    }

    pub fn output_exprs(&self) -> &[Expr] {
        &self.output
    }
}

fn check_index(what: &str, max: Option<usize>, bound: usize) -> Result<()> {
    match max {
        Some(i) if i >= bound => Err(ReachError::InvalidArgument(format!(
            "{what} index {i} out of range (dimension {bound})"
        ))),
        _ => Ok(()),
    }
}

impl PlantModel for ExprPlant {
    fn state_dim(&self) -> usize {
        self.state.len()
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output.len()
    }

    fn next_state(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.state.iter().map(|e| e.eval(x, u)).collect()
    }

    fn output(&self, x: &[f64]) -> Vec<f64> {
        self.output.iter().map(|e| e.eval(x, &[])).collect()
    }

    fn state_image(&self, x: &HyperBox, u: &HyperBox) -> Result<HyperBox> {
        HyperBox::new(
            self.state
                .iter()
                .map(|e| e.eval_box(x, Some(u)))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    fn output_image(&self, x: &HyperBox) -> Result<HyperBox> {
        HyperBox::new(
            self.output
                .iter()
                .map(|e| e.eval_box(x, None))
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

/// Names accepted by [`named_plant`].
pub const NAMED_PLANTS: [&str; 2] = ["van_der_pol", "saturated_double_integrator"];

/// Built-in forward-Euler discretized plants.
///
/// * `van_der_pol` (`dt` = 0.05, `mu` = 1): `x1' = x1 + dt x2`,
///   `x2' = x2 + dt (mu (1 - x1^2) x2 - x1 + u)`, `y = x1`.
/// * `saturated_double_integrator` (`dt` = 0.1): `x1' = x1 + dt x2`,
///   `x2' = x2 + dt tanh(u)`, `y = (x1, x2)`.
pub fn named_plant(name: &str, params: &BTreeMap<String, f64>) -> Result<ExprPlant> {
    let param = |key: &str, default: f64, allowed: &[&str]| -> Result<f64> {
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(ReachError::InvalidArgument(format!(
                "plant `{name}` has no parameter `{k}`"
            )));
        }
        let v = params.get(key).copied().unwrap_or(default);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ReachError::InvalidArgument(format!("parameter `{key}` must be finite")))
        }
    };
    match name {
        "van_der_pol" => {
            let dt = param("dt", 0.05, &["dt", "mu"])?;
            let mu = param("mu", 1.0, &["dt", "mu"])?;
            let damping = Expr::mul(
                Expr::mul(Expr::c(mu), Expr::sub(Expr::c(1.0), Expr::sqr(Expr::x(0)))),
                Expr::x(1),
            );
            let accel = Expr::add(Expr::sub(damping, Expr::x(0)), Expr::u(0));
            ExprPlant::new(
                1,
                vec![
                    Expr::add(Expr::x(0), Expr::mul(Expr::c(dt), Expr::x(1))),
                    Expr::add(Expr::x(1), Expr::mul(Expr::c(dt), accel)),
                ],
                vec![Expr::x(0)],
            )
        }
        "saturated_double_integrator" => {
            let dt = param("dt", 0.1, &["dt"])?;
            ExprPlant::new(
                1,
                vec![
                    Expr::add(Expr::x(0), Expr::mul(Expr::c(dt), Expr::x(1))),
                    Expr::add(
                        Expr::x(1),
                        Expr::mul(Expr::c(dt), Expr::apply(ActivationKind::Tanh, Expr::u(0))),
                    ),
                ],
                vec![Expr::x(0), Expr::x(1)],
            )
        }
        other => Err(ReachError::InvalidArgument(format!(
            "unknown plant `{other}` (known: {})",
            NAMED_PLANTS.join(", ")
        ))),
    }
}

/// Box containing `{f(x, u) : x ∈ x_set, u ∈ u_set}`.
pub fn reach_ode_x(plant: &dyn PlantModel, u_set: &HyperBox, x_set: &HyperBox) -> Result<HyperBox> {
    check_dim("reach_ode_x state set", plant.state_dim(), x_set.dim())?;
    check_dim("reach_ode_x input set", plant.input_dim(), u_set.dim())?;
    plant.state_image(x_set, u_set)
}

/// Box containing `{h(x) : x ∈ x_set}`.
pub fn reach_ode_y(plant: &dyn PlantModel, x_set: &HyperBox) -> Result<HyperBox> {
    check_dim("reach_ode_y state set", plant.state_dim(), x_set.dim())?;
    plant.output_image(x_set)
}

/// One pointwise step: returns `(f(x, u), h(x))`.
pub fn step_plant(plant: &dyn PlantModel, x: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim("step_plant state", plant.state_dim(), x.len())?;
    check_dim("step_plant input", plant.input_dim(), u.len())?;
    Ok((plant.next_state(x, u), plant.output(x)))
}
