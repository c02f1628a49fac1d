//! JSON documents for networks, scenarios and reports, plus the columnar
//! text tables used for plotting.
//!
//! Numbers are written in shortest round-trip decimal form, so a parsed and
//! re-serialized document keeps every value bit for bit. Shape errors are
//! raised while deserializing and carry the line and column of the
//! offending value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed_loop::{ReachTube, SafetySpec, Scenario, Verdict};
use crate::error::ReachError;
use crate::geometry::{BoxUnion, HyperBox, PartitionSpec};
use crate::network::{ActivationKind, Layer, NetworkModel};
use crate::plant::{named_plant, Expr, ExprPlant, LinearPlant, Matrix, PlantModel};

pub const NETWORK_FORMAT: &str = "boxreach-network/1";
pub const SCENARIO_FORMAT: &str = "boxreach-scenario/1";
pub const REPORT_SCHEMA: &str = "boxreach-report/1";
pub const TOOL_NAME: &str = "boxreach";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: ReachError,
    },
}

impl FormatError {
    fn parse(path: &Path, err: serde_json::Error) -> Self {
        FormatError::Parse {
            path: path.to_path_buf(),
            line: err.line(),
            column: err.column(),
            message: strip_position(&err.to_string()),
        }
    }

    fn invalid(path: &Path, source: ReachError) -> Self {
        FormatError::Invalid {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn read(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn expect_format(found: &str, expected: &str) -> Result<(), String> {
    if found == expected {
        Ok(())
    } else {
        Err(format!("unsupported format `{found}`, expected `{expected}`"))
    }
}

/// Indented JSON with every array of scalars kept on one line, so a weight
/// row or a box interval reads as a single line.
fn to_pretty<T: Serialize>(doc: &T) -> String {
    let value = serde_json::to_value(doc).expect("documents always serialize");
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out
}

fn write_value(out: &mut String, v: &serde_json::Value, depth: usize) {
    use serde_json::Value;
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Array(items) if items.iter().all(|x| !x.is_array() && !x.is_object()) => {
            let parts: Vec<String> = items.iter().map(Value::to_string).collect();
            let _ = write!(out, "[{}]", parts.join(", "));
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, x) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, x, depth + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (k, (key, x)) in map.iter().enumerate() {
                pad(out, depth + 1);
                let _ = write!(out, "{}: ", Value::String(key.clone()));
                write_value(out, x, depth + 1);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

// ---------------------------------------------------------------------------
// networks

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayer")]
pub struct LayerDoc {
    pub activation: ActivationKind,
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    activation: ActivationKind,
    rows: usize,
    cols: usize,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl TryFrom<RawLayer> for LayerDoc {
    type Error = String;

    fn try_from(raw: RawLayer) -> Result<Self, String> {
        if raw.weights.len() != raw.rows {
            return Err(format!(
                "layer declares {} rows but has {} weight rows",
                raw.rows,
                raw.weights.len()
            ));
        }
        if let Some((i, row)) = raw.weights.iter().enumerate().find(|(_, r)| r.len() != raw.cols) {
            return Err(format!(
                "weight row {i} has {} entries, layer declares {} columns",
                row.len(),
                raw.cols
            ));
        }
        if raw.bias.len() != raw.rows {
            return Err(format!(
                "bias has {} entries, layer declares {} rows",
                raw.bias.len(),
                raw.rows
            ));
        }
        Ok(LayerDoc {
            activation: raw.activation,
            rows: raw.rows,
            cols: raw.cols,
            weights: raw.weights,
            bias: raw.bias,
        })
    }
}

/// On-disk network: explicit dimensions, row-major weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork")]
pub struct NetworkDoc {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub input_dim: usize,
    pub output_dim: usize,
    pub layers: Vec<LayerDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    format: String,
    #[serde(default)]
    name: Option<String>,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<LayerDoc>,
}

impl TryFrom<RawNetwork> for NetworkDoc {
    type Error = String;

    fn try_from(raw: RawNetwork) -> Result<Self, String> {
        expect_format(&raw.format, NETWORK_FORMAT)?;
        let first = raw.layers.first().ok_or("network has no layers")?;
        if first.cols != raw.input_dim {
            return Err(format!(
                "input_dim is {} but the first layer takes {} inputs",
                raw.input_dim, first.cols
            ));
        }
        for (k, pair) in raw.layers.windows(2).enumerate() {
            if pair[0].rows != pair[1].cols {
                return Err(format!(
                    "layer {} outputs {} values but layer {} takes {}",
                    k,
                    pair[0].rows,
                    k + 1,
                    pair[1].cols
                ));
            }
        }
        let last = raw.layers.last().expect("non-empty");
        if last.rows != raw.output_dim {
            return Err(format!(
                "output_dim is {} but the last layer produces {}",
                raw.output_dim, last.rows
            ));
        }
        Ok(NetworkDoc {
            format: raw.format,
            name: raw.name,
            input_dim: raw.input_dim,
            output_dim: raw.output_dim,
            layers: raw.layers,
        })
    }
}

impl NetworkDoc {
    pub fn from_model(net: &NetworkModel, name: Option<String>) -> Self {
        NetworkDoc {
            format: NETWORK_FORMAT.to_string(),
            name,
            input_dim: net.input_dim(),
            output_dim: net.output_dim(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerDoc {
                    activation: l.activation(),
                    rows: l.output_dim(),
                    cols: l.input_dim(),
                    weights: l.weight_rows(),
                    bias: l.bias().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<NetworkModel, ReachError> {
        NetworkModel::new(
            self.layers
                .iter()
                .map(|l| Layer::new(l.weights.clone(), l.bias.clone(), l.activation))
                .collect::<Result<Vec<_>, _>>()?,
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, FormatError> {
        let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| FormatError::parse(path, e))?;
        doc.to_model().map_err(|e| FormatError::invalid(path, e))?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        to_pretty(self)
    }
}

pub fn load_network(path: &Path) -> Result<(NetworkDoc, NetworkModel), FormatError> {
    let doc = NetworkDoc::parse(&read(path)?, path)?;
    let model = doc.to_model().map_err(|e| FormatError::invalid(path, e))?;
    Ok((doc, model))
}

// ---------------------------------------------------------------------------
// scenarios

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PlantDoc {
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
    },
    Named {
        name: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        params: BTreeMap<String, f64>,
    },
    Expr {
        inputs: usize,
        state: Vec<Expr>,
        output: Vec<Expr>,
    },
}

impl PlantDoc {
    pub fn to_model(&self) -> Result<Arc<dyn PlantModel>, ReachError> {
        Ok(match self {
            PlantDoc::Linear { a, b, c } => Arc::new(LinearPlant::new(
                Matrix::from_rows(a.clone())?,
                Matrix::from_rows(b.clone())?,
                Matrix::from_rows(c.clone())?,
            )?),
            PlantDoc::Named { name, params } => Arc::new(named_plant(name, params)?),
            PlantDoc::Expr {
                inputs,
                state,
                output,
            } => Arc::new(ExprPlant::new(*inputs, state.clone(), output.clone())?),
        })
    }

    pub fn from_linear(p: &LinearPlant) -> Self {
        PlantDoc::Linear {
            a: p.a().to_rows(),
            b: p.b().to_rows(),
            c: p.c().to_rows(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub plant: PlantDoc,
    /// Inline controller network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<NetworkDoc>,
    /// Controller network file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller_file: Option<PathBuf>,
    pub initial_set: HyperBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_set: Option<HyperBox>,
    pub horizon: usize,
    pub partition: PartitionSpec,
    /// Segments per state axis used to split the state box at each step.
    #[serde(default = "one")]
    pub state_split: usize,
    #[serde(default, rename = "unsafe")]
    pub unsafe_set: Vec<HyperBox>,
    #[serde(default)]
    pub epsilon: f64,
}

fn one() -> usize {
    1
}

impl ScenarioDoc {
    pub fn parse(text: &str, path: &Path) -> Result<Self, FormatError> {
        let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| FormatError::parse(path, e))?;
        expect_format(&doc.format, SCENARIO_FORMAT)
            .map_err(|m| FormatError::invalid(path, ReachError::InvalidArgument(m)))?;
        if doc.controller.is_some() == doc.controller_file.is_some() {
            return Err(FormatError::invalid(
                path,
                ReachError::InvalidArgument(
                    "give exactly one of `controller` and `controller_file`".into(),
                ),
            ));
        }
        Ok(doc)
    }

    /// Replaces a controller path with the parsed network document.
    pub fn inline_controller(&mut self, base: &Path) -> Result<(), FormatError> {
        if let Some(rel) = self.controller_file.take() {
            let p = base.join(rel);
            self.controller = Some(NetworkDoc::parse(&read(&p)?, &p)?);
        }
        Ok(())
    }

    /// Builds the engine objects; the controller must already be inline.
    pub fn build(&self) -> Result<(Scenario, SafetySpec), ReachError> {
        let Some(ctrl) = &self.controller else {
            return Err(ReachError::InvalidArgument(
                "controller reference has not been resolved".into(),
            ));
        };
        let scenario = Scenario::new(
            self.plant.to_model()?,
            ctrl.to_model()?,
            self.initial_set.clone(),
            self.input_set.clone(),
            self.horizon,
            self.partition.clone(),
        )?
        .with_padding(self.epsilon)?
        .with_state_split(self.state_split)?;
        let n = scenario.plant().state_dim();
        let spec = if self.unsafe_set.is_empty() {
            SafetySpec::unrestricted(n)
        } else {
            SafetySpec::new(BoxUnion::new(self.unsafe_set.clone())?)
        };
        crate::error::check_dim("unsafe region", n, spec.unsafe_set().dim())?;
        Ok((scenario, spec))
    }

    pub fn to_json(&self) -> String {
        to_pretty(self)
    }
}

/// Reads a scenario, resolves its controller and validates it.
pub fn load_scenario(path: &Path) -> Result<ScenarioDoc, FormatError> {
    let mut doc = ScenarioDoc::parse(&read(path)?, path)?;
    doc.inline_controller(path.parent().unwrap_or(Path::new(".")))?;
    doc.build().map_err(|e| FormatError::invalid(path, e))?;
    Ok(doc)
}

/// Which kind of document a file holds, judged by its `format` tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DocumentKind {
    Network,
    Scenario,
}

pub fn sniff_document(path: &Path) -> Result<DocumentKind, FormatError> {
    #[derive(Deserialize)]
    struct Tag {
        format: String,
    }
    let text = read(path)?;
    let tag: Tag = serde_json::from_str(&text).map_err(|e| FormatError::parse(path, e))?;
    match tag.format.as_str() {
        NETWORK_FORMAT => Ok(DocumentKind::Network),
        SCENARIO_FORMAT => Ok(DocumentKind::Scenario),
        other => Err(FormatError::invalid(
            path,
            ReachError::InvalidArgument(format!("unknown document format `{other}`")),
        )),
    }
}

// ---------------------------------------------------------------------------
// reports

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
        }
    }
}

/// Everything needed to re-run the command that produced a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_set: Option<HyperBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioDoc>,
    pub partition: PartitionSpec,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: usize,
    pub cells: usize,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<HyperBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<HyperBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_hull: Option<HyperBox>,
    /// Network output boxes (controller outputs for closed loops).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<HyperBox>,
    /// Grid index of the input cell behind each entry of `boxes`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub t: usize,
    pub state: HyperBox,
    pub unsafe_index: usize,
    pub unsafe_box: HyperBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub label: String,
    pub witnesses: Vec<WitnessReport>,
}

impl From<&Verdict> for VerdictReport {
    fn from(v: &Verdict) -> Self {
        VerdictReport {
            label: v.label().to_string(),
            witnesses: v
                .witnesses()
                .iter()
                .map(|w| WitnessReport {
                    t: w.t,
                    state: w.state.clone(),
                    unsafe_index: w.unsafe_index,
                    unsafe_box: w.unsafe_box.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub tool: ToolInfo,
    pub command: String,
    pub config: ConfigEcho,
    pub notes: Vec<String>,
    pub steps: Vec<StepReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictReport>,
    pub total_seconds: f64,
}

const HULL_NOTE: &str = "each state piece is driven by the interval hull of its controller output \
     union; the next state box is the hull of the pieces' images";

impl Report {
    /// Single-step report of a network output-set computation.
    pub fn for_network(
        network: NetworkDoc,
        input_set: HyperBox,
        partition: PartitionSpec,
        epsilon: f64,
        outputs: &BoxUnion,
        seconds: f64,
    ) -> Self {
        Report {
            schema: REPORT_SCHEMA.to_string(),
            tool: ToolInfo::default(),
            command: "reach-nn".to_string(),
            config: ConfigEcho {
                network: Some(network),
                input_set: Some(input_set),
                scenario: None,
                partition,
                epsilon,
            },
            notes: Vec::new(),
            steps: vec![StepReport {
                t: 0,
                cells: outputs.len(),
                seconds,
                state: None,
                output: None,
                control_hull: None,
                boxes: outputs.boxes().to_vec(),
                sources: outputs.sources().map(<[usize]>::to_vec).unwrap_or_default(),
            }],
            verdict: None,
            total_seconds: seconds,
        }
    }

    /// Report of a closed-loop tube, with a verdict when one was computed.
    pub fn for_tube(
        command: &str,
        scenario: ScenarioDoc,
        tube: &ReachTube,
        verdict: Option<&Verdict>,
        seconds: f64,
    ) -> Self {
        let steps = tube
            .steps()
            .iter()
            .zip(tube.step_times())
            .map(|(s, dt)| StepReport {
                t: s.t,
                cells: s.cell_count(),
                seconds: dt.as_secs_f64(),
                state: Some(s.state.clone()),
                output: Some(s.output.clone()),
                control_hull: s.control_hull.clone(),
                boxes: s
                    .controller
                    .as_ref()
                    .map(|u| u.boxes().to_vec())
                    .unwrap_or_default(),
                sources: s
                    .controller
                    .as_ref()
                    .and_then(|u| u.sources().map(<[usize]>::to_vec))
                    .unwrap_or_default(),
            })
            .collect();
        Report {
            schema: REPORT_SCHEMA.to_string(),
            tool: ToolInfo::default(),
            command: command.to_string(),
            config: ConfigEcho {
                network: None,
                input_set: None,
                partition: scenario.partition.clone(),
                epsilon: scenario.epsilon,
                scenario: Some(scenario),
            },
            notes: vec![HULL_NOTE.to_string()],
            steps,
            verdict: verdict.map(VerdictReport::from),
            total_seconds: seconds,
        }
    }

    /// Checks the structural invariants of the report.
    pub fn validate(&self) -> Result<(), String> {
        if let Some(sc) = &self.config.scenario {
            if self.steps.len() != sc.horizon + 1 {
                return Err(format!(
                    "report has {} steps for horizon {}",
                    self.steps.len(),
                    sc.horizon
                ));
            }
        }
        for (k, s) in self.steps.iter().enumerate() {
            if s.t != k {
                return Err(format!("step {k} is labelled t = {}", s.t));
            }
            if s.boxes.len() != s.cells || (!s.sources.is_empty() && s.sources.len() != s.cells) {
                return Err(format!("step {k}: cell count does not match box list"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        to_pretty(self)
    }

    /// Copy with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Report {
        let mut r = self.clone();
        r.total_seconds = 0.0;
        for s in &mut r.steps {
            s.seconds = 0.0;
        }
        r
    }
}

// ---------------------------------------------------------------------------
// columnar text

/// One row per box: `t cell lo_0 hi_0 lo_1 hi_1 ...`.
pub fn boxes_table<'a, I>(rows: I) -> String
where
    I: IntoIterator<Item = (usize, Option<usize>, &'a HyperBox)>,
{
    let mut out = String::new();
    let mut header_done = false;
    for (t, cell, b) in rows {
        if !header_done {
            out.push_str("t cell");
            for i in 0..b.dim() {
                let _ = write!(out, " lo{i} hi{i}");
            }
            out.push('\n');
            header_done = true;
        }
        let _ = write!(out, "{t} ");
        match cell {
            Some(c) => {
                let _ = write!(out, "{c}");
            }
            None => out.push('-'),
        }
        for iv in b.intervals() {
            let _ = write!(out, " {:?} {:?}", iv.lo(), iv.hi());
        }
        out.push('\n');
    }
    out
}

/// One row per point with header `y0 y1 ...` (or the given column prefix).
pub fn points_table(prefix: &str, points: &[Vec<f64>]) -> String {
    let mut out = String::new();
    if let Some(first) = points.first() {
        let cols: Vec<String> = (0..first.len()).map(|i| format!("{prefix}{i}")).collect();
        out.push_str(&cols.join(" "));
        out.push('\n');
    }
    for p in points {
        let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// One row per visited state: `sample t x0 x1 ...`.
pub fn trajectories_table(trajectories: &[Vec<Vec<f64>>]) -> String {
    let mut out = String::new();
    let dim = trajectories.first().and_then(|t| t.first()).map_or(0, Vec::len);
    out.push_str("sample t");
    for i in 0..dim {
        let _ = write!(out, " x{i}");
    }
    out.push('\n');
    for (k, traj) in trajectories.iter().enumerate() {
        for (t, x) in traj.iter().enumerate() {
            let _ = write!(out, "{k} {t}");
            for v in x {
                let _ = write!(out, " {v:?}");
            }
            out.push('\n');
        }
    }
    out
}
