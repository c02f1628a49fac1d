//! `boxreach` command-line front end.
//!
//! Exit codes: 0 success, 1 UNCERTAIN verdict from `verify`, 2 bad input
//! (usage, parse or dimension errors), 3 internal invariant violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use boxreach::io::{
    boxes_table, load_network, load_scenario, points_table, sniff_document, trajectories_table,
    DocumentKind, NetworkDoc, Report, ScenarioDoc, REPORT_SCHEMA,
};
use boxreach::mc_oracle::{sample_network_outputs, simulate_trajectories, SampleConfig};
use boxreach::{
    check_tube, reach_mlp_padded, reach_nncs, BoxUnion, HyperBox, Interval, NetworkModel,
    PartitionSpec, Verdict,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "boxreach", version, about = "Box-based reachability for neural networks and closed loops")]
struct Cli {
    /// Worker threads for the engine (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Over-approximate a network's output set over an input box.
    ReachNn(ReachNnArgs),
    /// Compute the reach tube of a closed-loop scenario.
    ReachCls(LoopArgs),
    /// Compute the tube and check it against the scenario's unsafe boxes.
    Verify(LoopArgs),
    /// Draw seeded samples: network outputs or closed-loop trajectories.
    Sample(SampleArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// Report destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write the boxes as a whitespace-separated table.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReachNnArgs {
    /// Network document, or a report to re-run.
    file: PathBuf,

    /// Input box as `lo:hi` per dimension, comma separated.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_box)]
    input: Option<HyperBox>,

    /// Segments per input dimension: `M1,M2,...` or one value for all.
    #[arg(long, value_parser = parse_counts)]
    partition: Option<Counts>,

    /// Padding added to every output box.
    #[arg(long)]
    epsilon: Option<f64>,

    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct LoopArgs {
    /// Scenario document, or a report to re-run.
    file: PathBuf,

    /// Segments per controller input dimension: `M1,M2,...` or one value.
    #[arg(long, value_parser = parse_counts)]
    partition: Option<Counts>,

    #[arg(long)]
    horizon: Option<usize>,

    /// Padding added to controller output and state boxes.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Segments per state axis used to split the state box at each step.
    #[arg(long)]
    state_split: Option<usize>,

    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Network or scenario document.
    file: PathBuf,

    #[arg(long, default_value_t = 1000)]
    count: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Input box for network documents, as for `reach-nn`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_box)]
    input: Option<HyperBox>,

    /// Override the scenario horizon.
    #[arg(long)]
    horizon: Option<usize>,

    /// Table destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_box(s: &str) -> Result<HyperBox, String> {
    let dims = s
        .split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| format!("`{part}` is not of the form lo:hi"))?;
            let lo: f64 = lo.trim().parse().map_err(|e| format!("`{lo}`: {e}"))?;
            let hi: f64 = hi.trim().parse().map_err(|e| format!("`{hi}`: {e}"))?;
            Interval::new(lo, hi).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    HyperBox::new(dims).map_err(|e| e.to_string())
}

/// Segment counts from `--partition`.
#[derive(Clone, Debug)]
struct Counts(Vec<usize>);

fn parse_counts(s: &str) -> Result<Counts, String> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()
        .map(Counts)
}

/// Why a command stopped, mapped onto the exit-code contract.
enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Internal(e) => e,
        }
    }
}

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Internal(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match cli.command {
        Command::ReachNn(a) => reach_nn(a),
        Command::ReachCls(a) => reach_loop(a, false),
        Command::Verify(a) => reach_loop(a, true),
        Command::Sample(a) => sample(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

fn json_error(path: &Path, e: &serde_json::Error) -> anyhow::Error {
    let msg = e.to_string();
    let msg = msg.rfind(" at line ").map_or(msg.as_str(), |i| &msg[..i]);
    anyhow!("{}:{}:{}: {msg}", path.display(), e.line(), e.column())
}

/// A previous report, if `path` holds one.
fn read_report(path: &Path) -> Result<Option<Report>, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("{}", path.display()))
        .map_err(input)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| json_error(path, &e))
        .map_err(input)?;
    if value.get("schema").is_none() {
        return Ok(None);
    }
    let report: Report = serde_json::from_str(&text)
        .map_err(|e| json_error(path, &e))
        .map_err(input)?;
    if report.schema != REPORT_SCHEMA {
        return Err(input(anyhow!(
            "{}: unsupported report schema `{}`",
            path.display(),
            report.schema
        )));
    }
    Ok(Some(report))
}

fn partition_for(Counts(counts): Counts, dim: usize) -> Result<PartitionSpec, Failure> {
    let counts = if counts.len() == 1 { vec![counts[0]; dim] } else { counts };
    if counts.len() != dim {
        return Err(input(anyhow!(
            "--partition has {} entries but the input has {dim} dimensions",
            counts.len()
        )));
    }
    PartitionSpec::new(counts).map_err(input)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(input),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_report(report: &Report, output: &Output) -> Result<(), Failure> {
    report
        .validate()
        .map_err(|m| internal(anyhow!("report failed validation: {m}")))?;
    let mut json = report.to_json();
    json.push('\n');
    emit(&json, output.out.as_deref())
}

fn reach_nn(a: ReachNnArgs) -> Result<u8, Failure> {
    let (doc, net, echo) = match read_report(&a.file)? {
        Some(r) => {
            let net_doc = r
                .config
                .network
                .ok_or_else(|| input(anyhow!("{}: report has no network to re-run", a.file.display())))?;
            let net = net_doc.to_model().map_err(input)?;
            (net_doc, net, Some((r.config.input_set, r.config.partition, r.config.epsilon)))
        }
        None => {
            let (d, n) = load_network(&a.file).map_err(input)?;
            (d, n, None)
        }
    };
    let (echo_input, echo_partition, echo_eps) = match echo {
        Some((i, p, e)) => (i, Some(p), Some(e)),
        None => (None, None, None),
    };
    let input_box = a
        .input
        .or(echo_input)
        .ok_or_else(|| input(anyhow!("--input is required for a network document")))?;
    if input_box.dim() != net.input_dim() {
        return Err(input(anyhow!(
            "input box has {} dimensions but the network takes {}",
            input_box.dim(),
            net.input_dim()
        )));
    }
    let partition = match (a.partition, echo_partition) {
        (Some(c), _) => partition_for(c, net.input_dim())?,
        (None, Some(p)) => p,
        (None, None) => PartitionSpec::uniform(net.input_dim(), 1).map_err(input)?,
    };
    let epsilon = a.epsilon.or(echo_eps).unwrap_or(0.0);
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(input(anyhow!("--epsilon must be finite and non-negative")));
    }

    let started = Instant::now();
    let outputs = run_network(&net, &input_box, &partition, epsilon)?;
    let secs = started.elapsed().as_secs_f64();
    let report = Report::for_network(doc, input_box, partition, epsilon, &outputs, secs);
    emit_report(&report, &a.output)?;
    if let Some(t) = &a.output.table {
        let sources = outputs.sources().map(<[usize]>::to_vec).unwrap_or_default();
        let rows = outputs
            .iter()
            .enumerate()
            .map(|(k, b)| (0, sources.get(k).copied(), b));
        emit(&boxes_table(rows), Some(t))?;
    }
    eprintln!("reach-nn: {} output boxes in {secs:.3} s", outputs.len());
    Ok(0)
}

fn run_network(
    net: &NetworkModel,
    input_box: &HyperBox,
    partition: &PartitionSpec,
    epsilon: f64,
) -> Result<BoxUnion, Failure> {
    reach_mlp_padded(net, &BoxUnion::singleton(input_box.clone()), partition, epsilon).map_err(internal)
}

fn scenario_doc(file: &Path) -> Result<ScenarioDoc, Failure> {
    match read_report(file)? {
        Some(r) => r
            .config
            .scenario
            .ok_or_else(|| input(anyhow!("{}: report has no scenario to re-run", file.display()))),
        None => load_scenario(file).map_err(input),
    }
}

fn reach_loop(a: LoopArgs, verify: bool) -> Result<u8, Failure> {
    let mut doc = scenario_doc(&a.file)?;
    if let Some(h) = a.horizon {
        doc.horizon = h;
    }
    if let Some(e) = a.epsilon {
        doc.epsilon = e;
    }
    if let Some(s) = a.state_split {
        doc.state_split = s;
    }
    if let Some(c) = a.partition {
        doc.partition = partition_for(c, doc.partition.dim())?;
    }
    let (scenario, spec) = doc
        .build()
        .with_context(|| format!("{}", a.file.display()))
        .map_err(input)?;

    let started = Instant::now();
    let tube = reach_nncs(&scenario).map_err(internal)?;
    let verdict = if verify {
        Some(check_tube(&tube, &spec).map_err(internal)?)
    } else {
        None
    };
    let secs = started.elapsed().as_secs_f64();
    let command = if verify { "verify" } else { "reach-cls" };
    let report = Report::for_tube(command, doc, &tube, verdict.as_ref(), secs);
    emit_report(&report, &a.output)?;
    if let Some(t) = &a.output.table {
        emit(&boxes_table(tube.steps().iter().map(|s| (s.t, None, &s.state))), Some(t))?;
    }
    eprintln!("{command}: {} steps in {secs:.3} s", tube.steps().len());
    match verdict {
        Some(Verdict::Uncertain(w)) => {
            let first = &w[0];
            eprintln!(
                "UNCERTAIN: state box at t = {} meets unsafe box {}",
                first.t, first.unsafe_index
            );
            Ok(1)
        }
        Some(Verdict::Safe) => {
            eprintln!("SAFE");
            Ok(0)
        }
        None => Ok(0),
    }
}

fn sample(a: SampleArgs) -> Result<u8, Failure> {
    let cfg = SampleConfig::new(a.count, a.seed).map_err(input)?;
    let kind = sniff_document(&a.file).map_err(input)?;
    let table = match kind {
        DocumentKind::Network => {
            let (_, net): (NetworkDoc, NetworkModel) = load_network(&a.file).map_err(input)?;
            let b = a
                .input
                .ok_or_else(|| input(anyhow!("--input is required for a network document")))?;
            if b.dim() != net.input_dim() {
                return Err(input(anyhow!(
                    "input box has {} dimensions but the network takes {}",
                    b.dim(),
                    net.input_dim()
                )));
            }
            let pts = sample_network_outputs(&net, &BoxUnion::singleton(b), &cfg).map_err(internal)?;
            points_table("y", &pts)
        }
        DocumentKind::Scenario => {
            let mut doc = load_scenario(&a.file).map_err(input)?;
            if let Some(h) = a.horizon {
                doc.horizon = h;
            }
            let (scenario, _) = doc.build().map_err(input)?;
            trajectories_table(&simulate_trajectories(&scenario, &cfg).map_err(internal)?)
        }
    };
    emit(&table, a.out.as_deref())?;
    Ok(0)
}
