use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use boxreach::io::Report;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn boxreach(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boxreach"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(path: &Path) -> Report {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn reach_nn_cell_counts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    let net = data("mlp_example.json");
    for (m, n) in [("30,30", 900), ("1", 1)] {
        let o = boxreach(&["reach-nn", p(&net), "--input=-1:1,-1:1", "--partition", m, "--out", p(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let r = report(&out);
        assert_eq!(r.schema, "boxreach-report/1");
        assert_eq!(r.steps[0].cells, n);
        assert_eq!(r.steps[0].boxes.len(), n);
    }
}

#[test]
fn reach_nn_table() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("boxes.txt");
    let o = boxreach(&[
        "reach-nn",
        p(&data("mlp_example.json")),
        "--input=-1:1,-1:1",
        "--partition=10",
        "--table",
        p(&table),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t cell lo0 hi0 lo1 hi1"));
    assert_eq!(lines.count(), 100);
    // report went to stdout
    let r: Report = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r.steps[0].cells, 100);
}

#[test]
fn malformed_network_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    let text = fs::read_to_string(data("mlp_example.json"))
        .unwrap()
        .replacen("[0.0974, -1.6347]", "[0.0974]", 1);
    fs::write(&bad, text).unwrap();
    let o = boxreach(&["reach-nn", p(&bad), "--input=-1:1,-1:1"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("bad.json:"), "{msg}");
    assert!(msg.contains("row 1"), "{msg}");
}

#[test]
fn dimension_mismatch_is_an_input_error() {
    let o = boxreach(&["reach-nn", p(&data("mlp_example.json")), "--input=-1:1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = boxreach(&["reach-nn", p(&data("mlp_example.json")), "--input=-1:1,0:1", "--partition", "2,2,2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = boxreach(&["reach-nn", p(&data("mlp_example.json")), "--input=1:-1,0:1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reach_cls_steps() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t.json");
    let scen = data("linear_scenario.json");
    let o = boxreach(&["reach-cls", p(&scen), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r.steps.len(), 11);
    assert!(r.verdict.is_none());
    assert!(r.steps[10].control_hull.is_none());

    let o = boxreach(&["reach-cls", p(&scen), "--horizon", "0", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&out).steps.len(), 1);
}

fn scenario_with(dir: &Path, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(data("linear_scenario.json")).unwrap();
    assert!(text.contains(from));
    let path = dir.join("s.json");
    fs::write(
        &path,
        text.replacen(from, to, 1)
            .replace("controller_example.json", p(&data("controller_example.json"))),
    )
    .unwrap();
    path
}

#[test]
fn unknown_plant_is_rejected() {
    let dir = TempDir::new().unwrap();
    let s = scenario_with(
        dir.path(),
        r#""kind": "linear","#,
        r#""kind": "named", "name": "pendulum", "params": {}, "ignored": 1,"#,
    );
    let o = boxreach(&["reach-cls", p(&s)]);
    assert_eq!(o.status.code(), Some(2));

    let text = fs::read_to_string(data("van_der_pol_scenario.json"))
        .unwrap()
        .replace("van_der_pol", "pendulum")
        .replace("controller_example.json", p(&data("controller_example.json")));
    let s = dir.path().join("vdp.json");
    fs::write(&s, text).unwrap();
    let o = boxreach(&["reach-cls", p(&s)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown plant `pendulum`"), "{}", stderr(&o));
}

#[test]
fn verify_verdicts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("v.json");
    for m in ["5", "20"] {
        let o = boxreach(&["verify", p(&data("linear_scenario.json")), "--partition", m, "--out", p(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(report(&out).verdict.unwrap().label, "SAFE");
    }

    let own = scenario_with(dir.path(), "[-3.0, -2.0],\n      [2.0, 3.0]", "[2.0, 3.0],\n      [2.0, 3.0]");
    let o = boxreach(&["verify", p(&own), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let v = report(&out).verdict.unwrap();
    assert_eq!(v.label, "UNCERTAIN");
    assert_eq!(v.witnesses[0].t, 0);

    let none = scenario_with(
        dir.path(),
        "\"unsafe\": [\n    [\n      [-3.0, -2.0],\n      [2.0, 3.0]\n    ]\n  ]",
        "\"unsafe\": []",
    );
    let o = boxreach(&["verify", p(&none), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(&out).verdict.unwrap().label, "SAFE");
}

#[test]
fn sample_outputs_and_trajectories() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    let net = data("mlp_example.json");
    for out in [&a, &b] {
        let o = boxreach(&["sample", p(&net), "--input=-1:1,-1:1", "--count", "5000", "--seed", "3", "--out", p(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert_eq!(text.lines().next(), Some("y0 y1"));
    assert_eq!(text.lines().count(), 5001);

    let o = boxreach(&["sample", p(&net), "--input=0.5:0.5,-0.25:-0.25", "--count", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let one = String::from_utf8(o.stdout).unwrap();
    assert_eq!(one.lines().count(), 2);
    let again = boxreach(&["sample", p(&net), "--input=0.5:0.5,-0.25:-0.25", "--count", "1", "--seed", "99"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), one);

    let o = boxreach(&["sample", p(&data("linear_scenario.json")), "--count", "20", "--out", p(&a)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next(), Some("sample t x0 x1"));
    assert_eq!(text.lines().count(), 1 + 20 * 11);

    let o = boxreach(&["sample", p(&net), "--count", "0", "--input=-1:1,-1:1"]);
    assert_eq!(o.status.code(), Some(2));
}

fn same_modulo_timings(a: &Path, b: &Path) {
    assert_eq!(report(a).without_timings(), report(b).without_timings());
}

#[test]
fn reports_rerun_from_their_echo() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");

    let o = boxreach(&["reach-nn", p(&data("mlp_example.json")), "--input=-1:1,-1:1", "--partition", "7,9", "--epsilon", "1e-9", "--out", p(&first)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = boxreach(&["reach-nn", p(&first), "--out", p(&second)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    same_modulo_timings(&first, &second);

    let o = boxreach(&["verify", p(&data("linear_scenario.json")), "--partition", "6,4", "--horizon", "4", "--out", p(&first)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = boxreach(&["verify", p(&first), "--out", p(&second)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    same_modulo_timings(&first, &second);
    assert_eq!(report(&second).steps.len(), 5);
}

#[test]
fn thread_count_does_not_change_reports() {
    let dir = TempDir::new().unwrap();
    let one = dir.path().join("one.json");
    let many = dir.path().join("many.json");
    let scen = data("linear_scenario.json");
    assert_eq!(boxreach(&["--threads", "1", "reach-cls", p(&scen), "--out", p(&one)]).status.code(), Some(0));
    assert_eq!(boxreach(&["--threads", "4", "reach-cls", p(&scen), "--out", p(&many)]).status.code(), Some(0));
    same_modulo_timings(&one, &many);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(boxreach(&["reach-nn"]).status.code(), Some(2));
    assert_eq!(boxreach(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(boxreach(&["reach-cls", "/nonexistent/s.json"]).status.code(), Some(2));
}
