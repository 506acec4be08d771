use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segmarket")).args(args).output().expect("binary runs")
}

fn write_scenario(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn base(meeting: Value, n: usize) -> Value {
    json!({
        "meeting": meeting,
        "prior": {"kind": "uniform", "n": n},
        "k": 1.0,
        "lambda": {"kind": "constant", "ell": 1.0},
    })
}

fn ces1() -> Value {
    json!({"family": "ces", "alpha": 1.0, "beta": 1.0, "rho": 1.0})
}

fn urn() -> Value {
    json!({"family": "urnball", "alpha": 1.0, "beta": 1.0})
}

#[test]
fn compare_on_pooled_market_has_no_gap() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = base(ces1(), 10);
    s["segmentation"] = json!({"kind": "pooled"});
    let path = write_scenario(dir.path(), "pooled.json", &s);
    let v = stdout_json(&run(&["compare", "--scenario", &path]));
    assert!((v["gap"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    assert!(v["tightness_delta"][0].as_f64().unwrap().abs() <= 1e-9);
}

#[test]
fn design_urn_ball_is_convex_and_binary() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "urn.json", &base(urn(), 101));
    let v = stdout_json(&run(&["design", "--scenario", &path]));
    assert_eq!(v["curvature"], "convex");
    assert_eq!(v["structure"], "binary");
    assert_eq!(v["segmentation"]["submarkets"].as_array().unwrap().len(), 2);
    assert_eq!(v["certificate"]["checks"]["a_envelope"], true);
    assert!(v["theta_c"].as_f64().is_some());
}

#[test]
fn zero_buyer_share_is_an_assumption_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = base(ces1(), 5);
    s["lambda"] = json!({"kind": "constant", "ell": 0.0});
    let path = write_scenario(dir.path(), "zero.json", &s);
    let o = run(&["equilibrium", "--scenario", &path]);
    assert_eq!(o.status.code(), Some(4));
    let diag: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(diag["code"], "assumption");
    assert_eq!(diag["context"]["command"], "equilibrium");
    assert!(diag["message"].as_str().is_some());
}

#[test]
fn invalid_scenarios_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = base(ces1(), 5);
    s["unexpected"] = json!(1);
    let path = write_scenario(dir.path(), "bad.json", &s);
    assert_eq!(run(&["equilibrium", "--scenario", &path]).status.code(), Some(2));
    let mut s = base(ces1(), 5);
    s["meeting"]["alpha"] = json!(1.5);
    let path = write_scenario(dir.path(), "alpha.json", &s);
    assert_eq!(run(&["first-best", "--scenario", &path]).status.code(), Some(2));
    let path = write_scenario(dir.path(), "big.json", &base(urn(), 14));
    assert_eq!(run(&["oracle", "--scenario", &path, "--max-n", "20"]).status.code(), Some(2));
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = base(urn(), 30);
    s["options"] = json!({"probes": 10});
    let path = write_scenario(dir.path(), "probe.json", &s);
    let a = run(&["design", "--scenario", &path, "--seed", "7"]);
    let b = run(&["design", "--scenario", &path, "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["probes"]["bound_holds"], true);
    assert_eq!(v["probes"]["seed"], 7);
}

#[test]
fn emitted_segmentation_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "urn.json", &base(urn(), 40));
    let d = stdout_json(&run(&["design", "--scenario", &path]));
    let mut s = base(urn(), 40);
    s["segmentation"] = d["segmentation"].clone();
    let again = write_scenario(dir.path(), "again.json", &s);
    let eq = stdout_json(&run(&["equilibrium", "--scenario", &again]));
    let du = eq["u_star"].as_f64().unwrap() - d["u_bar"].as_f64().unwrap();
    assert!(du.abs() <= 1e-8, "{du}");
}

#[test]
fn csv_columns_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", &base(ces1(), 4));
    let out = dir.path().join("eq.csv");
    let o = run(&["equilibrium", "--scenario", &path, "--format", "csv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "submarket_index,posterior_mean,weight,tightness,meet_prob_buyer,meet_prob_seller,surplus_contrib"
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn oracle_reports_lp_and_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "urn6.json", &base(urn(), 6));
    let v = stdout_json(&run(&["oracle", "--scenario", &path, "--exhaustive"]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert_eq!(v["enumeration"]["mode"], "exhaustive");
    assert_eq!(v["enumeration"]["candidates"], 203);
    let d = stdout_json(&run(&["design", "--scenario", &path]));
    let gap = v["enumeration"]["surplus"].as_f64().unwrap() - d["surplus"].as_f64().unwrap();
    assert!(gap.abs() <= 1e-6);
}

#[test]
fn hosios_table_and_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = base(ces1(), 21);
    s["options"] = json!({"lambda_at_cutoff": 0.5});
    let path = write_scenario(dir.path(), "h.json", &s);
    let v = stdout_json(&run(&["hosios", "--scenario", &path]));
    assert_eq!(v["holds"], false);
    let table = v["lambda_table"]["values"].as_array().unwrap();
    assert_eq!(table.len(), 21);
    let mut s2 = base(ces1(), 21);
    s2["lambda"] = json!({"kind": "table", "values": table});
    let path2 = write_scenario(dir.path(), "h2.json", &s2);
    assert_eq!(stdout_json(&run(&["hosios", "--scenario", &path2]))["holds"], true);
    assert_eq!(stdout_json(&run(&["hosios", "--scenario", &path, "--tol", "10"]))["holds"], true);
}

#[test]
fn batch_mode_writes_one_file_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    fs::create_dir(&input).unwrap();
    write_scenario(&input, "a.json", &base(ces1(), 3));
    write_scenario(&input, "b.json", &base(urn(), 5));
    let out = dir.path().join("out");
    let o = run(&["first-best", "--batch", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["a.json", "b.json"] {
        let v: Value = serde_json::from_str(&fs::read_to_string(out.join(name)).unwrap()).unwrap();
        assert!(v["eta"].as_f64().unwrap() > 0.0);
    }
}
