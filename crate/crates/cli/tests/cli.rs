use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_partgeom"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn reports_carry_the_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["spline", "--partition", &fixture("tree_example.json"), "--values", &fixture("tree_values.json")], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(dir.path().join("spline.json"));
    assert_eq!(r["tool"], "partgeom");
    assert_eq!(r["subcommand"], "spline");
    assert!(r["seed"].is_null());
    assert!(r["config"].is_object());
    assert!(r["warnings"].is_array());
    let csv = std::fs::read_to_string(dir.path().join("spline.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn empty_partition_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["nerve", "--partition", &fixture("empty_partition.json")], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let err = json(dir.path().join("error.json"));
    assert_eq!(err["error"]["kind"], "validation");
    assert_eq!(err["error"]["exit_code"], 3);
    let line: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(line, err);
}

#[test]
fn unknown_flag_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["metric", "--partition", &fixture("tree_example.json"), "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let line: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(line["error"]["kind"], "parse");
}

#[test]
fn monte_carlo_paths_require_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["ensemble", "--trees", &fixture("ensemble.json")], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["ensemble", "--trees", &fixture("ensemble.json"), "--seed", "1", "--mc-samples", "1000"], dir.path());
    assert!(out.status.success());
    assert_eq!(json(dir.path().join("ensemble.json"))["seed"], 1);
}

#[test]
fn missing_input_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["metric", "--partition", "/nonexistent/partition.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn network_analysis_of_the_two_neuron_layer() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["nn-analyze", "--weights", &fixture("two_neuron_net.json"), "--data", &fixture("unit_points.csv"), "--domain", &fixture("unit_domain.json")], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(dir.path().join("nn-analyze.json"));
    assert!(r["result"].is_object());
}
