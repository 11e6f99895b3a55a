use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_haar-radial"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_lines(bytes: &[u8]) -> Vec<Value> {
    String::from_utf8_lossy(bytes).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

const WORKED: &str = r#"{"n":1,"m":1,"t":[[0,1]],"C":{"rows":1,"cols":1,"data":[[1,0]]},"U":{"rows":1,"cols":1,"data":[[1,0]]}}"#;
const AT_MINUS_ONE: &str =
    r#"{"n":1,"m":1,"t":[[-1,0]],"C":{"rows":1,"cols":1,"data":[[1,0]]},"U":{"rows":1,"cols":1,"data":[[1,0]]}}"#;

#[test]
fn sample_is_byte_identical_across_runs_and_threads() {
    let a = run(&["sample", "--k", "4", "--samples", "10", "--seed", "7"]);
    let b = run(&["sample", "--k", "4", "--samples", "10", "--seed", "7", "--threads", "2"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let lines = json_lines(&a.stdout);
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[0]["kind"], "header");
    assert_eq!(lines[0]["seed"], 7);
    assert_eq!(lines[1]["rows"], 4);
}

#[test]
fn extract_writes_records_and_rejection_counts() {
    let out = run(&["sample", "--n", "2", "--m", "2", "--extract", "--samples", "100", "--seed", "3"]);
    assert!(out.status.success());
    let lines = json_lines(&out.stdout);
    let summary = lines.last().unwrap();
    assert_eq!(summary["kind"], "summary");
    let rejected: u64 = summary["rejections"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(lines.len() - 2 + rejected as usize, 100);
    assert_eq!(lines[1]["t"].as_array().unwrap().len(), 2);
}

#[test]
fn extract_csv_has_documented_columns() {
    let out = run(&["sample", "--n", "1", "--m", "2", "--extract", "--samples", "5", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "arg_t1,arg_t2,c1_1,c2_1,u11_re,u11_im,tr_u_re,tr_u_im");
}

#[test]
fn zero_block_size_is_a_usage_error() {
    let out = run(&["sample", "--n", "2", "--m", "0", "--extract"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["sample", "--bogus"]).status.code(), Some(2));
}

#[test]
fn density_of_worked_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.jsonl");
    fs::write(&path, format!("{{\"kind\":\"header\"}}\n{WORKED}\n{AT_MINUS_ONE}\n")).unwrap();
    let p = path.to_str().unwrap();

    let printed = json_lines(&run(&["density", p, "--mutate", "printed-constant"]).stdout);
    let expected = (2.0 / (25.0 * std::f64::consts::PI)).ln();
    assert!((printed[1]["log_density"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert_eq!(printed[1]["line"], 2);

    let normalized = json_lines(&run(&["density", p]).stdout);
    let expected = (4.0 / (25.0 * std::f64::consts::PI)).ln();
    assert!((normalized[1]["log_density"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert_eq!(normalized[2]["error"], "DomainError");
    assert_eq!(normalized[2]["line"], 3);
}

#[test]
fn density_of_empty_file_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    fs::write(&path, "").unwrap();
    let out = run(&["density", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn density_reports_parse_errors_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    fs::write(&path, format!("{WORKED}\n{{\"n\": 1\n")).unwrap();
    let out = run(&["density", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn missing_input_is_an_io_error() {
    assert_eq!(run(&["density", "/nonexistent/input.jsonl"]).status.code(), Some(3));
}

#[test]
fn roundtrip_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&[
        "verify", "roundtrip", "--n", "2", "--m", "2", "--samples", "500", "--seed", "1", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let artifact: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(artifact["seed"], 1);
    assert_eq!(artifact["config"]["samples"], 500);
    assert!(artifact["version"].is_string());
    assert_eq!(artifact["report"]["passed"], true);
}

#[test]
fn normalization_passes_and_mutation_fails() {
    let ok = run(&["verify", "normalization", "--n", "1", "--m", "1", "--samples", "100000", "--seed", "3"]);
    assert_eq!(ok.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&ok.stdout).unwrap();
    let est = report["report"]["estimate"].as_f64().unwrap();
    assert!((est - 1.0).abs() < 0.02, "{est}");

    let bad = run(&[
        "verify", "normalization", "--n", "1", "--m", "1", "--samples", "100000", "--seed", "3", "--mutate", "drop-detU",
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn staged_suite_passes() {
    let out = run(&["verify", "staged", "--k", "1", "--samples", "100000", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_rejects_csv() {
    let out = run(&["verify", "roundtrip", "--samples", "10", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}
