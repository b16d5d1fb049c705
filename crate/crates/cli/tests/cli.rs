use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use num_bigint::BigUint;
use serde_json::Value;

fn epflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a CSV result, comment lines and header removed.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn jsonl(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn abramov_roof_one_ratio_near_one() {
    let o = epflow(&["abramov", "--roof", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = jsonl(&stdout(&o));
    assert_eq!(lines.len(), 2);
    let ratio = lines[1]["ratio"].as_f64().unwrap();
    assert!((0.75..=1.25).contains(&ratio), "ratio {ratio}");
}

#[test]
fn census_rows_match_the_strip_formula() {
    let o = epflow(&["census", "--flow", "Z1", "--tmax-index", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 7);
    let two = BigUint::from(2u32);
    let mut strips = BigUint::from(0u32);
    for (row, n) in rows.iter().zip(2u32..=8) {
        strips += two.pow(2u32.pow(n) + 1) + 1u32;
        assert_eq!(row[0], n.to_string());
        // plus the fixed point and the boundary circle
        assert_eq!(row[3], (&strips + 2u32).to_string(), "n = {n}");
    }
}

#[test]
fn empty_command_line_is_invalid_input() {
    let o = epflow(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage:"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn unknown_experiment_is_invalid_input() {
    let o = epflow(&["nonesuch"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown experiment `nonesuch`"));
}

#[test]
fn every_csv_column_is_documented() {
    let o = epflow(&["bump-audit", "--samples", "200"]);
    let text = stdout(&o);
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    for name in header.split(',') {
        assert!(
            text.contains(&format!("# column {name}: ")),
            "{name} undocumented"
        );
    }
    assert!(text.contains("# experiment = bump-audit"));
    assert!(text.contains("# samples = 200"));
}

#[test]
fn outputs_are_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let path = dir.path().join(format!("run{i}.jsonl"));
        let o = epflow(&[
            "tear-mirror",
            "--samples",
            "12",
            "--seed",
            "3",
            "--threads",
            threads,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        texts.push(fs::read(&path).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    assert_eq!(texts[1], texts[2]);
}

#[test]
fn sidecar_records_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("census.csv");
    let o = epflow(&["census", "--tmax-index", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    let meta: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("census.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["experiment"], "census");
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["parameters"]["tmax-index"]["value"], "4");
    assert_eq!(meta["parameters"]["tmax-index"]["source"], "command line");
    assert_eq!(meta["parameters"]["flow"]["source"], "default");
    assert_eq!(meta["rows"], 3);
    assert!(meta["wall_time_secs"].as_f64().unwrap() >= 0.0);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_file_values_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.cfg",
        "# sphere census\nexperiment = sphere-census\nflow = Z2\ntmax-index = 5\nformat = jsonl\n",
    );
    let o = epflow(&["--config", &cfg, "--tmax-index", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = jsonl(&stdout(&o));
    assert_eq!(lines[0]["config"]["flow"], "Z2");
    assert_eq!(lines[0]["config"]["tmax-index"], "4");
    assert_eq!(lines.len(), 1 + 3);
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "roof = 1\n\nnot a pair\n");
    let o = epflow(&["abramov", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.cfg:3:"), "{}", stderr(&o));

    let cfg = write(dir.path(), "unknown.cfg", "roof = 1\nrooof = 2\n");
    let o = epflow(&["abramov", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("unknown.cfg:2: unknown key `rooof`"),
        "{}",
        stderr(&o)
    );

    let cfg = write(dir.path(), "range.cfg", "roof = 9\n");
    let o = epflow(&["abramov", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("range.cfg:1: key `roof`"), "{}", stderr(&o));
}

#[test]
fn low_confidence_has_its_own_exit_code() {
    let o = epflow(&["abramov", "--seeds", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("low-confidence"));
    let lines = jsonl(&stdout(&o));
    assert_eq!(lines[1]["low_confidence"], true);
}

#[test]
fn unwritable_output_is_an_internal_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("x.csv");
    let o = epflow(&["census", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn tear_residual_defaults_are_small() {
    let o = epflow(&["tear-residual"]);
    assert_eq!(o.status.code(), Some(0));
    let lines = jsonl(&stdout(&o));
    assert_eq!(lines.len(), 4);
    for l in &lines[1..] {
        assert!(l["residual"].as_f64().unwrap() <= 1e-4, "{l}");
    }
}

#[test]
fn csv_and_jsonl_carry_the_same_numbers() {
    let csv = stdout(&epflow(&[
        "ep-curve",
        "--flow",
        "Z2",
        "--tmax-index",
        "5",
        "--format",
        "csv",
    ]));
    let js = stdout(&epflow(&[
        "ep-curve",
        "--flow",
        "Z2",
        "--tmax-index",
        "5",
        "--format",
        "jsonl",
    ]));
    let rows = csv_rows(&csv);
    let lines = jsonl(&js);
    assert_eq!(rows.len(), lines.len() - 1);
    for (r, l) in rows.iter().zip(&lines[1..]) {
        assert_eq!(r[3].parse::<f64>().unwrap(), l["ep_estimate"].as_f64().unwrap());
    }
}
