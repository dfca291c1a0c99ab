use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use conelab::Record;

fn conelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conelab")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn cli_over_file_over_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# reconstruction, small\nseed = 5\nsamples = 2000\nlambda = 0.5\n").unwrap();
    let out = tmp.path().join("store");
    let o = conelab(&["reconstruct", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&out, "summary-reconstruct-9.json");
    assert_eq!(s["config"]["seed"], 9);
    assert_eq!(s["config"]["samples"], 2000);
    assert_eq!(s["config"]["lambda"], 0.5);
    assert_eq!(s["config"]["n"], 3);
    assert_eq!(s["threshold_table"], conelab::thresholds::TABLE_VERSION);
    assert!(s["thresholds"].as_array().unwrap().iter().any(|t| t["id"] == "C1.residual"));
}

#[test]
fn schema_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "delta = 0.1, abc\n").unwrap();
    let o = conelab(&["sphere-sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config.delta[1]"), "{}", stderr(&o));

    fs::write(&cfg, "bogus = 1\n").unwrap();
    let o = conelab(&["sphere-sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config.bogus"), "{}", stderr(&o));

    let o = conelab(&["slice-volume", "--n", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config.n"), "{}", stderr(&o));

    let o = conelab(&["converge", "--N", "100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config.N"), "{}", stderr(&o));

    let o = conelab(&["reconstruct", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_grids_are_refused_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("store");
    let o = conelab(&["converge", "--N", "2048", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("resource cap"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn report_exit_codes_and_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("store");
    let dir = out.to_str().unwrap();
    assert_eq!(conelab(&["reconstruct", "--samples", "2000", "--out", dir]).status.code(), Some(0));
    let o = conelab(&["report", "--store", dir]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(table.contains("max_residual") && table.contains("<= 1e-12"));
    assert!(out.join("report.json").exists());

    // a failing point: the weight lies outside the trace window
    let o = conelab(&["trace-sweep", "--alpha", "2.5", "--beta", "0.1", "--out", dir]);
    assert_eq!(o.status.code(), Some(1));
    let o = conelab(&["report", "--store", dir]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ERROR"));

    let o = conelab(&["report", "--store", dir, "--scenario", "reconstruct"]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(!stdout.contains("trace-sweep"));
    let rep = summary(&out, "report.json");
    assert!(rep["rows"].as_array().unwrap().iter().all(|r| r["scenario"] == "reconstruct"));

    let o = conelab(&["report", "--store", dir, "--scenario", "ortho-check"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("empty report"), "{}", stderr(&o));
}

#[test]
fn failing_point_leaves_the_rest_of_the_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("store");
    // at delta = 2^-10 only ring 1 satisfies l <= 1/(1000 delta)
    let o = conelab(&["slice-volume", "--delta", "0.0009765625", "--samples", "200", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let recs = conelab::store::read_records(&out).unwrap();
    let errors = recs.iter().filter(|r| r.verdict == conelab::Verdict::Error).count();
    assert_eq!(errors, 63);
    assert!(recs.iter().any(|r| r.quantity == "error:l=2"));
    let slices = recs.iter().find(|r| r.quantity == "nonempty_slices").unwrap();
    assert!(slices.value > 0.0);
    // the runtime row is still written
    assert!(recs.iter().any(|r| r.quantity == "runtime_s"));
}

#[test]
fn same_config_same_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let read = |name: &str, scenario: &str, extra: &[&str]| {
        let out = tmp.path().join(name);
        let mut args = vec![scenario, "--timing", "false", "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = conelab(&args);
        assert!(o.status.code().is_some_and(|c| c < 2), "{}", stderr(&o));
        fs::read(out.join("results.csv")).unwrap()
    };
    let a = read("a", "reconstruct", &["--samples", "30000"]);
    let b = read("b", "reconstruct", &["--samples", "30000"]);
    assert_eq!(a, b);
    let a = read("c", "square-bound", &["--samples", "4"]);
    let b = read("d", "square-bound", &["--samples", "4"]);
    assert_eq!(a, b);
    let c = read("e", "square-bound", &["--samples", "4", "--seed", "3"]);
    assert_ne!(a, c);
    let recs: Vec<Record> = conelab::store::read_records(&tmp.path().join("c")).unwrap();
    assert!(recs.iter().all(|r| r.runtime_ms.is_none()));
}
