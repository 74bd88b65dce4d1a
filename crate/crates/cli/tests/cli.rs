//! End-to-end runs of the `trendmap` binary on the bundled fixture.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// The fixture config with absolute input paths and `overrides` applied.
fn config(dir: &Path, overrides: &[(&str, &str)]) -> PathBuf {
    let text = fs::read_to_string(fixtures().join("fixture.conf")).unwrap();
    let mut keys: BTreeMap<String, String> = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && l.contains('='))
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.trim().to_string(), v.trim().to_string())
        })
        .collect();
    for k in ["flows", "dhcp", "sessions", "domain_map"] {
        let abs = fixtures().join(&keys[k]);
        keys.insert(k.into(), abs.display().to_string());
    }
    for (k, v) in overrides {
        keys.insert(k.to_string(), v.to_string());
    }
    let body: String = keys.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    let path = dir.join("run.conf");
    fs::write(&path, body).unwrap();
    path
}

fn trendmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trendmap")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = trendmap(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// All files under `dir`, relative path → contents.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn ingest_matches_golden_files() {
    let tmp = TempDir::new().unwrap();
    let conf = config(tmp.path(), &[]);
    let out = tmp.path().join("out");
    run_ok(&["ingest", "--config", s(&conf), "--out", s(&out)]);
    for name in ["usage.csv", "ingest_report.txt"] {
        let golden = fs::read(fixtures().join("golden").join(name)).unwrap();
        assert!(fs::read(out.join(name)).unwrap() == golden, "{name} differs from the golden copy");
    }
}

#[test]
fn empty_flow_file_is_not_an_error() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let conf = config(tmp.path(), &[("flows", s(&empty))]);
    let out = tmp.path().join("out");
    let res = run_ok(&["ingest", "--config", s(&conf), "--out", s(&out)]);
    assert!(String::from_utf8_lossy(&res.stderr).contains("no flows"));
    let usage = fs::read_to_string(out.join("usage.csv")).unwrap();
    assert_eq!(usage.lines().count(), 1, "header only");
}

#[test]
fn wrong_delimiter_is_a_format_error() {
    let tmp = TempDir::new().unwrap();
    let conf = config(tmp.path(), &[("delimiter", "comma")]);
    let res = trendmap(&["ingest", "--config", s(&conf), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("flows.txt"));
}

#[test]
fn missing_input_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let conf = config(tmp.path(), &[("dhcp", "/nonexistent/dhcp.csv")]);
    let res = trendmap(&["ingest", "--config", s(&conf), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(res.status.code(), Some(5));
    assert!(!tmp.path().join("out").exists(), "nothing is written before inputs are checked");
}

#[test]
fn bad_config_and_flags_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let conf = config(tmp.path(), &[("units", "0")]);
    assert_eq!(trendmap(&["ingest", "--config", s(&conf)]).status.code(), Some(2));
    assert_eq!(trendmap(&["train", "--aspect", "time"]).status.code(), Some(2));
    assert_eq!(trendmap(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn zero_samples_is_rejected_before_any_work() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let res = trendmap(&["simulate", "--model", "/nonexistent.model", "-n", "0", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

fn ingest_and_train(tmp: &Path, overrides: &[(&str, &str)], aspect: &str) -> (PathBuf, PathBuf) {
    let conf = config(tmp, overrides);
    let out = tmp.join("out");
    run_ok(&["ingest", "--config", s(&conf), "--out", s(&out)]);
    run_ok(&["train", "--config", s(&conf), "--out", s(&out), "--aspect", aspect]);
    (conf, out)
}

#[test]
fn full_pipeline_is_byte_identical_across_runs() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let tmp = TempDir::new().unwrap();
            let (conf, out) = ingest_and_train(tmp.path(), &[], "domain");
            let model = out.join("som_domain.model");
            run_ok(&["analyze", "--config", s(&conf), "--out", s(&out), "--model", s(&model)]);
            run_ok(&["simulate", "--config", s(&conf), "--out", s(&out), "--model", s(&model), "-n", "40"]);
            let snap = snapshot(&out);
            (tmp, snap)
        })
        .collect();
    assert!(runs[0].1.len() > 20);
    assert_eq!(runs[0].1.keys().collect::<Vec<_>>(), runs[1].1.keys().collect::<Vec<_>>());
    for (k, v) in &runs[0].1 {
        assert!(runs[1].1[k] == *v, "{} differs between runs", k.display());
    }
}

#[test]
fn seed_flag_changes_the_model() {
    let tmp = TempDir::new().unwrap();
    let (conf, out) = ingest_and_train(tmp.path(), &[], "domain");
    let first = fs::read(out.join("som_domain.model")).unwrap();
    run_ok(&["train", "--config", s(&conf), "--out", s(&out), "--seed", "99"]);
    assert_ne!(first, fs::read(out.join("som_domain.model")).unwrap());
}

#[test]
fn unknown_feature_lists_the_available_ones() {
    let tmp = TempDir::new().unwrap();
    let (conf, out) = ingest_and_train(tmp.path(), &[], "domain");
    let model = out.join("som_domain.model");
    let res = trendmap(&[
        "analyze", "--config", s(&conf), "--out", s(&out), "--model", s(&model), "--feature", "myspace.com",
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("myspace.com") && err.contains("google.com"), "{err}");
    assert!(!out.join("analysis_som_domain").exists());

    run_ok(&[
        "analyze", "--config", s(&conf), "--out", s(&out), "--model", s(&model), "--feature", "usc.edu",
    ]);
    let maps = snapshot(&out.join("analysis_som_domain/feature_maps"));
    let names: Vec<_> = maps.keys().map(|p| p.display().to_string()).collect();
    assert_eq!(names, ["usc.edu.grid", "usc.edu.png"]);
}

#[test]
fn one_node_map_gives_degenerate_outputs() {
    let tmp = TempDir::new().unwrap();
    let (conf, out) = ingest_and_train(tmp.path(), &[("rows", "1"), ("cols", "1")], "location");
    let model = out.join("som_location.model");
    run_ok(&["analyze", "--config", s(&conf), "--out", s(&out), "--model", s(&model)]);
    let dir = out.join("analysis_som_location");
    let u = image::open(dir.join("umatrix.png")).unwrap();
    assert_eq!((u.width(), u.height()), (8, 8));
    let trends = fs::read_to_string(dir.join("trends.csv")).unwrap();
    assert_eq!(trends, "node_row,node_col,cluster_id\n0,0,0\n");

    run_ok(&["simulate", "--config", s(&conf), "--out", s(&out), "--model", s(&model), "-n", "5"]);
    let alpha = fs::read_to_string(out.join("sim_som_location/alpha.grid")).unwrap();
    assert!(alpha.contains("shape 1 1\n") && alpha.contains("\n1.0\n"), "{alpha}");
}

#[test]
fn alpha_grid_has_the_map_shape() {
    let tmp = TempDir::new().unwrap();
    let (conf, out) = ingest_and_train(tmp.path(), &[("rows", "3"), ("cols", "4"), ("cell", "5")], "multi");
    let model = out.join("som_multi.model");
    run_ok(&["simulate", "--config", s(&conf), "--out", s(&out), "--model", s(&model), "-n", "10"]);
    let dir = out.join("sim_som_multi");
    let alpha = fs::read_to_string(dir.join("alpha.grid")).unwrap();
    assert!(alpha.contains("shape 3 4\n"));
    let total: f64 = alpha
        .lines()
        .skip_while(|l| *l != "data")
        .skip(1)
        .take_while(|l| *l != "end")
        .flat_map(|l| l.split_whitespace().map(|v| v.parse::<f64>().unwrap()))
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
    let img = image::open(dir.join("alpha.png")).unwrap();
    assert_eq!((img.width(), img.height()), (4 * 5, 3 * 5));
    let usage = fs::read_to_string(dir.join("usage.csv")).unwrap();
    assert!(usage.lines().skip(1).all(|l| l.starts_with("02:00:00:") && !l.contains("UNKNOWN")));
}

#[test]
fn corrupt_model_names_the_failed_section() {
    let tmp = TempDir::new().unwrap();
    let (conf, out) = ingest_and_train(tmp.path(), &[], "domain");
    let model = out.join("som_domain.model");
    let text = fs::read_to_string(&model).unwrap();
    let broken = text.replacen("weights", "weighs", 1);
    fs::write(&model, broken).unwrap();
    let res = trendmap(&["analyze", "--config", s(&conf), "--out", s(&out), "--model", s(&model)]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("weights"));
}
