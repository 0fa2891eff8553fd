//! End-to-end behaviour of the `hyperdsf` binary: exit codes, error messages
//! and file contents.

use std::path::Path;
use std::process::{Command, Output};

use hyperdsf::forest::Forest;
use hyperdsf::stats::ExperimentConfig;

fn hyperdsf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperdsf"))
        .args(args)
        .current_dir(dir)
        .env_remove("HYPERDSF_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FIXTURE: &str = r#"{
 "dim": 1, "lambda": 1.0, "seed": 0,
 "window": {"R": 20.0, "y_lo": 0.5, "y_hi": 3.0},
 "points": [[0.0, 1.0], [10.0, 1.5], [0.0, 2.0]]
}"#;

#[test]
fn sample_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "--dim", "1", "--lambda", "1", "--r", "1", "--ylo", "1", "--yhi", "2.71828", "--seed", "42"];
    for out in ["a.json", "b.json"] {
        let mut a = args.to_vec();
        a.extend(["--out", out]);
        assert!(hyperdsf(dir.path(), &a).status.success());
    }
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert!(dir.path().join("a.json.manifest.json").exists());
}

#[test]
fn zero_lower_height_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = hyperdsf(dir.path(), &["sample", "--dim", "1", "--lambda", "1", "--r", "1", "--ylo", "0", "--yhi", "2", "--seed", "1", "--out", "c.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("y_lo"), "{}", stderr(&o));
    assert!(!dir.path().join("c.json").exists());
}

#[test]
fn oversized_request_names_the_expected_count() {
    let dir = tempfile::tempdir().unwrap();
    // measure = 2R (1/y_lo - 1/y_hi) = 2e6 (1e6 - 0.5) ≈ 2.000e12
    let o = hyperdsf(dir.path(), &["sample", "--dim", "1", "--lambda", "1", "--r", "1e6", "--ylo", "1e-6", "--yhi", "2", "--seed", "1", "--out", "c.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("2.000e12"), "{}", stderr(&o));
}

#[test]
fn build_matches_fixture_and_embeds_verification() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), FIXTURE).unwrap();
    let o = hyperdsf(dir.path(), &["build", "--in", "c.json", "--out", "f.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("f.json")).unwrap();
    let forest = Forest::<f64>::from_json(&text).unwrap();
    let parents: Vec<Option<usize>> = forest.parents().iter().map(|e| e.index()).collect();
    assert_eq!(parents, vec![Some(2), Some(2), None]);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["verification"]["pass"], true);
    assert_eq!(doc["verification"]["noncrossing"]["crossings"].as_array().unwrap().len(), 0);
}

#[test]
fn empty_cloud_builds_and_renders() {
    let dir = tempfile::tempdir().unwrap();
    let empty = r#"{"dim": 1, "lambda": 1.0, "seed": 0, "window": {"R": 1.0, "y_lo": 1.0, "y_hi": 2.0}, "points": []}"#;
    std::fs::write(dir.path().join("c.json"), empty).unwrap();
    assert!(hyperdsf(dir.path(), &["build", "--in", "c.json", "--out", "f.json"]).status.success());
    assert!(hyperdsf(dir.path(), &["render", "--in", "f.json", "--out", "f.svg"]).status.success());
    let svg = std::fs::read_to_string(dir.path().join("f.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(!svg.contains("<line") && !svg.contains("<circle"));
}

#[test]
fn corrupted_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), "{\n \"dim\": 1,\n \"lambda\": oops\n}").unwrap();
    let o = hyperdsf(dir.path(), &["build", "--in", "c.json", "--out", "f.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    std::fs::write(dir.path().join("d.json"), FIXTURE.replace("\"lambda\"", "\"lambada\"")).unwrap();
    let o = hyperdsf(dir.path(), &["build", "--in", "d.json", "--out", "f.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambada"), "{}", stderr(&o));
}

#[test]
fn render_fixture_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), FIXTURE).unwrap();
    assert!(hyperdsf(dir.path(), &["build", "--in", "c.json", "--out", "f.json"]).status.success());
    for out in ["a.svg", "b.svg"] {
        assert!(hyperdsf(dir.path(), &["render", "--in", "f.json", "--out", out, "--ymax", "3"]).status.success());
    }
    let a = std::fs::read_to_string(dir.path().join("a.svg")).unwrap();
    assert_eq!(a, std::fs::read_to_string(dir.path().join("b.svg")).unwrap());
    assert_eq!(a.matches("<line").count(), 2);
    assert_eq!(a.matches("<circle").count(), 3);
}

#[test]
fn render_rejects_plane_forests() {
    let dir = tempfile::tempdir().unwrap();
    let plane = r#"{"dim": 2, "lambda": 1.0, "seed": 0, "window": {"R": 1.0, "y_lo": 1.0, "y_hi": 2.0}, "points": [[0.0, 0.0, 1.5]]}"#;
    std::fs::write(dir.path().join("c.json"), plane).unwrap();
    assert!(hyperdsf(dir.path(), &["build", "--in", "c.json", "--out", "f.json"]).status.success());
    let o = hyperdsf(dir.path(), &["render", "--in", "f.json", "--out", "f.svg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unsupported dimension 2"), "{}", stderr(&o));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = hyperdsf(dir.path(), &["verify", "--suite", "everything", "--out-dir", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("geometry"), "{}", stderr(&o));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let desk = ExperimentConfig::desk().to_toml();
    assert!(desk.contains("lambda = 1.0"));
    std::fs::write(dir.path().join("bad.toml"), desk.replace("lambda = 1.0", "lambda = -2.0")).unwrap();
    let o = hyperdsf(dir.path(), &["verify", "--config", "bad.toml", "--suite", "geometry", "--out-dir", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda"), "{}", stderr(&o));

    std::fs::write(dir.path().join("typo.toml"), format!("replicate = 3\n{desk}")).unwrap();
    let o = hyperdsf(dir.path(), &["verify", "--config", "typo.toml", "--suite", "geometry", "--out-dir", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1") && stderr(&o).contains("replicate"), "{}", stderr(&o));
}

#[test]
fn geometry_suite_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = hyperdsf(dir.path(), &["--threads", "1", "verify", "--suite", "geometry", "--out-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    for check in summary["checks"].as_array().unwrap() {
        for key in ["check", "params", "estimate", "std_error", "bound", "pass"] {
            assert!(check.get(key).is_some(), "{key} missing in {check}");
        }
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["config"]["seed"], ExperimentConfig::desk().seed);
}

fn small_config(dir: &Path) {
    let mut config = ExperimentConfig::desk();
    config.replicates = 8;
    std::fs::write(dir.join("small.toml"), config.to_toml()).unwrap();
}

#[test]
fn injected_exponent_error_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let o = hyperdsf(dir.path(), &["verify", "--config", "small.toml", "--suite", "identities", "--out-dir", "out", "--inject-exponent-error"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("FAIL descendant_count"), "{}", stderr(&o));
}

#[test]
fn rows_csv_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let o = hyperdsf(dir.path(), &["verify", "--config", "small.toml", "--suite", "identities", "--out-dir", "out"]);
    assert!(o.status.code().is_some_and(|c| c <= 1), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/rows.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "seed,replicate,statistic,level,lower_level,half_width,value,censored");
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true") || l.ends_with(",false")));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hyperdsf"))
        .args(["verify", "--suite", "geometry", "--out-dir", "out"])
        .current_dir(dir.path())
        .env("HYPERDSF_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "zero threads must be refused");
    let o = Command::new(env!("CARGO_BIN_EXE_hyperdsf"))
        .args(["verify", "--suite", "geometry", "--out-dir", "out"])
        .current_dir(dir.path())
        .env("HYPERDSF_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}
