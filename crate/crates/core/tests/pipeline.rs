use std::path::{Path, PathBuf};

use invcast::config::LoadedConfig;
use invcast::pipeline;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic")
}

fn run_into(out: &Path) -> pipeline::RunOutcome {
    let mut loaded = LoadedConfig::from_path(&fixture_dir().join("config.toml")).unwrap();
    loaded.config.output_dir = out.to_path_buf();
    pipeline::run(&loaded).unwrap()
}

fn listed_outputs(dir: &Path) -> Vec<String> {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let mut files: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    files.push("manifest.json".into());
    files
}

#[test]
fn matches_golden_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(tmp.path());
    let golden = fixture_dir().join("golden");
    let files = listed_outputs(&golden);
    assert_eq!(files, listed_outputs(tmp.path()));
    for f in files {
        let want = std::fs::read_to_string(golden.join(&f)).unwrap();
        let got = std::fs::read_to_string(tmp.path().join(&f)).unwrap();
        assert!(want == got, "{f} differs from the golden copy");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into(a.path());
    run_into(b.path());
    for f in listed_outputs(a.path()) {
        assert_eq!(
            std::fs::read(a.path().join(&f)).unwrap(),
            std::fs::read(b.path().join(&f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn native_models_beat_naive_on_synthetic_panel() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path());
    let cost = |m: &str| out.report.row(m, 5.0).unwrap().avg_cost;
    for m in ["holt_winters", "arima", "gbr"] {
        assert!(cost(m) < cost("naive"), "{m}");
    }
    assert_eq!(out.n_series, 8);
    assert_eq!(out.echelon.len(), 5);
}

#[test]
fn failed_run_leaves_partial_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut loaded = LoadedConfig::from_path(&fixture_dir().join("config.toml")).unwrap();
    loaded.config.output_dir = tmp.path().to_path_buf();
    loaded.config.split.test_days = 190;
    assert!(pipeline::run(&loaded).is_err());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "failed");
    assert!(manifest["error"].as_str().unwrap().contains("insufficient history"));
}

#[test]
fn external_file_scored_against_naive() {
    let loaded = LoadedConfig::from_path(&fixture_dir().join("config.toml")).unwrap();
    let report =
        pipeline::score_external(&loaded.config, &fixture_dir().join("seasonal_7_test.csv"), "seasonal_7").unwrap();
    assert_eq!(report.accuracy.len(), 2);
    assert!(report.row("seasonal_7", 5.0).is_some());
}

#[test]
fn feature_export_has_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let mut loaded = LoadedConfig::from_path(&fixture_dir().join("config.toml")).unwrap();
    loaded.config.output_dir = tmp.path().to_path_buf();
    let path = pipeline::export_features(&loaded.config).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("item_id,dept_id,store_id,state_id,d,target,lag_1"));
    // the first 28 days of each series lack full lag history
    assert_eq!(lines.count(), 8 * (200 - 28));
}
