use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic").join(name)
}

fn invcast() -> Command {
    Command::new(env!("CARGO_BIN_EXE_invcast"))
}

#[test]
fn validate_accepts_fixture_config() {
    let out = invcast().arg("validate").arg(fixture("config.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_rejects_bad_config_with_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = std::fs::read_to_string(fixture("config.toml"))
        .unwrap()
        .replace("b_values = [2.0, 5.0, 10.0]", "b_values = []")
        .replace("\"sales_train_validation.csv\"", &format!("{:?}", fixture("sales_train_validation.csv")))
        .replace("\"calendar.csv\"", &format!("{:?}", fixture("calendar.csv")))
        .replace("\"seasonal_7_test.csv\"", &format!("{:?}", fixture("seasonal_7_test.csv")));
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, cfg).unwrap();
    let out = invcast().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.b_values"));
}

#[test]
fn malformed_forecast_file_is_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "item_id,dept_id,store_id,state_id,d,forecast\nNOPE,FOODS_1,CA_1,CA,d_173,1\n").unwrap();
    let out = invcast()
        .arg("import-forecasts")
        .arg(fixture("config.toml"))
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reference error"));
}

#[test]
fn run_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = invcast()
        .arg("run")
        .arg(fixture("config.toml"))
        .env("INVCAST_OUTPUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Cost ranking per b"));
    assert!(tmp.path().join("manifest.json").is_file());
}
