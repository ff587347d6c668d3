use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use invcast_ffi::*;

fn fixture(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/synthetic").join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = invcast_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load() -> *mut InvcastPanel {
    let mut panel = ptr::null_mut();
    let status = unsafe {
        invcast_panel_load(
            fixture("sales_train_validation.csv").as_ptr(),
            fixture("calendar.csv").as_ptr(),
            ptr::null(),
            &mut panel,
        )
    };
    assert_eq!(status, InvcastStatus::Ok);
    panel
}

#[test]
fn naive_pipeline_through_handles() {
    let panel = load();
    unsafe {
        assert_eq!(invcast_panel_n_series(panel), 8);
        assert_eq!(invcast_panel_n_days(panel), 200);
        let mut s = InvcastSplits::default();
        assert_eq!(invcast_panel_splits(panel, 28, 28, &mut s), InvcastStatus::Ok);
        assert_eq!((s.test_first, s.test_last), (173, 200));

        let mut fs = ptr::null_mut();
        assert_eq!(invcast_forecast_naive(panel, s.test_first, 28, &mut fs), InvcastStatus::Ok);
        let mut acc = InvcastAccuracy::default();
        assert_eq!(invcast_accuracy(fs, panel, &mut acc), InvcastStatus::Ok);
        assert_eq!(acc.n_points, 8 * 28);

        let mut sim = InvcastSimResult::default();
        assert_eq!(invcast_simulate(fs, panel, 1.0, 5.0, false, &mut sim), InvcastStatus::Ok);
        assert!(sim.avg_cost > 0.0 && (0.0..=1.0).contains(&sim.fill_rate));

        let stores: Vec<usize> = vec![0, 1];
        let mut net = InvcastNetworkResult::default();
        assert_eq!(
            invcast_simulate_network(fs, panel, stores.as_ptr(), 2, 1.0, 5.0, 5.0, 0.0, &mut net),
            InvcastStatus::Ok
        );
        assert!((0.0..=1.0).contains(&net.network_fill_rate));

        let mut n = 0usize;
        assert_eq!(invcast_forecast_values(fs, ptr::null_mut(), 0, &mut n), InvcastStatus::Ok);
        let mut buf = vec![0.0; n];
        assert_eq!(invcast_forecast_values(fs, buf.as_mut_ptr(), n, &mut n), InvcastStatus::Ok);
        let mut d = 0.0;
        assert_eq!(invcast_panel_demand(panel, 0, s.test_first - 1, &mut d), InvcastStatus::Ok);
        assert_eq!(buf[0], d);

        invcast_forecast_free(fs);
        invcast_panel_free(panel);
    }
}

#[test]
fn forecast_file_round_trip() {
    let panel = load();
    let tmp = tempfile::tempdir().unwrap();
    let path = CString::new(tmp.path().join("f.csv").to_str().unwrap()).unwrap();
    unsafe {
        let values: Vec<f64> = (0..8 * 3).map(|k| k as f64 * 0.5).collect();
        let name = CString::new("mine").unwrap();
        let mut fs = ptr::null_mut();
        assert_eq!(
            invcast_forecast_new(panel, name.as_ptr(), 1, 190, 3, values.as_ptr(), values.len(), &mut fs),
            InvcastStatus::Ok
        );
        assert_eq!(invcast_forecast_export(fs, path.as_ptr()), InvcastStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(invcast_forecast_import(path.as_ptr(), panel, 190, 3, &mut back), InvcastStatus::Ok);
        let mut got = vec![0.0; values.len()];
        let mut n = 0;
        assert_eq!(invcast_forecast_values(back, got.as_mut_ptr(), got.len(), &mut n), InvcastStatus::Ok);
        assert_eq!(got, values);

        // the file does not cover a wider window
        let mut wide = ptr::null_mut();
        assert_eq!(invcast_forecast_import(path.as_ptr(), panel, 190, 4, &mut wide), InvcastStatus::Coverage);
        assert!(wide.is_null());
        invcast_forecast_free(back);
        invcast_forecast_free(fs);
        invcast_panel_free(panel);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut panel = ptr::null_mut();
        let missing = CString::new("/nonexistent/sales.csv").unwrap();
        assert_eq!(
            invcast_panel_load(missing.as_ptr(), missing.as_ptr(), ptr::null(), &mut panel),
            InvcastStatus::Io
        );
        assert!(last_error().contains("/nonexistent/sales.csv"));
        assert_eq!(
            invcast_panel_load(ptr::null(), ptr::null(), ptr::null(), &mut panel),
            InvcastStatus::NullPointer
        );
        let mut c = 0.0;
        assert_eq!(invcast_period_cost(1.0, 2.0, 1.0, -1.0, &mut c), InvcastStatus::InvalidParameter);
        assert_eq!(invcast_period_cost(3.0, 5.0, 1.0, 5.0, &mut c), InvcastStatus::Ok);
        assert_eq!(c, 10.0);
        assert!(invcast_last_error().is_null());

        let panel = load();
        let mut fs = ptr::null_mut();
        assert_eq!(invcast_forecast_naive(panel, 1, 5, &mut fs), InvcastStatus::WindowMismatch);
        invcast_panel_free(panel);
    }
}

#[test]
fn allocation_rations_proportionally() {
    let req = [6.0, 2.0];
    let mut out = [0.0; 2];
    unsafe {
        assert_eq!(invcast_allocate(req.as_ptr(), 2, 4.0, out.as_mut_ptr()), InvcastStatus::Ok);
    }
    assert!((out[0] - 3.0).abs() < 1e-8 && (out[1] - 1.0).abs() < 1e-8);
}

#[test]
fn run_reports_config_problems() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "output_dir = \"out\"\n[data]\nsales = \"x.csv\"\ncalendar = \"y.csv\"\n").unwrap();
    let c = CString::new(cfg.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { invcast_run(c.as_ptr()) }, InvcastStatus::Config);
    assert!(last_error().contains("data.sales"));
}

#[test]
fn header_is_current_and_compiles_from_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/invcast.h")).unwrap();
    for sym in ["invcast_panel_load", "invcast_simulate_network", "invcast_run", "INVCAST_STATUS_PANIC"] {
        assert!(header.contains(sym), "{sym} missing from header");
    }

    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping C link check");
        return;
    };
    // the test binary lives in target/<profile>/deps; the cdylib one level up
    let exe = std::env::current_exe().unwrap();
    let lib_dir: PathBuf = exe.parent().unwrap().parent().unwrap().to_path_buf();
    if !lib_dir.join("libinvcast_ffi.so").exists() && !lib_dir.join("libinvcast_ffi.dylib").exists() {
        eprintln!("shared library not found in {}; skipping C link check", lib_dir.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "invcast.h"
int main(void) {
    double out[2];
    double req[2] = {6.0, 2.0};
    double cost = 0.0;
    if (invcast_allocate(req, 2, 4.0, out) != INVCAST_STATUS_OK) return 1;
    if (invcast_period_cost(3.0, 5.0, 1.0, 5.0, &cost) != INVCAST_STATUS_OK || cost != 10.0) return 2;
    if (invcast_period_cost(3.0, 5.0, 1.0, -5.0, &cost) != INVCAST_STATUS_INVALID_PARAMETER) return 3;
    if (invcast_last_error() == NULL) return 4;
    printf("%s %.6f %.6f\n", invcast_version(), out[0], out[1]);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = tmp.path().join("smoke");
    let status = std::process::Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(dir.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg("-linvcast_ffi")
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke program failed to compile");
    let out = std::process::Command::new(&bin)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .env("DYLD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).contains("3.000000 1.000000"));
}
