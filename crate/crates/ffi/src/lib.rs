//! C ABI over the invcast library.
//!
//! Panels and forecast sets cross the boundary as opaque handles created by
//! `*_load` / `*_new` style functions and released with the matching `*_free`.
//! Every fallible function returns an [`InvcastStatus`]; on failure the
//! message is available from [`invcast_last_error`] on the same thread.
//! Panics never unwind into C: they are caught and reported as
//! `INVCAST_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use libc::{c_char, c_double, size_t};

use invcast::config::LoadedConfig;
use invcast::echelon2::{allocate, simulate_network, EchelonConfig};
use invcast::forecast::{naive_forecast, ForecastSet, Split};
use invcast::forecast_io::{export_forecasts, import_forecasts};
use invcast::metrics::accuracy;
use invcast::newsvendor::{period_cost, simulate_with, CostParams, SimOptions};
use invcast::panel::{load_panel, make_splits, DayWindow, SeriesPanel, SubsetFilter};
use invcast::{pipeline, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvcastStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    Coverage = 5,
    Parse = 6,
    Reference = 7,
    InsufficientHistory = 8,
    InvalidParameter = 9,
    Leakage = 10,
    EmptyWindow = 11,
    WindowMismatch = 12,
    NotConverged = 13,
    Config = 14,
    Panic = 99,
}

impl From<&Error> for InvcastStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => InvcastStatus::Io,
            Error::Csv(_) | Error::Format(_) => InvcastStatus::Format,
            Error::Coverage(_) => InvcastStatus::Coverage,
            Error::Parse { .. } => InvcastStatus::Parse,
            Error::Reference(_) => InvcastStatus::Reference,
            Error::InsufficientHistory { .. } => InvcastStatus::InsufficientHistory,
            Error::InvalidParameter(_) => InvcastStatus::InvalidParameter,
            Error::Leakage(_) => InvcastStatus::Leakage,
            Error::EmptyWindow => InvcastStatus::EmptyWindow,
            Error::WindowMismatch(_) => InvcastStatus::WindowMismatch,
            Error::NotConverged { .. } => InvcastStatus::NotConverged,
            Error::Config(_) => InvcastStatus::Config,
        }
    }
}

/// Opaque demand panel.
pub struct InvcastPanel(SeriesPanel);

/// Opaque set of point forecasts over one window.
pub struct InvcastForecastSet(ForecastSet);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct InvcastSplits {
    pub train_first: u32,
    pub train_last: u32,
    pub valid_first: u32,
    pub valid_last: u32,
    pub test_first: u32,
    pub test_last: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct InvcastAccuracy {
    pub rmse: c_double,
    pub mae: c_double,
    pub mape: c_double,
    pub mape_unreliable: bool,
    pub n_points: size_t,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct InvcastSimResult {
    pub avg_cost: c_double,
    pub fill_rate: c_double,
    pub total_overage_units: c_double,
    pub total_shortage_units: c_double,
    pub total_demand: c_double,
    pub n_cells: size_t,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct InvcastNetworkResult {
    pub avg_network_cost: c_double,
    pub network_fill_rate: c_double,
    pub total_fulfilled: c_double,
    pub total_demand: c_double,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(InvcastStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn null(what: &str) -> Failure {
    Failure(InvcastStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> InvcastStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => InvcastStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            InvcastStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(InvcastStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

fn split_from(code: u32) -> FfiResult<Split> {
    match code {
        0 => Ok(Split::Validation),
        1 => Ok(Split::Test),
        other => Err(Failure(InvcastStatus::InvalidParameter, format!("unknown split code {other}"))),
    }
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next invcast call on the same thread.
#[no_mangle]
pub extern "C" fn invcast_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn invcast_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads an M5-style sales file and calendar. `filter` may be NULL or a
/// string such as `"state_id=CA,dept_id=FOODS_1"`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn invcast_panel_load(
    sales_path: *const c_char,
    calendar_path: *const c_char,
    filter: *const c_char,
    out: *mut *mut InvcastPanel,
) -> InvcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let sales = PathBuf::from(str_arg(sales_path, "sales_path")?);
        let calendar = PathBuf::from(str_arg(calendar_path, "calendar_path")?);
        let filter: SubsetFilter = if filter.is_null() {
            SubsetFilter::all()
        } else {
            str_arg(filter, "filter")?.parse()?
        };
        let panel = load_panel(&sales, &calendar, &filter)?;
        *out = Box::into_raw(Box::new(InvcastPanel(panel)));
        Ok(())
    })
}

/// # Safety
/// `panel` must come from [`invcast_panel_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn invcast_panel_free(panel: *mut InvcastPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Number of series, or 0 for a NULL handle.
///
/// # Safety
/// `panel` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn invcast_panel_n_series(panel: *const InvcastPanel) -> size_t {
    panel.as_ref().map_or(0, |p| p.0.n_series())
}

/// Number of days, or 0 for a NULL handle.
///
/// # Safety
/// `panel` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn invcast_panel_n_days(panel: *const InvcastPanel) -> size_t {
    panel.as_ref().map_or(0, |p| p.0.n_days())
}

/// Realized demand of `series` on day ordinal `d` (the N in `d_N`).
///
/// # Safety
/// `panel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn invcast_panel_demand(
    panel: *const InvcastPanel,
    series: size_t,
    d: u32,
    out: *mut c_double,
) -> InvcastStatus {
    guard(|| {
        let p = &ref_arg(panel, "panel")?.0;
        let out = out_arg(out, "out")?;
        if series >= p.n_series() || p.day_pos(d).is_none() {
            return Err(Failure(
                InvcastStatus::WindowMismatch,
                format!("cell (series {series}, d_{d}) outside the panel"),
            ));
        }
        *out = p.demand(series, d);
        Ok(())
    })
}

/// Chronological train / validation / test boundaries (inclusive day ordinals).
///
/// # Safety
/// `panel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn invcast_panel_splits(
    panel: *const InvcastPanel,
    valid_days: size_t,
    test_days: size_t,
    out: *mut InvcastSplits,
) -> InvcastStatus {
    guard(|| {
        let p = &ref_arg(panel, "panel")?.0;
        let out = out_arg(out, "out")?;
        let s = make_splits(p, valid_days, test_days)?;
        *out = InvcastSplits {
            train_first: s.first_d,
            train_last: s.train_end,
            valid_first: s.train_end + 1,
            valid_last: s.valid_end,
            test_first: s.valid_end + 1,
            test_last: s.test_end,
        };
        Ok(())
    })
}

/// Builds a forecast set from a row-major `n_series × len` array. `split` is
/// 0 for validation, 1 for test.
///
/// # Safety
/// `values` must point to `n_values` doubles; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn invcast_forecast_new(
    panel: *const InvcastPanel,
    model_name: *const c_char,
    split: u32,
    first_d: u32,
    len: u32,
    values: *const c_double,
    n_values: size_t,
    out: *mut *mut InvcastForecastSet,
) -> InvcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let p = &ref_arg(panel, "panel")?.0;
        let name = str_arg(model_name, "model_name")?;
        let values = if n_values == 0 {
            Vec::new()
        } else if values.is_null() {
            return Err(null("values"));
        } else {
            std::slice::from_raw_parts(values, n_values).to_vec()
        };
        let fs = ForecastSet::new(name, split_from(split)?, DayWindow::new(first_d, len), p.keys().to_vec(), values)?;
        fs.check_against(p)?;
        *out = Box::into_raw(Box::new(InvcastForecastSet(fs)));
        Ok(())
    })
}

/// Lag-1 forecasts over `[first_d, first_d + len)`.
///
/// # Safety
/// `panel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn invcast_forecast_naive(
    panel: *const InvcastPanel,
    first_d: u32,
    len: u32,
    out: *mut *mut InvcastForecastSet,
) -> InvcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let p = &ref_arg(panel, "panel")?.0;
        let fs = naive_forecast(p, DayWindow::new(first_d, len), Split::Test)?;
        *out = Box::into_raw(Box::new(InvcastForecastSet(fs)));
        Ok(())
    })
}

/// Reads a forecast file that must cover every series of `panel` on every
/// day of the window.
///
/// # Safety
/// `path` must be NUL-terminated; handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn invcast_forecast_import(
    path: *const c_char,
    panel: *const InvcastPanel,
    first_d: u32,
    len: u32,
    out: *mut *mut InvcastForecastSet,
) -> InvcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        let p = &ref_arg(panel, "panel")?.0;
        let fs = import_forecasts(&path, p, DayWindow::new(first_d, len))?;
        *out = Box::into_raw(Box::new(InvcastForecastSet(fs)));
        Ok(())
    })
}

/// # Safety
/// `fs` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn invcast_forecast_export(fs: *const InvcastForecastSet, path: *const c_char) -> InvcastStatus {
    guard(|| {
        let fs = &ref_arg(fs, "forecast set")?.0;
        let path = PathBuf::from(str_arg(path, "path")?);
        export_forecasts(fs, &path)?;
        Ok(())
    })
}

/// Copies the forecast values (row-major, series by day) into `buf` if it
/// holds at least that many doubles; always reports the count in `n_out`.
///
/// # Safety
/// `buf` must be NULL or point to `buf_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn invcast_forecast_values(
    fs: *const InvcastForecastSet,
    buf: *mut c_double,
    buf_len: size_t,
    n_out: *mut size_t,
) -> InvcastStatus {
    guard(|| {
        let fs = &ref_arg(fs, "forecast set")?.0;
        let n_out = out_arg(n_out, "n_out")?;
        let v = fs.values();
        *n_out = v.len();
        if buf.is_null() {
            return Ok(());
        }
        if buf_len < v.len() {
            return Err(Failure(
                InvcastStatus::InvalidParameter,
                format!("buffer holds {buf_len} values, need {}", v.len()),
            ));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// # Safety
/// `fs` must come from one of the forecast constructors and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn invcast_forecast_free(fs: *mut InvcastForecastSet) {
    if !fs.is_null() {
        drop(Box::from_raw(fs));
    }
}

/// Pooled RMSE, MAE and MAPE against realized demand.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn invcast_accuracy(
    fs: *const InvcastForecastSet,
    panel: *const InvcastPanel,
    out: *mut InvcastAccuracy,
) -> InvcastStatus {
    guard(|| {
        let fs = &ref_arg(fs, "forecast set")?.0;
        let p = &ref_arg(panel, "panel")?.0;
        let out = out_arg(out, "out")?;
        let a = accuracy(fs, p)?;
        *out = InvcastAccuracy {
            rmse: a.rmse,
            mae: a.mae,
            mape: a.mape,
            mape_unreliable: a.mape_unreliable,
            n_points: a.n_points,
        };
        Ok(())
    })
}

/// Rolling newsvendor evaluation with orders `max(0, forecast)`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn invcast_simulate(
    fs: *const InvcastForecastSet,
    panel: *const InvcastPanel,
    holding: c_double,
    shortage: c_double,
    round_orders: bool,
    out: *mut InvcastSimResult,
) -> InvcastStatus {
    guard(|| {
        let fs = &ref_arg(fs, "forecast set")?.0;
        let p = &ref_arg(panel, "panel")?.0;
        let out = out_arg(out, "out")?;
        let params = CostParams::new(holding, shortage)?;
        let r = simulate_with(fs, p, &params, SimOptions { round_orders })?;
        *out = InvcastSimResult {
            avg_cost: r.avg_cost,
            fill_rate: r.fill_rate,
            total_overage_units: r.total_overage_units,
            total_shortage_units: r.total_shortage_units,
            total_demand: r.total_demand,
            n_cells: r.n_cells,
        };
        Ok(())
    })
}

/// Single-period cost `h·max(Q-D, 0) + b·max(D-Q, 0)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn invcast_period_cost(
    order: c_double,
    demand: c_double,
    holding: c_double,
    shortage: c_double,
    out: *mut c_double,
) -> InvcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = period_cost(order, demand, &CostParams::new(holding, shortage)?);
        Ok(())
    })
}

/// Rations `available` DC supply across `n` store requests into `out`.
///
/// # Safety
/// `requests` and `out` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn invcast_allocate(
    requests: *const c_double,
    n: size_t,
    available: c_double,
    out: *mut c_double,
) -> InvcastStatus {
    guard(|| {
        if n == 0 {
            return Ok(());
        }
        if requests.is_null() || out.is_null() {
            return Err(null("requests or out"));
        }
        let req = std::slice::from_raw_parts(requests, n);
        if req.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || !(available.is_finite() && available >= 0.0) {
            return Err(Failure(
                InvcastStatus::InvalidParameter,
                "requests and supply must be finite and non-negative".into(),
            ));
        }
        let f = allocate(req, available);
        ptr::copy_nonoverlapping(f.as_ptr(), out, n);
        Ok(())
    })
}

/// Two-echelon simulation: one DC supplying the listed series indices.
///
/// # Safety
/// `stores` must point to `n_stores` indices; handles must be live.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn invcast_simulate_network(
    fs: *const InvcastForecastSet,
    panel: *const InvcastPanel,
    stores: *const size_t,
    n_stores: size_t,
    dc_holding: c_double,
    dc_shortage: c_double,
    store_shortage: c_double,
    initial_dc_inventory: c_double,
    out: *mut InvcastNetworkResult,
) -> InvcastStatus {
    guard(|| {
        let fs = &ref_arg(fs, "forecast set")?.0;
        let p = &ref_arg(panel, "panel")?.0;
        let out = out_arg(out, "out")?;
        let store_set = if n_stores == 0 {
            Vec::new()
        } else if stores.is_null() {
            return Err(null("stores"));
        } else {
            std::slice::from_raw_parts(stores, n_stores).to_vec()
        };
        let cfg = EchelonConfig {
            store_set,
            dc_cost: CostParams::new(dc_holding, dc_shortage)?,
            store_shortage,
            initial_dc_inventory,
        };
        let r = simulate_network(fs, p, &cfg)?;
        *out = InvcastNetworkResult {
            avg_network_cost: r.avg_network_cost,
            network_fill_rate: r.network_fill_rate,
            total_fulfilled: r.total_fulfilled,
            total_demand: r.total_demand,
        };
        Ok(())
    })
}

/// Runs a full evaluation from a TOML config, writing reports to its output
/// directory. Config problems come back as `INVCAST_STATUS_CONFIG` with every
/// finding in the error message.
///
/// # Safety
/// `config_path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn invcast_run(config_path: *const c_char) -> InvcastStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(config_path, "config_path")?);
        let loaded = LoadedConfig::from_path(&path)?;
        let diags = loaded.config.diagnostics();
        if !diags.is_empty() {
            let msg = diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ");
            return Err(Failure(InvcastStatus::Config, msg));
        }
        pipeline::run(&loaded)?;
        Ok(())
    })
}
