use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::panel::SeriesPanel;
use crate::synthetic::{panel_from_series, write_calendar, write_sales};

/// Writes a sales file with the given `(item, store, state, demand)` rows and
/// a calendar of `cal_days` days. An event lands on d_3 when it exists.
pub fn write_fixture(
    dir: &Path,
    series: &[(&str, &str, &str, &[u32])],
    cal_days: usize,
) -> (PathBuf, PathBuf) {
    let sales = dir.join("sales.csv");
    let cal = dir.join("calendar.csv");
    let rows: Vec<_> = series
        .iter()
        .map(|(item, store, state, v)| (*item, "FOODS_1", *store, *state, v.to_vec()))
        .collect();
    if !rows.is_empty() {
        write_sales(&sales, &rows).unwrap();
    }
    let mut events = BTreeMap::new();
    events.insert(3, vec!["SuperBowl".to_string()]);
    write_calendar(&cal, cal_days, &events).unwrap();
    (sales, cal)
}

pub fn constant_panel(n: usize, t: usize, c: f64) -> SeriesPanel {
    panel_from_series(&vec![vec![c; t]; n])
}
