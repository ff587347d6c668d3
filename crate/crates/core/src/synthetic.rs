//! Deterministic synthetic panels and M5-shaped CSV files, used by the
//! bundled fixture and by tests.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::panel::{CalendarDay, SeriesKey, SeriesPanel};

/// First date of the M5 calendar (a Saturday, `wday` = 1).
pub fn m5_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2011, 1, 29).expect("valid date")
}

/// M5 `wday` numbering: Saturday = 1 .. Friday = 7.
pub fn m5_wday(date: NaiveDate) -> u8 {
    ((date.weekday().num_days_from_sunday() + 1) % 7 + 1) as u8
}

fn calendar_days(n_days: usize, states: &[&str]) -> Vec<CalendarDay> {
    let start = m5_start_date();
    (0..n_days)
        .map(|k| {
            let date = start + Duration::days(k as i64);
            let d_index = k as u32 + 1;
            let snap: BTreeMap<String, bool> = states
                .iter()
                .map(|s| (s.to_string(), snap_rule(s, d_index)))
                .collect();
            CalendarDay {
                d_index,
                date,
                weekday: m5_wday(date),
                month: date.month() as u8,
                events: Vec::new(),
                snap,
            }
        })
        .collect()
}

// CA on odd days, TX on even days, WI never. Only needs to be distinguishable.
fn snap_rule(state: &str, d: u32) -> bool {
    match state {
        "CA" => d % 2 == 1,
        "TX" => d.is_multiple_of(2),
        _ => false,
    }
}

/// In-memory panel over `CA_1..CA_n` stores of one item, calendar starting on
/// the M5 start date, no events.
pub fn panel_from_series(series: &[Vec<f64>]) -> SeriesPanel {
    let n_days = series.first().map_or(0, Vec::len);
    let keys: Vec<SeriesKey> = (0..series.len())
        .map(|i| SeriesKey {
            item_id: format!("ITEM_{i:03}"),
            dept_id: "FOODS_1".into(),
            store_id: "CA_1".into(),
            state_id: "CA".into(),
        })
        .collect();
    let row_ids = keys
        .iter()
        .map(|k| format!("{}_{}_validation", k.item_id, k.store_id))
        .collect();
    let cat_ids = vec!["FOODS".to_string(); series.len()];
    let demand = series.iter().flatten().copied().collect();
    SeriesPanel::from_parts(
        keys,
        row_ids,
        cat_ids,
        calendar_days(n_days, &["CA", "TX", "WI"]),
        Vec::new(),
        demand,
    )
    .expect("synthetic panel is well formed")
}

/// Writes an M5-shaped calendar with `n_days` rows. `events` maps day
/// ordinals to up to two event names.
pub fn write_calendar(path: &Path, n_days: usize, events: &BTreeMap<u32, Vec<String>>) -> Result<()> {
    let start = m5_start_date();
    let mut out = String::from(
        "date,wm_yr_wk,weekday,wday,month,year,d,event_name_1,event_type_1,event_name_2,event_type_2,snap_CA,snap_TX,snap_WI\n",
    );
    for k in 0..n_days {
        let date = start + Duration::days(k as i64);
        let d = k as u32 + 1;
        let ev = events.get(&d).cloned().unwrap_or_default();
        let name = |i: usize| ev.get(i).cloned().unwrap_or_default();
        let kind = |i: usize| if ev.get(i).is_some() { "Cultural" } else { "" };
        out.push_str(&format!(
            "{},{},{},{},{},{},d_{},{},{},{},{},{},{},{}\n",
            date.format("%Y-%m-%d"),
            11100 + (k / 7) as u32,
            date.format("%A"),
            m5_wday(date),
            date.month(),
            date.year(),
            d,
            name(0),
            kind(0),
            name(1),
            kind(1),
            u8::from(snap_rule("CA", d)),
            u8::from(snap_rule("TX", d)),
            u8::from(snap_rule("WI", d)),
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One sales row: (item_id, dept_id, store_id, state_id, demand).
pub type SalesRow<'a> = (&'a str, &'a str, &'a str, &'a str, Vec<u32>);

pub fn write_sales(path: &Path, rows: &[SalesRow<'_>]) -> Result<()> {
    let n_days = rows.first().map_or(0, |r| r.4.len());
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::from("id,item_id,dept_id,cat_id,store_id,state_id");
    for d in 1..=n_days {
        out.push_str(&format!(",d_{d}"));
    }
    out.push('\n');
    for (item, dept, store, state, values) in rows {
        let cat = dept.split('_').next().unwrap_or(dept);
        out.push_str(&format!("{item}_{store}_validation,{item},{dept},{cat},{store},{state}"));
        for v in values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Parameters of the bundled synthetic retail panel.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub items: usize,
    pub stores: Vec<&'static str>,
    pub n_days: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            items: 5,
            stores: vec!["CA_1"],
            n_days: 200,
            seed: 7,
        }
    }
}

/// Poisson-like intermittent demand with weekly seasonality, a slow trend and
/// SNAP lift. Returns `(sales_path, calendar_path)` inside `dir`.
pub fn write_synthetic_m5(dir: &Path, spec: &SyntheticSpec) -> Result<(PathBuf, PathBuf)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weekly = [1.3, 1.2, 0.8, 0.8, 0.85, 0.9, 1.15];
    let start = m5_start_date();
    let mut items: Vec<String> = (0..spec.items).map(|i| format!("FOODS_1_{:03}", i + 1)).collect();
    items.sort();
    let mut rows_owned = Vec::new();
    for item in &items {
        let base: f64 = rng.gen_range(0.5..4.0);
        for store in &spec.stores {
            let scale: f64 = rng.gen_range(0.7..1.3);
            let values: Vec<u32> = (0..spec.n_days)
                .map(|k| {
                    let date = start + Duration::days(k as i64);
                    let w = weekly[(m5_wday(date) - 1) as usize];
                    let snap = if snap_rule("CA", k as u32 + 1) { 1.1 } else { 1.0 };
                    let trend = 1.0 + 0.001 * k as f64;
                    Poisson::new(base * scale * w * snap * trend)
                        .expect("positive rate")
                        .sample(&mut rng) as u32
                })
                .collect();
            rows_owned.push((item.clone(), store.to_string(), values));
        }
    }
    let rows: Vec<SalesRow<'_>> = rows_owned
        .iter()
        .map(|(item, store, v)| (item.as_str(), "FOODS_1", store.as_str(), "CA", v.clone()))
        .collect();
    let sales = dir.join("sales_train_validation.csv");
    let calendar = dir.join("calendar.csv");
    write_sales(&sales, &rows)?;
    let mut events = BTreeMap::new();
    for d in (30..spec.n_days as u32).step_by(61) {
        events.insert(d, vec!["SuperBowl".to_string()]);
    }
    for d in (45..spec.n_days as u32).step_by(90) {
        events.insert(d, vec!["Easter".to_string(), "OrthodoxEaster".to_string()]);
    }
    write_calendar(&calendar, spec.n_days, &events)?;
    Ok((sales, calendar))
}
