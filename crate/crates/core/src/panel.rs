//! M5-format ingestion: wide daily sales joined with the calendar, filtered
//! to a subset, held as a dense `series × day` demand matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of past days the widest feature (lag 28 / rolling-28) consumes.
pub const MAX_FEATURE_LAG: usize = 28;

const ID_COLUMNS: [&str; 6] = ["id", "item_id", "dept_id", "cat_id", "store_id", "state_id"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub item_id: String,
    pub dept_id: String,
    pub store_id: String,
    pub state_id: String,
}

impl SeriesKey {
    pub fn new(item_id: &str, dept_id: &str, store_id: &str, state_id: &str) -> Result<Self> {
        let key = SeriesKey {
            item_id: item_id.to_string(),
            dept_id: dept_id.to_string(),
            store_id: store_id.to_string(),
            state_id: state_id.to_string(),
        };
        if [item_id, dept_id, store_id, state_id].iter().any(|s| s.is_empty()) {
            return Err(Error::Format(format!("series key has an empty identifier: {key}")));
        }
        Ok(key)
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}/{}", self.item_id, self.dept_id, self.store_id, self.state_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalendarDay {
    pub d_index: u32,
    pub date: NaiveDate,
    /// M5 `wday`: 1 = Saturday .. 7 = Friday.
    pub weekday: u8,
    pub month: u8,
    /// Sorted indices into [`SeriesPanel::event_names`].
    pub events: Vec<usize>,
    /// SNAP flag keyed by state id (`CA`, `TX`, `WI`, ...).
    pub snap: BTreeMap<String, bool>,
}

/// Half-open range of day ordinals `[first, first + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DayWindow {
    pub first: u32,
    pub len: u32,
}

impl DayWindow {
    pub fn new(first: u32, len: u32) -> Self {
        DayWindow { first, len }
    }

    /// Window `first..=last`; empty when `last < first`.
    pub fn inclusive(first: u32, last: u32) -> Self {
        DayWindow {
            first,
            len: (last + 1).saturating_sub(first),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn last(&self) -> Option<u32> {
        (self.len > 0).then(|| self.first + self.len - 1)
    }

    pub fn end_exclusive(&self) -> u32 {
        self.first + self.len
    }

    pub fn contains(&self, d: u32) -> bool {
        d >= self.first && d < self.end_exclusive()
    }

    pub fn days(&self) -> impl Iterator<Item = u32> {
        self.first..self.end_exclusive()
    }
}

impl fmt::Display for DayWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.last() {
            Some(last) => write!(f, "d_{}..d_{}", self.first, last),
            None => write!(f, "d_{}..(empty)", self.first),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterColumn {
    Id,
    ItemId,
    DeptId,
    CatId,
    StoreId,
    StateId,
}

impl FilterColumn {
    pub fn name(&self) -> &'static str {
        match self {
            FilterColumn::Id => "id",
            FilterColumn::ItemId => "item_id",
            FilterColumn::DeptId => "dept_id",
            FilterColumn::CatId => "cat_id",
            FilterColumn::StoreId => "store_id",
            FilterColumn::StateId => "state_id",
        }
    }

    fn position(&self) -> usize {
        *self as usize
    }
}

impl FromStr for FilterColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "id" => FilterColumn::Id,
            "item_id" => FilterColumn::ItemId,
            "dept_id" => FilterColumn::DeptId,
            "cat_id" => FilterColumn::CatId,
            "store_id" => FilterColumn::StoreId,
            "state_id" => FilterColumn::StateId,
            other => return Err(Error::Config(format!("unknown filter column `{other}`"))),
        })
    }
}

/// Conjunction of `column = value` equality tests over the sales id columns.
/// An empty filter matches every series.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubsetFilter {
    clauses: Vec<(FilterColumn, String)>,
}

impl SubsetFilter {
    pub fn all() -> Self {
        SubsetFilter::default()
    }

    pub fn with(mut self, column: FilterColumn, value: impl Into<String>) -> Self {
        self.clauses.push((column, value.into()));
        self
    }

    pub fn clauses(&self) -> &[(FilterColumn, String)] {
        &self.clauses
    }

    /// `ids` is ordered like the M5 id columns: id, item, dept, cat, store, state.
    pub fn matches(&self, ids: &[&str; 6]) -> bool {
        self.clauses
            .iter()
            .all(|(col, value)| ids[col.position()] == value)
    }
}

impl FromStr for SubsetFilter {
    type Err = Error;

    /// Parses `state_id=CA,dept_id=FOODS_1`.
    fn from_str(s: &str) -> Result<Self> {
        let mut filter = SubsetFilter::all();
        for clause in s.split(',').map(str::trim).filter(|c| !c.is_empty()) {
            let (col, value) = clause
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("filter clause `{clause}` is not column=value")))?;
            filter = filter.with(col.parse()?, value.trim());
        }
        Ok(filter)
    }
}

impl fmt::Display for SubsetFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .clauses
            .iter()
            .map(|(c, v)| format!("{}={}", c.name(), v))
            .collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPanel {
    keys: Vec<SeriesKey>,
    /// M5 `id` and `cat_id` columns, kept so the panel can be written back.
    row_ids: Vec<String>,
    cat_ids: Vec<String>,
    days: Vec<CalendarDay>,
    event_names: Vec<String>,
    demand: Vec<f64>,
}

impl SeriesPanel {
    /// Assembles a panel from parts, checking every structural invariant.
    pub fn from_parts(
        keys: Vec<SeriesKey>,
        row_ids: Vec<String>,
        cat_ids: Vec<String>,
        days: Vec<CalendarDay>,
        event_names: Vec<String>,
        demand: Vec<f64>,
    ) -> Result<Self> {
        let n = keys.len();
        let t = days.len();
        if row_ids.len() != n || cat_ids.len() != n {
            return Err(Error::Format("id columns do not match the number of series".into()));
        }
        if demand.len() != n * t {
            return Err(Error::Format(format!(
                "demand matrix has {} cells, expected {n} series x {t} days",
                demand.len()
            )));
        }
        let unique: BTreeSet<&SeriesKey> = keys.iter().collect();
        if unique.len() != n {
            return Err(Error::Format("duplicate series key in panel".into()));
        }
        for w in days.windows(2) {
            if w[1].d_index != w[0].d_index + 1 {
                return Err(Error::Coverage(format!(
                    "day axis jumps from d_{} to d_{}",
                    w[0].d_index, w[1].d_index
                )));
            }
        }
        if let Some(pos) = demand.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Format(format!(
                "demand for series {} on d_{} is {}, must be finite and non-negative",
                keys[pos / t.max(1)],
                days[pos % t.max(1)].d_index,
                demand[pos]
            )));
        }
        Ok(SeriesPanel {
            keys,
            row_ids,
            cat_ids,
            days,
            event_names,
            demand,
        })
    }

    pub fn n_series(&self) -> usize {
        self.keys.len()
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn keys(&self) -> &[SeriesKey] {
        &self.keys
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn cat_ids(&self) -> &[String] {
        &self.cat_ids
    }

    pub fn days(&self) -> &[CalendarDay] {
        &self.days
    }

    pub fn event_names(&self) -> &[String] {
        &self.event_names
    }

    pub fn first_d(&self) -> u32 {
        self.days.first().map_or(1, |d| d.d_index)
    }

    pub fn last_d(&self) -> u32 {
        self.days.last().map_or(0, |d| d.d_index)
    }

    pub fn horizon(&self) -> DayWindow {
        DayWindow::new(self.first_d(), self.n_days() as u32)
    }

    /// Zero-based column of `d` in the day axis.
    pub fn day_pos(&self, d: u32) -> Option<usize> {
        let first = self.first_d();
        (d >= first && ((d - first) as usize) < self.n_days()).then(|| (d - first) as usize)
    }

    pub fn series(&self, i: usize) -> &[f64] {
        let t = self.n_days();
        &self.demand[i * t..(i + 1) * t]
    }

    pub fn demand_matrix(&self) -> &[f64] {
        &self.demand
    }

    /// Demand of series `i` on day ordinal `d`. Panics when out of range.
    pub fn demand(&self, i: usize, d: u32) -> f64 {
        let pos = self.day_pos(d).expect("day outside panel horizon");
        self.series(i)[pos]
    }

    pub fn key_index(&self, key: &SeriesKey) -> Option<usize> {
        self.keys.iter().position(|k| k == key)
    }

    pub fn snap_flag(&self, series: usize, pos: usize) -> bool {
        let state = &self.keys[series].state_id;
        self.days[pos].snap.get(state).copied().unwrap_or(false)
    }

    /// States present in the panel, sorted.
    pub fn states(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.keys.iter().map(|k| &k.state_id).collect();
        set.into_iter().cloned().collect()
    }

    pub fn filter(&self, filter: &SubsetFilter) -> SeriesPanel {
        let keep: Vec<usize> = (0..self.n_series())
            .filter(|&i| {
                let k = &self.keys[i];
                filter.matches(&[
                    &self.row_ids[i],
                    &k.item_id,
                    &k.dept_id,
                    &self.cat_ids[i],
                    &k.store_id,
                    &k.state_id,
                ])
            })
            .collect();
        self.select(&keep)
    }

    /// Sub-panel with the given series, in the given order.
    pub fn select(&self, series: &[usize]) -> SeriesPanel {
        let mut demand = Vec::with_capacity(series.len() * self.n_days());
        for &i in series {
            demand.extend_from_slice(self.series(i));
        }
        SeriesPanel {
            keys: series.iter().map(|&i| self.keys[i].clone()).collect(),
            row_ids: series.iter().map(|&i| self.row_ids[i].clone()).collect(),
            cat_ids: series.iter().map(|&i| self.cat_ids[i].clone()).collect(),
            days: self.days.clone(),
            event_names: self.event_names.clone(),
            demand,
        }
    }

    /// Copy of the panel with demand replaced; the new matrix must pass the
    /// usual invariants.
    pub fn with_demand(&self, demand: Vec<f64>) -> Result<SeriesPanel> {
        SeriesPanel::from_parts(
            self.keys.clone(),
            self.row_ids.clone(),
            self.cat_ids.clone(),
            self.days.clone(),
            self.event_names.clone(),
            demand,
        )
    }

    /// Writes the M5 wide sales layout, series in key order.
    pub fn write_sales_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = ID_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend(self.days.iter().map(|d| format!("d_{}", d.d_index)));
        w.write_record(&header)?;
        for i in 0..self.n_series() {
            let k = &self.keys[i];
            let mut rec = vec![
                self.row_ids[i].clone(),
                k.item_id.clone(),
                k.dept_id.clone(),
                self.cat_ids[i].clone(),
                k.store_id.clone(),
                k.state_id.clone(),
            ];
            rec.extend(self.series(i).iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Writes an M5-shaped calendar for the panel horizon. Event types and
    /// `wm_yr_wk` are not retained at load and are written empty.
    pub fn write_calendar_csv(&self, path: &Path) -> Result<()> {
        let states: BTreeSet<&String> = self.days.iter().flat_map(|d| d.snap.keys()).collect();
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = [
            "date", "wm_yr_wk", "weekday", "wday", "month", "year", "d", "event_name_1",
            "event_type_1", "event_name_2", "event_type_2",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(states.iter().map(|s| format!("snap_{s}")));
        w.write_record(&header)?;
        for day in &self.days {
            if day.events.len() > 2 {
                return Err(Error::Format(format!(
                    "d_{} has {} events; the calendar layout holds two",
                    day.d_index,
                    day.events.len()
                )));
            }
            let ev = |k: usize| {
                day.events
                    .get(k)
                    .map(|&e| self.event_names[e].clone())
                    .unwrap_or_default()
            };
            let mut rec = vec![
                day.date.format("%Y-%m-%d").to_string(),
                String::new(),
                day.date.format("%A").to_string(),
                day.weekday.to_string(),
                day.month.to_string(),
                day.date.year().to_string(),
                format!("d_{}", day.d_index),
                ev(0),
                String::new(),
                ev(1),
                String::new(),
            ];
            rec.extend(
                states
                    .iter()
                    .map(|s| u8::from(day.snap.get(*s).copied().unwrap_or(false)).to_string()),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Chronological split boundaries (inclusive day ordinals).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub first_d: u32,
    pub train_end: u32,
    pub valid_end: u32,
    pub test_end: u32,
}

impl SplitSpec {
    pub fn train(&self) -> DayWindow {
        DayWindow::inclusive(self.first_d, self.train_end)
    }

    pub fn validation(&self) -> DayWindow {
        DayWindow::inclusive(self.train_end + 1, self.valid_end)
    }

    pub fn test(&self) -> DayWindow {
        DayWindow::inclusive(self.valid_end + 1, self.test_end)
    }

    /// Train and validation together, used for the final refit.
    pub fn train_valid(&self) -> DayWindow {
        DayWindow::inclusive(self.first_d, self.valid_end)
    }
}

/// Test = last `test_days`, validation = the `valid_days` before, train = the rest.
pub fn make_splits(panel: &SeriesPanel, valid_days: usize, test_days: usize) -> Result<SplitSpec> {
    let t = panel.n_days();
    let needed = valid_days + test_days + MAX_FEATURE_LAG + 1;
    if t < needed {
        return Err(Error::InsufficientHistory { needed, got: t });
    }
    if valid_days == 0 || test_days == 0 {
        return Err(Error::InvalidParameter(
            "validation and test windows must be non-empty".into(),
        ));
    }
    let test_end = panel.last_d();
    let valid_end = test_end - test_days as u32;
    let train_end = valid_end - valid_days as u32;
    Ok(SplitSpec {
        first_d: panel.first_d(),
        train_end,
        valid_end,
        test_end,
    })
}

struct CalendarRow {
    date: NaiveDate,
    weekday: u8,
    month: u8,
    events: Vec<String>,
    snap: BTreeMap<String, bool>,
}

pub(crate) fn parse_d_column(name: &str) -> Option<u32> {
    name.strip_prefix("d_")?.parse().ok()
}

fn read_calendar(path: &Path) -> Result<HashMap<u32, CalendarRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| with_path(e, path))?;
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("calendar is missing column `{name}`")))
    };
    let (c_date, c_wday, c_month, c_d) = (col("date")?, col("wday")?, col("month")?, col("d")?);
    let event_cols: Vec<usize> = ["event_name_1", "event_name_2"]
        .iter()
        .filter_map(|n| header.iter().position(|h| h == *n))
        .collect();
    let snap_cols: Vec<(usize, String)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("snap_").map(|s| (i, s.to_string())))
        .collect();

    let mut rows = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |c: usize| rec.get(c).unwrap_or("").trim();
        let perr = |c: usize, msg: &str| Error::Parse {
            row: line,
            column: header.get(c).unwrap_or("").to_string(),
            message: format!("{msg}: `{}`", rec.get(c).unwrap_or("")),
        };
        let d = parse_d_column(field(c_d)).ok_or_else(|| perr(c_d, "bad day label"))?;
        let date = NaiveDate::parse_from_str(field(c_date), "%Y-%m-%d")
            .map_err(|_| perr(c_date, "bad date"))?;
        let weekday: u8 = field(c_wday).parse().map_err(|_| perr(c_wday, "bad wday"))?;
        let month: u8 = field(c_month).parse().map_err(|_| perr(c_month, "bad month"))?;
        if !(1..=7).contains(&weekday) {
            return Err(perr(c_wday, "wday outside 1..7"));
        }
        if !(1..=12).contains(&month) {
            return Err(perr(c_month, "month outside 1..12"));
        }
        let events = event_cols
            .iter()
            .map(|&c| field(c).to_string())
            .filter(|e| !e.is_empty())
            .collect();
        let mut snap = BTreeMap::new();
        for (c, state) in &snap_cols {
            let v = match field(*c) {
                "1" => true,
                "0" | "" => false,
                _ => return Err(perr(*c, "SNAP flag must be 0 or 1")),
            };
            snap.insert(state.clone(), v);
        }
        if rows
            .insert(d, CalendarRow { date, weekday, month, events, snap })
            .is_some()
        {
            return Err(Error::Format(format!("calendar lists d_{d} twice")));
        }
    }
    Ok(rows)
}

fn with_path(e: csv::Error, path: &Path) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}

/// Maps sales header positions of `d_k` columns, sorted by `k`, and checks the
/// day axis is duplicate-free and gap-free.
fn day_columns(header: &csv::StringRecord) -> Result<Vec<(usize, u32)>> {
    let mut cols: Vec<(usize, u32)> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("d_"))
        .map(|(i, h)| {
            parse_d_column(h)
                .map(|d| (i, d))
                .ok_or_else(|| Error::Format(format!("malformed day column `{h}`")))
        })
        .collect::<Result<_>>()?;
    if cols.is_empty() {
        return Err(Error::Format("sales file has no d_ columns".into()));
    }
    cols.sort_by_key(|&(_, d)| d);
    for w in cols.windows(2) {
        if w[0].1 == w[1].1 {
            return Err(Error::Format(format!("duplicate day column d_{}", w[0].1)));
        }
        if w[1].1 != w[0].1 + 1 {
            return Err(Error::Coverage(format!(
                "day column d_{} is missing from the sales file",
                w[0].1 + 1
            )));
        }
    }
    Ok(cols)
}

fn id_positions(header: &csv::StringRecord) -> Result<[usize; 6]> {
    let mut pos = [0usize; 6];
    for (slot, name) in pos.iter_mut().zip(ID_COLUMNS) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("sales file is missing column `{name}`")))?;
    }
    Ok(pos)
}

/// Counts the sales rows the filter selects without parsing demand cells.
pub fn count_matching(sales_path: &Path, filter: &SubsetFilter) -> Result<usize> {
    let mut rdr = csv::Reader::from_path(sales_path).map_err(|e| with_path(e, sales_path))?;
    let ids = id_positions(&rdr.headers()?.clone())?;
    let mut n = 0;
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec)? {
        let f: [&str; 6] = std::array::from_fn(|k| rec.get(ids[k]).unwrap_or(""));
        if filter.matches(&f) {
            n += 1;
        }
    }
    Ok(n)
}

/// Loads the series selected by `filter` from an M5 sales file and joins the
/// calendar on the day ordinal. Series are ordered by key.
pub fn load_panel(sales_path: &Path, calendar_path: &Path, filter: &SubsetFilter) -> Result<SeriesPanel> {
    let calendar = read_calendar(calendar_path)?;

    let mut rdr = csv::Reader::from_path(sales_path).map_err(|e| with_path(e, sales_path))?;
    let header = rdr.headers()?.clone();
    let ids = id_positions(&header)?;
    let dcols = day_columns(&header)?;

    let mut rows: Vec<(SeriesKey, String, String, Vec<f64>)> = Vec::new();
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec)? {
        let f: [&str; 6] = std::array::from_fn(|k| rec.get(ids[k]).unwrap_or(""));
        if !filter.matches(&f) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let key = SeriesKey::new(f[1], f[2], f[4], f[5])?;
        let mut values = Vec::with_capacity(dcols.len());
        for &(c, _) in &dcols {
            let raw = rec.get(c).unwrap_or("").trim();
            let v: u64 = raw.parse().map_err(|_| Error::Parse {
                row: line,
                column: header[c].to_string(),
                message: format!("demand `{raw}` is not a non-negative integer"),
            })?;
            values.push(v as f64);
        }
        rows.push((key, f[0].to_string(), f[3].to_string(), values));
    }
    if rows.is_empty() {
        return Err(Error::Coverage(format!(
            "filter `{filter}` matched no series in {}",
            sales_path.display()
        )));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));

    let mut event_set: BTreeSet<String> = BTreeSet::new();
    for &(_, d) in &dcols {
        let row = calendar
            .get(&d)
            .ok_or_else(|| Error::Coverage(format!("calendar does not cover d_{d}")))?;
        event_set.extend(row.events.iter().cloned());
    }
    let event_names: Vec<String> = event_set.into_iter().collect();
    let days = dcols
        .iter()
        .map(|&(_, d)| {
            let row = &calendar[&d];
            let mut events: Vec<usize> = row
                .events
                .iter()
                .map(|e| event_names.binary_search(e).expect("event collected above"))
                .collect();
            events.sort_unstable();
            events.dedup();
            CalendarDay {
                d_index: d,
                date: row.date,
                weekday: row.weekday,
                month: row.month,
                events,
                snap: row.snap.clone(),
            }
        })
        .collect();

    let mut keys = Vec::with_capacity(rows.len());
    let mut row_ids = Vec::with_capacity(rows.len());
    let mut cat_ids = Vec::with_capacity(rows.len());
    let mut demand = Vec::with_capacity(rows.len() * dcols.len());
    for (k, id, cat, values) in rows {
        keys.push(k);
        row_ids.push(id);
        cat_ids.push(cat);
        demand.extend(values);
    }
    SeriesPanel::from_parts(keys, row_ids, cat_ids, days, event_names, demand)
}
