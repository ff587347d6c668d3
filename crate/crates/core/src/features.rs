//! Per-series regressors: demand lags, trailing rolling means and calendar
//! indicators.
//!
//! Every demand-derived value for day `t` is computed from days strictly
//! before `t`. Rolling windows cover `t-w ..= t-1` and never include the
//! target day. Rows whose history does not yet reach back 28 days are marked
//! invalid and hold `NaN` in the unavailable columns; they are never filled.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel::{DayWindow, SeriesPanel, MAX_FEATURE_LAG};

pub const LAGS: [usize; 4] = [1, 7, 14, 28];
pub const ROLL_WINDOWS: [usize; 3] = [7, 14, 28];
const N_LAGGED: usize = LAGS.len() + ROLL_WINDOWS.len();

/// Mean of `values[t-window-1 .. t-1]` in 1-based day numbering, i.e. the
/// `window` days immediately before day `t`. `None` when `t <= window`.
pub fn rolling_mean(values: &[f64], window: usize, t: usize) -> Option<f64> {
    if window == 0 || t <= window || t - 1 > values.len() {
        return None;
    }
    let slice = &values[t - 1 - window..t - 1];
    Some(slice.iter().sum::<f64>() / window as f64)
}

#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    n_series: usize,
    n_days: usize,
    first_d: u32,
    columns: Vec<String>,
    /// `rows × N_LAGGED`, row = series * n_days + day position.
    lagged: Vec<f64>,
    /// `(state × n_days) × calendar column`.
    calendar: Vec<f64>,
    n_calendar: usize,
    series_state: Vec<usize>,
    valid: Vec<bool>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_series * self.n_days
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn row_index(&self, series: usize, d: u32) -> usize {
        let pos = (d - self.first_d) as usize;
        debug_assert!(pos < self.n_days);
        series * self.n_days + pos
    }

    /// `(series, d_index)` of a row.
    pub fn row_coords(&self, row: usize) -> (usize, u32) {
        (row / self.n_days, self.first_d + (row % self.n_days) as u32)
    }

    pub fn is_valid(&self, row: usize) -> bool {
        self.valid[row]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        if col < N_LAGGED {
            self.lagged[row * N_LAGGED + col]
        } else {
            let series = row / self.n_days;
            let pos = row % self.n_days;
            let crow = self.series_state[series] * self.n_days + pos;
            self.calendar[crow * self.n_calendar + col - N_LAGGED]
        }
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.n_cols()).map(|c| self.value(row, c)).collect()
    }

    /// Valid rows whose day falls inside `window`, ordered by series then day.
    pub fn valid_rows_in(&self, window: DayWindow) -> Vec<usize> {
        (0..self.n_series)
            .flat_map(|s| window.days().map(move |d| (s, d)))
            .filter(|&(_, d)| d >= self.first_d && ((d - self.first_d) as usize) < self.n_days)
            .map(|(s, d)| self.row_index(s, d))
            .filter(|&r| self.valid[r])
            .collect()
    }

    /// One CSV row per valid `(series, day)`: key columns, `d`, the realized
    /// target and every feature column.
    pub fn write_csv(&self, panel: &SeriesPanel, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        write!(w, "item_id,dept_id,store_id,state_id,d,target").map_err(io)?;
        for c in &self.columns {
            write!(w, ",{c}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for row in 0..self.n_rows() {
            if !self.valid[row] {
                continue;
            }
            let (s, d) = self.row_coords(row);
            let k = &panel.keys()[s];
            write!(
                w,
                "{},{},{},{},d_{},{}",
                k.item_id,
                k.dept_id,
                k.store_id,
                k.state_id,
                d,
                panel.demand(s, d)
            )
            .map_err(io)?;
            for c in 0..self.n_cols() {
                write!(w, ",{}", self.value(row, c)).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

pub fn build_features(panel: &SeriesPanel) -> Result<FeatureMatrix> {
    if panel.n_series() == 0 || panel.n_days() == 0 {
        return Err(Error::InvalidParameter("cannot build features for an empty panel".into()));
    }
    let n_days = panel.n_days();

    let mut columns: Vec<String> = LAGS.iter().map(|l| format!("lag_{l}")).collect();
    columns.extend(ROLL_WINDOWS.iter().map(|w| format!("rollmean_{w}")));
    columns.push("weekday".into());
    columns.push("month".into());
    columns.extend((1..=7).map(|k| format!("wday_{k}")));
    columns.extend((1..=12).map(|k| format!("month_{k}")));
    columns.extend(panel.event_names().iter().map(|e| format!("event_{e}")));
    columns.push("snap".into());
    let n_calendar = columns.len() - N_LAGGED;

    let lagged: Vec<f64> = (0..panel.n_series())
        .into_par_iter()
        .flat_map_iter(|s| {
            let y = panel.series(s);
            (1..=n_days).flat_map(move |t| {
                let lags = LAGS.iter().map(move |&l| if t > l { y[t - 1 - l] } else { f64::NAN });
                let rolls =
                    ROLL_WINDOWS.iter().map(move |&w| rolling_mean(y, w, t).unwrap_or(f64::NAN));
                lags.chain(rolls)
            })
        })
        .collect();

    let states = panel.states();
    let series_state = panel
        .keys()
        .iter()
        .map(|k| states.binary_search(&k.state_id).expect("state listed"))
        .collect();
    let mut calendar = Vec::with_capacity(states.len() * n_days * n_calendar);
    for state in &states {
        for day in panel.days() {
            calendar.push(day.weekday as f64);
            calendar.push(day.month as f64);
            calendar.extend((1..=7).map(|k| f64::from(u8::from(day.weekday == k))));
            calendar.extend((1..=12).map(|k| f64::from(u8::from(day.month == k))));
            calendar.extend(
                (0..panel.event_names().len())
                    .map(|e| f64::from(u8::from(day.events.binary_search(&e).is_ok()))),
            );
            calendar.push(f64::from(u8::from(day.snap.get(state).copied().unwrap_or(false))));
        }
    }

    let valid = (0..panel.n_series())
        .flat_map(|_| (0..n_days).map(|pos| pos >= MAX_FEATURE_LAG))
        .collect();

    Ok(FeatureMatrix {
        n_series: panel.n_series(),
        n_days,
        first_d: panel.first_d(),
        columns,
        lagged,
        calendar,
        n_calendar,
        series_state,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::panel_from_series;
    use crate::testutil::constant_panel;
    use proptest::prelude::*;

    fn col(fm: &FeatureMatrix, name: &str) -> usize {
        fm.column_index(name).unwrap()
    }

    #[test]
    fn rolling_mean_examples() {
        assert_eq!(rolling_mean(&[1.0, 1.0, 1.0, 1.0], 2, 3), Some(1.0));
        let ramp: Vec<f64> = (1..=8).map(f64::from).collect();
        assert_eq!(rolling_mean(&ramp, 7, 8), Some(4.0));
        assert_eq!(rolling_mean(&ramp, 7, 5), None);
        assert_eq!(rolling_mean(&ramp, 7, 7), None);
    }

    #[test]
    fn constant_series_features() {
        let p = constant_panel(2, 60, 5.0);
        let fm = build_features(&p).unwrap();
        for row in fm.valid_rows_in(p.horizon()) {
            for c in 0..N_LAGGED {
                assert_eq!(fm.value(row, c), 5.0);
            }
        }
    }

    #[test]
    fn ramp_at_day_29() {
        let ramp: Vec<f64> = (1..=40).map(f64::from).collect();
        let p = panel_from_series(&[ramp]);
        let fm = build_features(&p).unwrap();
        let r = fm.row_index(0, 29);
        assert!(fm.is_valid(r));
        assert_eq!(fm.value(r, col(&fm, "lag_1")), 28.0);
        assert_eq!(fm.value(r, col(&fm, "lag_7")), 22.0);
        assert_eq!(fm.value(r, col(&fm, "lag_14")), 15.0);
        assert_eq!(fm.value(r, col(&fm, "lag_28")), 1.0);
        assert_eq!(fm.value(r, col(&fm, "rollmean_7")), 25.0);
        assert_eq!(fm.value(r, col(&fm, "rollmean_28")), 14.5);
    }

    #[test]
    fn warm_up_rows_invalid() {
        let p = constant_panel(2, 40, 1.0);
        let fm = build_features(&p).unwrap();
        for s in 0..2 {
            for d in 1..=28 {
                assert!(!fm.is_valid(fm.row_index(s, d)));
            }
            assert!(fm.is_valid(fm.row_index(s, 29)));
        }
        assert!(fm.value(fm.row_index(0, 28), col(&fm, "lag_28")).is_nan());
        assert_eq!(fm.valid_rows_in(p.horizon()).len(), 2 * 12);
    }

    #[test]
    fn calendar_columns_one_hot() {
        let p = constant_panel(1, 30, 1.0);
        let fm = build_features(&p).unwrap();
        let r = fm.row_index(0, 1);
        // d_1 is a Saturday in January (wday 1), CA SNAP on odd days
        assert_eq!(fm.value(r, col(&fm, "weekday")), 1.0);
        assert_eq!(fm.value(r, col(&fm, "wday_1")), 1.0);
        assert_eq!(fm.value(r, col(&fm, "wday_2")), 0.0);
        assert_eq!(fm.value(r, col(&fm, "month_1")), 1.0);
        assert_eq!(fm.value(r, col(&fm, "snap")), 1.0);
        assert_eq!(fm.value(fm.row_index(0, 2), col(&fm, "snap")), 0.0);
    }

    proptest! {
        #[test]
        fn perturbing_day_t_never_changes_rows_up_to_t(
            y in prop::collection::vec(0u32..20, 40..60),
            t_frac in 0.0f64..1.0,
            bump in 1u32..50,
        ) {
            let base: Vec<f64> = y.iter().map(|&v| v as f64).collect();
            let t = 1 + ((base.len() - 1) as f64 * t_frac) as usize;
            let mut moved = base.clone();
            moved[t - 1] += bump as f64;
            let a = build_features(&panel_from_series(&[base])).unwrap();
            let b = build_features(&panel_from_series(&[moved])).unwrap();
            for d in 1..=t as u32 {
                let (ra, rb) = (a.row(a.row_index(0, d)), b.row(b.row_index(0, d)));
                for (x, z) in ra.iter().zip(&rb) {
                    prop_assert!(x.to_bits() == z.to_bits());
                }
            }
        }

        #[test]
        fn shift_moves_lags_and_means_by_constant(
            y in prop::collection::vec(0u32..20, 35..50),
            c in 0u32..10,
        ) {
            let base: Vec<f64> = y.iter().map(|&v| v as f64).collect();
            let shifted: Vec<f64> = base.iter().map(|v| v + c as f64).collect();
            let a = build_features(&panel_from_series(&[base])).unwrap();
            let b = build_features(&panel_from_series(&[shifted])).unwrap();
            for row in a.valid_rows_in(DayWindow::new(1, 60)) {
                for col in 0..a.n_cols() {
                    let (x, z) = (a.value(row, col), b.value(row, col));
                    if col < N_LAGGED {
                        prop_assert!((z - x - c as f64).abs() < 1e-12);
                    } else {
                        prop_assert_eq!(x, z);
                    }
                }
            }
        }
    }
}
