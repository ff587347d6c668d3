//! One-step-ahead point forecasters and the [`ForecastSet`] they produce.
//!
//! Every forecast for day `t` uses realized demand through `t-1` only. State
//! space models (Holt-Winters, ARIMA) roll their state forward with realized
//! demand across the window; the boosted model evaluates `f(x_t)` per row.

pub mod arima;
pub mod gbr;
pub mod holt_winters;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::panel::{DayWindow, SeriesKey, SeriesPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split `{other}`"))),
        }
    }
}

/// Point forecasts `ŷ[i, t | t-1]` for every series of a panel over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    model_name: String,
    split: Split,
    window: DayWindow,
    keys: Vec<SeriesKey>,
    /// `series × window day`, row-major.
    values: Vec<f64>,
    clamped: bool,
}

impl ForecastSet {
    pub fn new(
        model_name: impl Into<String>,
        split: Split,
        window: DayWindow,
        keys: Vec<SeriesKey>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected = keys.len() * window.len as usize;
        if values.len() != expected {
            return Err(Error::Format(format!(
                "forecast set has {} values, expected {} series x {} days",
                values.len(),
                keys.len(),
                window.len
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let w = window.len.max(1) as usize;
            return Err(Error::Format(format!(
                "non-finite forecast for {} on d_{}",
                keys[pos / w],
                window.first + (pos % w) as u32
            )));
        }
        Ok(ForecastSet {
            model_name: model_name.into(),
            split,
            window,
            keys,
            values,
            clamped: false,
        })
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn window(&self) -> DayWindow {
        self.window
    }

    pub fn keys(&self) -> &[SeriesKey] {
        &self.keys
    }

    pub fn n_series(&self) -> usize {
        self.keys.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_clamped(&self) -> bool {
        self.clamped
    }

    pub fn series(&self, i: usize) -> &[f64] {
        let w = self.window.len as usize;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn get(&self, i: usize, d: u32) -> f64 {
        debug_assert!(self.window.contains(d));
        self.series(i)[(d - self.window.first) as usize]
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.model_name = name.into();
        self
    }

    /// Copy with negative forecasts floored at zero.
    pub fn clamp_negative(&self) -> ForecastSet {
        ForecastSet {
            values: self.values.iter().map(|v| v.max(0.0)).collect(),
            clamped: true,
            ..self.clone()
        }
    }

    /// Checks the set lines up with `panel`: same series in the same order and
    /// a window inside the panel horizon.
    pub fn check_against(&self, panel: &SeriesPanel) -> Result<()> {
        if self.keys.as_slice() != panel.keys() {
            return Err(Error::WindowMismatch(format!(
                "forecast set `{}` covers a different series set than the panel",
                self.model_name
            )));
        }
        if let Some(last) = self.window.last() {
            if panel.day_pos(self.window.first).is_none() || panel.day_pos(last).is_none() {
                return Err(Error::WindowMismatch(format!(
                    "forecast window {} lies outside the panel horizon {}",
                    self.window,
                    panel.horizon()
                )));
            }
        }
        Ok(())
    }
}

/// A fitted forecaster that can produce rolling one-step forecasts.
pub trait Forecaster: Send + Sync {
    fn name(&self) -> &str;

    /// Last day whose demand entered the fit; `None` for parameter-free models.
    fn fit_end(&self) -> Option<u32>;

    /// Rolling one-step forecasts over `window`. Callers should go through
    /// [`predict`], which enforces the no-leakage precondition.
    fn forecast_window(
        &self,
        panel: &SeriesPanel,
        features: Option<&FeatureMatrix>,
        window: DayWindow,
        split: Split,
    ) -> Result<ForecastSet>;

    /// Fitted parameters for the audit report.
    fn audit(&self) -> serde_json::Value;
}

pub fn predict(
    model: &dyn Forecaster,
    panel: &SeriesPanel,
    features: Option<&FeatureMatrix>,
    window: DayWindow,
    split: Split,
) -> Result<ForecastSet> {
    if let Some(end) = model.fit_end() {
        if window.first <= end {
            return Err(Error::Leakage(format!(
                "model `{}` was fitted through d_{end} but asked to forecast {window}",
                model.name()
            )));
        }
    }
    if let Some(last) = window.last() {
        if window.first <= panel.first_d() || panel.day_pos(last).is_none() {
            return Err(Error::WindowMismatch(format!(
                "window {window} needs history before it and must end inside {}",
                panel.horizon()
            )));
        }
    }
    model.forecast_window(panel, features, window, split)
}

/// `ŷ[i, t | t-1] = y[i, t-1]` with realized previous-day demand.
pub fn naive_forecast(panel: &SeriesPanel, window: DayWindow, split: Split) -> Result<ForecastSet> {
    if !window.is_empty() && window.first <= panel.first_d() {
        return Err(Error::WindowMismatch(format!(
            "naive forecast for {window} needs the day before the window"
        )));
    }
    let mut values = Vec::with_capacity(panel.n_series() * window.len as usize);
    for i in 0..panel.n_series() {
        values.extend(window.days().map(|d| panel.demand(i, d - 1)));
    }
    ForecastSet::new("naive", split, window, panel.keys().to_vec(), values)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Naive;

impl Forecaster for Naive {
    fn name(&self) -> &str {
        "naive"
    }

    fn fit_end(&self) -> Option<u32> {
        None
    }

    fn forecast_window(
        &self,
        panel: &SeriesPanel,
        _features: Option<&FeatureMatrix>,
        window: DayWindow,
        split: Split,
    ) -> Result<ForecastSet> {
        naive_forecast(panel, window, split)
    }

    fn audit(&self) -> serde_json::Value {
        serde_json::json!({ "model": "naive", "parameters": null })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::panel_from_series;

    #[test]
    fn naive_definition() {
        let p = panel_from_series(&[vec![3.0, 0.0, 7.0]]);
        let fs = naive_forecast(&p, DayWindow::inclusive(2, 3), Split::Test).unwrap();
        assert_eq!(fs.values(), &[3.0, 0.0]);
    }

    #[test]
    fn naive_constant() {
        let p = panel_from_series(&[vec![4.0; 10], vec![1.5; 10]]);
        let fs = naive_forecast(&p, DayWindow::inclusive(2, 10), Split::Test).unwrap();
        assert!(fs.series(0).iter().all(|&v| v == 4.0));
        assert!(fs.series(1).iter().all(|&v| v == 1.5));
    }

    #[test]
    fn naive_needs_previous_day() {
        let p = panel_from_series(&[vec![1.0; 5]]);
        assert!(naive_forecast(&p, DayWindow::inclusive(1, 3), Split::Test).is_err());
    }

    #[test]
    fn predict_interface_matches_naive() {
        let p = panel_from_series(&[vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0]]);
        let w = DayWindow::inclusive(3, 6);
        let a = predict(&Naive, &p, None, w, Split::Test).unwrap();
        let b = naive_forecast(&p, w, Split::Test).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_rejected() {
        let key = SeriesKey::new("A", "D", "S", "CA").unwrap();
        let err = ForecastSet::new("x", Split::Test, DayWindow::new(5, 2), vec![key], vec![1.0, f64::NAN]);
        assert!(err.is_err());
    }
}
