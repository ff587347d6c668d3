//! Pooled accuracy measures of a forecast set against realized demand.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forecast::ForecastSet;
use crate::panel::SeriesPanel;

pub const MAPE_EPS: f64 = 1e-8;
/// MAPE above 1000 % is flagged as unreliable.
pub const MAPE_UNRELIABLE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub model_name: String,
    pub rmse: f64,
    pub mae: f64,
    /// Fraction, not percent.
    pub mape: f64,
    pub mape_unreliable: bool,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesAccuracy {
    pub series: String,
    pub rmse: f64,
    pub mae: f64,
}

fn pairs<'a>(fs: &'a ForecastSet, panel: &'a SeriesPanel) -> Result<impl Iterator<Item = (f64, f64)> + 'a> {
    fs.check_against(panel)?;
    if fs.window().is_empty() || fs.n_series() == 0 {
        return Err(Error::EmptyWindow);
    }
    Ok((0..fs.n_series()).flat_map(move |i| {
        fs.window()
            .days()
            .zip(fs.series(i))
            .map(move |(d, &f)| (f, panel.demand(i, d)))
    }))
}

pub fn rmse(fs: &ForecastSet, panel: &SeriesPanel) -> Result<f64> {
    let (sum, n) = pairs(fs, panel)?.fold((0.0, 0usize), |(s, n), (f, y)| (s + (f - y) * (f - y), n + 1));
    Ok((sum / n as f64).sqrt())
}

pub fn mae(fs: &ForecastSet, panel: &SeriesPanel) -> Result<f64> {
    let (sum, n) = pairs(fs, panel)?.fold((0.0, 0usize), |(s, n), (f, y)| (s + (f - y).abs(), n + 1));
    Ok(sum / n as f64)
}

/// Mean of `|f - y| / (|y| + eps)`. Explodes on zero-demand days by design of
/// the measure; see [`AccuracyReport::mape_unreliable`].
pub fn mape(fs: &ForecastSet, panel: &SeriesPanel, eps: f64) -> Result<f64> {
    let (sum, n) = pairs(fs, panel)?
        .fold((0.0, 0usize), |(s, n), (f, y)| (s + (f - y).abs() / (y.abs() + eps), n + 1));
    Ok(sum / n as f64)
}

pub fn accuracy(fs: &ForecastSet, panel: &SeriesPanel) -> Result<AccuracyReport> {
    let mape = mape(fs, panel, MAPE_EPS)?;
    Ok(AccuracyReport {
        model_name: fs.model_name().to_string(),
        rmse: rmse(fs, panel)?,
        mae: mae(fs, panel)?,
        mape,
        mape_unreliable: mape > MAPE_UNRELIABLE,
        n_points: fs.n_series() * fs.window().len as usize,
    })
}

/// Per-series RMSE and MAE for diagnostics.
pub fn per_series(fs: &ForecastSet, panel: &SeriesPanel) -> Result<Vec<SeriesAccuracy>> {
    fs.check_against(panel)?;
    if fs.window().is_empty() {
        return Err(Error::EmptyWindow);
    }
    Ok((0..fs.n_series())
        .map(|i| {
            let errs: Vec<f64> = fs
                .window()
                .days()
                .zip(fs.series(i))
                .map(|(d, f)| f - panel.demand(i, d))
                .collect();
            let n = errs.len() as f64;
            SeriesAccuracy {
                series: fs.keys()[i].to_string(),
                rmse: (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
                mae: errs.iter().map(|e| e.abs()).sum::<f64>() / n,
            }
        })
        .collect())
}
