//! Additive Holt-Winters with weekly seasonality.
//!
//! ```text
//! level:    l[t] = α (y[t] - s[t-m]) + (1-α)(l[t-1] + b[t-1])
//! trend:    b[t] = β (l[t] - l[t-1]) + (1-β) b[t-1]
//! season:   s[t] = γ (y[t] - l[t]) + (1-γ) s[t-m]
//! forecast: ŷ[t+1|t] = l[t] + b[t] + s[t+1-m]
//! ```

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;

use super::{ForecastSet, Forecaster, Split};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::optim::NelderMead;
use crate::panel::{DayWindow, SeriesPanel};

pub const WEEKLY: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HwParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl HwParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(HwParams { alpha, beta, gamma })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoltWintersState {
    pub level: f64,
    pub trend: f64,
    /// `s[t-m+1] ..= s[t]`; the front is the seasonal used by the next forecast.
    pub seasonal: VecDeque<f64>,
    pub params: HwParams,
}

impl HoltWintersState {
    /// Heuristic start: level is the first-season mean, trend the mean
    /// season-over-season change per step, seasonals the first-season
    /// deviations from that level.
    pub fn initialize(train: &[f64], m: usize, params: HwParams) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("season length must be positive".into()));
        }
        if train.len() < 2 * m {
            return Err(Error::InsufficientHistory {
                needed: 2 * m,
                got: train.len(),
            });
        }
        let first = &train[..m];
        let second = &train[m..2 * m];
        let level = first.iter().sum::<f64>() / m as f64;
        let trend = first
            .iter()
            .zip(second)
            .map(|(a, b)| (b - a) / m as f64)
            .sum::<f64>()
            / m as f64;
        let seasonal = first.iter().map(|y| y - level).collect();
        Ok(HoltWintersState {
            level,
            trend,
            seasonal,
            params,
        })
    }

    pub fn season_length(&self) -> usize {
        self.seasonal.len()
    }

    /// One-step forecast from the current state.
    pub fn forecast(&self) -> f64 {
        self.level + self.trend + self.seasonal[0]
    }

    fn update(&mut self, y: f64) {
        let HwParams { alpha, beta, gamma } = self.params;
        let s_old = self.seasonal.pop_front().expect("seasonal buffer is non-empty");
        let level = alpha * (y - s_old) + (1.0 - alpha) * (self.level + self.trend);
        let trend = beta * (level - self.level) + (1.0 - beta) * self.trend;
        let s_new = gamma * (y - level) + (1.0 - gamma) * s_old;
        self.level = level;
        self.trend = trend;
        self.seasonal.push_back(s_new);
    }
}

/// Applies the smoothing recursions with observation `y_t` and returns the
/// updated state together with `ŷ[t+1|t]`.
pub fn hw_forecast_step(state: &HoltWintersState, y_t: f64) -> (HoltWintersState, f64) {
    let mut next = state.clone();
    next.update(y_t);
    let f = next.forecast();
    (next, f)
}

/// In-sample one-step sum of squared errors from the heuristic start.
pub fn hw_sse(train: &[f64], m: usize, params: HwParams) -> Result<f64> {
    let mut state = HoltWintersState::initialize(train, m, params)?;
    let mut sse = 0.0;
    for &y in train {
        let e = y - state.forecast();
        sse += e * e;
        state.update(y);
    }
    Ok(sse)
}

#[derive(Debug, Clone, Serialize)]
pub struct HwFit {
    /// State after absorbing the whole training sequence.
    pub state: HoltWintersState,
    pub sse: f64,
}

const GRID: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Chooses α, β, γ in `[0,1]³` minimizing in-sample one-step SSE: a coarse
/// grid locates the basin, Nelder-Mead refines inside the box.
pub fn hw_fit(train: &[f64], m: usize) -> Result<HwFit> {
    let zero = HwParams::new(0.0, 0.0, 0.0)?;
    HoltWintersState::initialize(train, m, zero)?;
    let sse_at = |x: &[f64]| {
        hw_sse(train, m, HwParams { alpha: x[0], beta: x[1], gamma: x[2] }).unwrap_or(f64::INFINITY)
    };

    let mut best = ([0.0; 3], f64::INFINITY);
    for &a in &GRID {
        for &b in &GRID {
            for &g in &GRID {
                let v = sse_at(&[a, b, g]);
                if v < best.1 {
                    best = ([a, b, g], v);
                }
            }
        }
    }
    let nm = NelderMead {
        max_iter: 300,
        initial_step: 0.1,
        ..NelderMead::default()
    };
    let refined = nm.minimize(sse_at, &best.0, &[0.0; 3], &[1.0; 3]);
    let (x, sse) = if refined.fx <= best.1 {
        (refined.x, refined.fx)
    } else {
        (best.0.to_vec(), best.1)
    };

    let params = HwParams::new(x[0], x[1], x[2])?;
    let mut state = HoltWintersState::initialize(train, m, params)?;
    for &y in train {
        state.update(y);
    }
    Ok(HwFit { state, sse })
}

/// Per-series Holt-Winters models fitted on a common window.
#[derive(Debug, Clone)]
pub struct FittedHoltWinters {
    fit_end: u32,
    fits: Vec<HwFit>,
}

impl FittedHoltWinters {
    pub fn fit(panel: &SeriesPanel, fit_window: DayWindow, m: usize) -> Result<Self> {
        let (lo, hi) = window_positions(panel, fit_window)?;
        let fits = (0..panel.n_series())
            .into_par_iter()
            .map(|i| hw_fit(&panel.series(i)[lo..hi], m))
            .collect::<Result<Vec<_>>>()?;
        Ok(FittedHoltWinters {
            fit_end: fit_window.last().expect("non-empty fit window"),
            fits,
        })
    }

    pub fn fits(&self) -> &[HwFit] {
        &self.fits
    }
}

pub(crate) fn window_positions(panel: &SeriesPanel, w: DayWindow) -> Result<(usize, usize)> {
    let last = w.last().ok_or(Error::EmptyWindow)?;
    match (panel.day_pos(w.first), panel.day_pos(last)) {
        (Some(lo), Some(hi)) => Ok((lo, hi + 1)),
        _ => Err(Error::WindowMismatch(format!(
            "fit window {w} outside panel horizon {}",
            panel.horizon()
        ))),
    }
}

impl Forecaster for FittedHoltWinters {
    fn name(&self) -> &str {
        "holt_winters"
    }

    fn fit_end(&self) -> Option<u32> {
        Some(self.fit_end)
    }

    fn forecast_window(
        &self,
        panel: &SeriesPanel,
        _features: Option<&FeatureMatrix>,
        window: DayWindow,
        split: Split,
    ) -> Result<ForecastSet> {
        if self.fits.len() != panel.n_series() {
            return Err(Error::WindowMismatch("model fitted on a different panel".into()));
        }
        let values: Vec<f64> = self
            .fits
            .par_iter()
            .enumerate()
            .flat_map_iter(|(i, fit)| {
                let mut state = fit.state.clone();
                for d in self.fit_end + 1..window.first {
                    state.update(panel.demand(i, d));
                }
                window
                    .days()
                    .map(|d| {
                        let f = state.forecast();
                        state.update(panel.demand(i, d));
                        f
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        ForecastSet::new(self.name(), split, window, panel.keys().to_vec(), values)
    }

    fn audit(&self) -> serde_json::Value {
        let series: Vec<_> = self
            .fits
            .iter()
            .map(|f| {
                serde_json::json!({
                    "alpha": f.state.params.alpha,
                    "beta": f.state.params.beta,
                    "gamma": f.state.params.gamma,
                    "sse": f.sse,
                })
            })
            .collect();
        serde_json::json!({
            "model": "holt_winters",
            "season_length": self.fits.first().map(|f| f.state.season_length()),
            "fit_end": self.fit_end,
            "series": series,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::panel_from_series;

    fn state(level: f64, trend: f64, seasonal: &[f64], a: f64, b: f64, g: f64) -> HoltWintersState {
        HoltWintersState {
            level,
            trend,
            seasonal: seasonal.iter().copied().collect(),
            params: HwParams::new(a, b, g).unwrap(),
        }
    }

    #[test]
    fn zero_smoothing_freezes_level_and_trend() {
        let s0 = state(3.0, 0.5, &[1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0, 0.0, 0.0);
        let (s1, f1) = hw_forecast_step(&s0, 100.0);
        // level advances by the frozen trend only; the seasonal buffer rotates unchanged
        assert_eq!(s1.level, 3.5);
        assert_eq!(s1.trend, 0.5);
        assert_eq!(f1, 3.5 + 0.5 + -1.0);
        let s_flat = state(2.0, 0.0, &[0.0; 7], 0.0, 0.0, 0.0);
        let (s2, f2) = hw_forecast_step(&s_flat, 9.0);
        assert_eq!(s2, s_flat);
        assert_eq!(f2, 2.0);
    }

    #[test]
    fn alpha_one_collapses_to_naive() {
        let mut s = state(0.0, 0.0, &[0.0; 7], 1.0, 0.0, 0.0);
        for y in [3.0, 0.0, 7.0, 2.5] {
            let (next, f) = hw_forecast_step(&s, y);
            assert_eq!(f, y);
            s = next;
        }
    }

    #[test]
    fn beta_gamma_zero_is_simple_exponential_smoothing() {
        let alpha = 0.3;
        let ys = [4.0, 2.0, 6.0, 5.0, 1.0, 3.0];
        let mut s = state(2.0, 0.0, &[0.0; 7], alpha, 0.0, 0.0);
        let mut ses = 2.0;
        for y in ys {
            let (next, f) = hw_forecast_step(&s, y);
            ses = alpha * y + (1.0 - alpha) * ses;
            assert!((f - ses).abs() < 1e-12);
            s = next;
        }
    }

    #[test]
    fn three_step_trace_matches_hand_recursion() {
        let ys = [
            5.0, 3.0, 4.0, 6.0, 2.0, 1.0, 7.0, 6.0, 4.0, 5.0, 7.0, 3.0, 2.0, 8.0,
        ];
        let (a, b, g) = (0.5, 0.3, 0.2);
        let s0 = HoltWintersState::initialize(&ys, 7, HwParams::new(a, b, g).unwrap()).unwrap();

        // hand recursion, independent of the state struct
        let mut l = ys[..7].iter().sum::<f64>() / 7.0;
        let mut tr = (0..7).map(|i| (ys[i + 7] - ys[i]) / 7.0).sum::<f64>() / 7.0;
        let mut seas: Vec<f64> = ys[..7].iter().map(|y| y - l).collect();
        let mut expected = Vec::new();
        for t in 0..3 {
            let y = ys[t];
            let s_old = seas[t];
            let l_new = a * (y - s_old) + (1.0 - a) * (l + tr);
            let b_new = b * (l_new - l) + (1.0 - b) * tr;
            seas.push(g * (y - l_new) + (1.0 - g) * s_old);
            l = l_new;
            tr = b_new;
            expected.push(l + tr + seas[t + 1]);
        }

        let mut s = s0;
        for (t, want) in expected.iter().enumerate() {
            let (next, f) = hw_forecast_step(&s, ys[t]);
            assert!((f - want).abs() < 1e-12, "step {t}: {f} vs {want}");
            s = next;
        }
    }

    #[test]
    fn constant_series_fit() {
        let ys = vec![5.0; 60];
        let fit = hw_fit(&ys, 7).unwrap();
        assert!((fit.state.level - 5.0).abs() < 1e-9);
        assert!(fit.state.trend.abs() < 1e-9);
        assert!(fit.state.seasonal.iter().all(|s| s.abs() < 1e-9));
        assert!((fit.state.forecast() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn periodic_series_reproduces_cycle() {
        let cycle = [2.0, 9.0, 4.0, 0.0, 6.0, 1.0, 5.0];
        let ys: Vec<f64> = (0..140).map(|k| cycle[k % 7]).collect();
        let fit = hw_fit(&ys[..112], 7).unwrap();
        assert!(fit.sse < 1e-12);
        let panel = panel_from_series(std::slice::from_ref(&ys));
        let model = FittedHoltWinters::fit(&panel, DayWindow::inclusive(1, 112), 7).unwrap();
        let fs = super::super::predict(&model, &panel, None, DayWindow::inclusive(113, 140), Split::Test)
            .unwrap();
        for (k, f) in fs.series(0).iter().enumerate() {
            assert!((f - ys[112 + k]).abs() < 1e-6);
        }
    }

    #[test]
    fn too_short_is_error() {
        assert!(matches!(
            hw_fit(&[1.0; 13], 7),
            Err(Error::InsufficientHistory { needed: 14, got: 13 })
        ));
    }

    #[test]
    fn fit_beats_fixed_params_on_noisy_seasonal() {
        let ys: Vec<f64> = (0..200)
            .map(|k| 10.0 + [3.0, -1.0, 0.0, 2.0, -2.0, -3.0, 1.0][k % 7] + ((k * 37 % 11) as f64 - 5.0) * 0.3)
            .collect();
        let fit = hw_fit(&ys, 7).unwrap();
        for p in [(0.5, 0.5, 0.5), (0.1, 0.0, 0.1), (1.0, 1.0, 1.0)] {
            let fixed = hw_sse(&ys, 7, HwParams::new(p.0, p.1, p.2).unwrap()).unwrap();
            assert!(fit.sse <= fixed + 1e-9);
        }
    }

    #[test]
    fn refuses_leaky_window() {
        let panel = panel_from_series(&[vec![1.0; 60]]);
        let model = FittedHoltWinters::fit(&panel, DayWindow::inclusive(1, 40), 7).unwrap();
        let err = super::super::predict(&model, &panel, None, DayWindow::inclusive(40, 50), Split::Test);
        assert!(matches!(err, Err(Error::Leakage(_))));
    }
}
