//! ARIMA(1,1,1) by conditional sum of squares.
//!
//! With `w[t] = y[t] - y[t-1]` the model is
//! `w[t] = c + φ w[t-1] + ε[t] + θ ε[t-1]`. Residuals are filtered
//! recursively from the first difference with a zero pre-sample innovation.
//! For fixed `(φ, θ)` every residual is affine in `c`, so the drift is
//! concentrated out in closed form and only `(φ, θ)` is searched.

use rayon::prelude::*;
use serde::Serialize;

use super::holt_winters::window_positions;
use super::{ForecastSet, Forecaster, Split};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::optim::NelderMead;
use crate::panel::{DayWindow, SeriesPanel};

/// Largest admissible `|φ|` and `|θ|` during estimation.
pub const COEF_BOUND: f64 = 0.995;
pub const MIN_TRAIN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArimaParams {
    c: f64,
    phi: f64,
    theta: f64,
    sigma2: f64,
}

impl ArimaParams {
    /// Rejects non-stationary (`|φ| ≥ 1`) or non-invertible (`|θ| ≥ 1`) values.
    pub fn new(c: f64, phi: f64, theta: f64, sigma2: f64) -> Result<Self> {
        if !(phi.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("|phi| = {} must be < 1", phi.abs())));
        }
        if !(theta.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("|theta| = {} must be < 1", theta.abs())));
        }
        if !c.is_finite() || !(sigma2 >= 0.0) {
            return Err(Error::InvalidParameter("drift and variance must be finite".into()));
        }
        Ok(ArimaParams { c, phi, theta, sigma2 })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Rolling residual filter; after absorbing `y[t]` it forecasts `y[t+1]`.
#[derive(Debug, Clone)]
pub struct ArimaFilter {
    params: ArimaParams,
    last_y: Option<f64>,
    last_w: Option<f64>,
    last_e: f64,
}

impl ArimaFilter {
    pub fn new(params: ArimaParams) -> Self {
        ArimaFilter {
            params,
            last_y: None,
            last_w: None,
            last_e: 0.0,
        }
    }

    pub fn update(&mut self, y: f64) {
        let p = &self.params;
        if let Some(prev_y) = self.last_y {
            let w = y - prev_y;
            // the first difference has no lagged difference; its innovation is the pre-sample zero
            self.last_e = match self.last_w {
                Some(prev_w) => w - p.c - p.phi * prev_w - p.theta * self.last_e,
                None => 0.0,
            };
            self.last_w = Some(w);
        }
        self.last_y = Some(y);
    }

    /// `ŷ[t+1|t] = y[t] + c + φ (y[t] - y[t-1]) + θ ε[t]`, once two
    /// observations have been absorbed.
    pub fn forecast(&self) -> Option<f64> {
        let p = &self.params;
        match (self.last_y, self.last_w) {
            (Some(y), Some(w)) => Some(y + p.c + p.phi * w + p.theta * self.last_e),
            _ => None,
        }
    }
}

/// One-step forecast after filtering residuals over `history` from its start.
pub fn arima_forecast_step(params: &ArimaParams, history: &[f64]) -> Result<f64> {
    let mut filter = ArimaFilter::new(*params);
    for &y in history {
        filter.update(y);
    }
    filter.forecast().ok_or(Error::InsufficientHistory {
        needed: 2,
        got: history.len(),
    })
}

/// Concentrated CSS at `(φ, θ)`: returns `(sse, c*)`.
fn concentrated_css(diffs: &[f64], phi: f64, theta: f64) -> (f64, f64) {
    // e[j] = a[j] - c k[j], a and k filtered with zero pre-sample
    let (mut a_prev, mut k_prev) = (0.0, 0.0);
    let (mut saa, mut sak, mut skk) = (0.0, 0.0, 0.0);
    for j in 1..diffs.len() {
        let a = diffs[j] - phi * diffs[j - 1] - theta * a_prev;
        let k = 1.0 - theta * k_prev;
        saa += a * a;
        sak += a * k;
        skk += k * k;
        a_prev = a;
        k_prev = k;
    }
    let c = if skk > 0.0 { sak / skk } else { 0.0 };
    ((saa - 2.0 * c * sak + c * c * skk).max(0.0), c)
}

#[derive(Debug, Clone, Serialize)]
pub struct ArimaFit {
    pub params: ArimaParams,
    pub css: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Conditional-sum-of-squares estimate of `(c, φ, θ)` with `σ²` the residual
/// variance. Non-convergence returns [`Error::NotConverged`] carrying the best
/// parameters seen.
pub fn arima_fit(train: &[f64]) -> Result<ArimaParams> {
    let fit = arima_fit_detailed(train)?;
    if fit.converged {
        Ok(fit.params)
    } else {
        Err(Error::NotConverged {
            iterations: fit.iterations,
            best: fit.params,
        })
    }
}

/// Like [`arima_fit`] but always returns the best point with its convergence flag.
pub fn arima_fit_detailed(train: &[f64]) -> Result<ArimaFit> {
    if train.len() < MIN_TRAIN {
        return Err(Error::InsufficientHistory {
            needed: MIN_TRAIN,
            got: train.len(),
        });
    }
    let diffs: Vec<f64> = train.windows(2).map(|w| w[1] - w[0]).collect();
    let objective = |x: &[f64]| concentrated_css(&diffs, x[0], x[1]).0;

    const STARTS: [f64; 5] = [-0.8, -0.4, 0.0, 0.4, 0.8];
    let mut start = [0.0, 0.0];
    let mut best = f64::INFINITY;
    for &phi in &STARTS {
        for &theta in &STARTS {
            let v = objective(&[phi, theta]);
            if v < best {
                best = v;
                start = [phi, theta];
            }
        }
    }
    let nm = NelderMead {
        max_iter: 1000,
        f_tol: 1e-12,
        x_tol: 1e-7,
        initial_step: 0.1,
    };
    let bound = [COEF_BOUND, COEF_BOUND];
    let m = nm.minimize(objective, &start, &[-COEF_BOUND, -COEF_BOUND], &bound);
    let (sse, c) = concentrated_css(&diffs, m.x[0], m.x[1]);
    let n_resid = (diffs.len() - 1) as f64;
    let params = ArimaParams::new(c, m.x[0], m.x[1], sse / n_resid)?;
    Ok(ArimaFit {
        params,
        css: sse,
        iterations: m.iterations,
        converged: m.converged,
    })
}

/// Per-series ARIMA(1,1,1) models fitted on a common window.
#[derive(Debug, Clone)]
pub struct FittedArima {
    fit_start: u32,
    fit_end: u32,
    fits: Vec<ArimaFit>,
}

impl FittedArima {
    /// Fits every series. Non-converged series keep their best-so-far
    /// parameters and are flagged in [`ArimaFit::converged`].
    pub fn fit(panel: &SeriesPanel, fit_window: DayWindow) -> Result<Self> {
        let (lo, hi) = window_positions(panel, fit_window)?;
        let fits = (0..panel.n_series())
            .into_par_iter()
            .map(|i| arima_fit_detailed(&panel.series(i)[lo..hi]))
            .collect::<Result<Vec<_>>>()?;
        Ok(FittedArima {
            fit_start: fit_window.first,
            fit_end: fit_window.last().expect("non-empty fit window"),
            fits,
        })
    }

    pub fn fits(&self) -> &[ArimaFit] {
        &self.fits
    }

    pub fn n_unconverged(&self) -> usize {
        self.fits.iter().filter(|f| !f.converged).count()
    }
}

impl Forecaster for FittedArima {
    fn name(&self) -> &str {
        "arima"
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
                let mut filter = ArimaFilter::new(fit.params);
                for d in self.fit_start..window.first {
                    filter.update(panel.demand(i, d));
                }
                window
                    .days()
                    .map(|d| {
                        let f = filter.forecast().expect("fit window holds at least two days");
                        filter.update(panel.demand(i, d));
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
                    "c": f.params.c,
                    "phi": f.params.phi,
                    "theta": f.params.theta,
                    "sigma2": f.params.sigma2,
                    "css": f.css,
                    "converged": f.converged,
                })
            })
            .collect();
        serde_json::json!({
            "model": "arima",
            "order": [1, 1, 1],
            "estimator": "conditional sum of squares",
            "fit_start": self.fit_start,
            "fit_end": self.fit_end,
            "unconverged": self.n_unconverged(),
            "series": series,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn simulate(n: usize, c: f64, phi: f64, theta: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = vec![0.0];
        let (mut w_prev, mut e_prev) = (0.0, 0.0);
        for _ in 0..n + 100 {
            let e: f64 = StandardNormal.sample(&mut rng);
            let w = c + phi * w_prev + e + theta * e_prev;
            y.push(y.last().unwrap() + w);
            w_prev = w;
            e_prev = e;
        }
        y.split_off(101)
    }

    #[test]
    fn rejects_unit_root_and_non_invertible() {
        assert!(ArimaParams::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(ArimaParams::new(0.0, 0.0, -1.0, 1.0).is_err());
        assert!(ArimaParams::new(0.0, 0.99, -0.99, 1.0).is_ok());
    }

    #[test]
    fn degenerate_params_are_naive() {
        let p = ArimaParams::new(0.0, 0.0, 0.0, 1.0).unwrap();
        let hist = [3.0, 5.0, 2.0, 8.0];
        assert_eq!(arima_forecast_step(&p, &hist).unwrap(), 8.0);
    }

    #[test]
    fn forecast_step_matches_hand_recursion() {
        let (c, phi, theta) = (0.1, 0.5, 0.2);
        let p = ArimaParams::new(c, phi, theta, 1.0).unwrap();
        let y = [4.0, 6.0, 5.0, 7.0, 3.0, 4.0, 8.0, 6.0, 5.0, 9.0];

        let w: Vec<f64> = (1..y.len()).map(|t| y[t] - y[t - 1]).collect();
        let mut e = vec![0.0; w.len()];
        for j in 1..w.len() {
            e[j] = w[j] - c - phi * w[j - 1] - theta * e[j - 1];
        }
        let last = w.len() - 1;
        let want = y[9] + c + phi * w[last] + theta * e[last];

        let got = arima_forecast_step(&p, &y).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn needs_two_observations() {
        let p = ArimaParams::new(0.0, 0.0, 0.0, 1.0).unwrap();
        assert!(arima_forecast_step(&p, &[1.0]).is_err());
    }

    #[test]
    fn white_noise_differences_give_zero_coefficients() {
        let y = simulate(2000, 0.0, 0.0, 0.0, 11);
        let p = arima_fit(&y).unwrap();
        // any φ = -θ is the same white-noise model, so only the sum is identified
        assert!((p.phi() + p.theta()).abs() < 0.1, "phi {} theta {}", p.phi(), p.theta());
        assert!((p.sigma2() - 1.0).abs() < 0.1);
    }

    #[test]
    fn recovers_simulated_parameters() {
        let fits: Vec<ArimaParams> = (0..4)
            .map(|seed| arima_fit(&simulate(5000, 0.0, 0.6, 0.3, seed)).unwrap())
            .collect();
        let mean = |f: fn(&ArimaParams) -> f64| fits.iter().map(f).sum::<f64>() / fits.len() as f64;
        assert!((mean(|p| p.phi()) - 0.6).abs() < 0.05, "{fits:?}");
        assert!((mean(|p| p.theta()) - 0.3).abs() < 0.05, "{fits:?}");
        assert!(mean(|p| p.c()).abs() < 0.05);
        assert!((mean(|p| p.sigma2()) - 1.0).abs() < 0.1);
    }

    #[test]
    fn short_train_is_error() {
        assert!(matches!(
            arima_fit(&[1.0; 29]),
            Err(Error::InsufficientHistory { needed: 30, got: 29 })
        ));
    }

    #[test]
    fn constant_series_fits_without_error() {
        let fit = arima_fit_detailed(&[4.0; 60]).unwrap();
        assert_eq!(fit.css, 0.0);
        assert_eq!(arima_forecast_step(&fit.params, &[4.0; 60]).unwrap(), 4.0);
    }
}
