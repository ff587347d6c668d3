//! Rolling single-period newsvendor evaluation of point forecasts.
//!
//! Each `(series, day)` is an independent period: the order is the clamped
//! forecast `Q = max(0, ŷ)`, placed before demand `D` is seen, and costs
//! `h·max(Q-D, 0) + b·max(D-Q, 0)`. Nothing carries over between days.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ForecastSet;
use crate::panel::SeriesPanel;

/// Guard in the fill-rate denominator.
pub const FILL_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    h: f64,
    b: f64,
}

impl CostParams {
    pub fn new(h: f64, b: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "holding ({h}) and shortage ({b}) costs must be positive and finite"
            )));
        }
        Ok(CostParams { h, b })
    }

    pub fn holding(&self) -> f64 {
        self.h
    }

    pub fn shortage(&self) -> f64 {
        self.b
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Round orders to the nearest unit before costing (sensitivity check only).
    pub round_orders: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    pub model_name: String,
    pub params: CostParams,
    pub avg_cost: f64,
    pub fill_rate: f64,
    pub total_overage_units: f64,
    pub total_shortage_units: f64,
    pub total_demand: f64,
    pub n_cells: usize,
    /// `series × window day` costs, row-major.
    #[serde(skip)]
    pub per_day_costs: Vec<f64>,
}

pub fn order_from_forecast(forecast: f64) -> f64 {
    forecast.max(0.0)
}

pub fn period_cost(order: f64, demand: f64, params: &CostParams) -> f64 {
    params.h * (order - demand).max(0.0) + params.b * (demand - order).max(0.0)
}

pub fn simulate(fs: &ForecastSet, panel: &SeriesPanel, params: &CostParams) -> Result<SimOutcome> {
    simulate_with(fs, panel, params, SimOptions::default())
}

pub fn simulate_with(
    fs: &ForecastSet,
    panel: &SeriesPanel,
    params: &CostParams,
    opts: SimOptions,
) -> Result<SimOutcome> {
    fs.check_against(panel)?;
    let n_cells = fs.n_series() * fs.window().len as usize;
    if n_cells == 0 {
        return Err(Error::EmptyWindow);
    }
    let mut per_day_costs = Vec::with_capacity(n_cells);
    let (mut over, mut short, mut demand_total) = (0.0, 0.0, 0.0);
    for i in 0..fs.n_series() {
        for (d, &f) in fs.window().days().zip(fs.series(i)) {
            let mut q = order_from_forecast(f);
            if opts.round_orders {
                q = q.round();
            }
            let demand = panel.demand(i, d);
            over += (q - demand).max(0.0);
            short += (demand - q).max(0.0);
            demand_total += demand;
            per_day_costs.push(period_cost(q, demand, params));
        }
    }
    Ok(SimOutcome {
        model_name: fs.model_name().to_string(),
        params: *params,
        avg_cost: (params.h * over + params.b * short) / n_cells as f64,
        fill_rate: 1.0 - short / (demand_total + FILL_EPS),
        total_overage_units: over,
        total_shortage_units: short,
        total_demand: demand_total,
        n_cells,
        per_day_costs,
    })
}
