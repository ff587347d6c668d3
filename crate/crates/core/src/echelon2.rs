//! Two-echelon network: one distribution center (DC) supplying a set of
//! stores.
//!
//! Each day the DC orders the clamped sum of store forecasts. Stores request
//! their own clamped forecasts. When DC stock plus the order covers all
//! requests every store gets its request; otherwise supply is rationed in
//! proportion to requests.
//!
//! Two points below are interpretations rather than given facts:
//! - the DC period cost is the newsvendor cost of DC supply
//!   (`I[t] + Q[t]`) against aggregated store demand under `(h_dc, b_dc)`;
//! - DC stock carries over as `I[t+1] = max(0, I[t] + Q[t] - Σ F[s,t])`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ForecastSet;
use crate::newsvendor::{order_from_forecast, period_cost, CostParams};
use crate::panel::SeriesPanel;

pub const ALLOC_EPS: f64 = 1e-8;
pub const FILL_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchelonConfig {
    /// Panel series indices acting as stores.
    pub store_set: Vec<usize>,
    pub dc_cost: CostParams,
    pub store_shortage: f64,
    pub initial_dc_inventory: f64,
}

impl EchelonConfig {
    pub fn validate(&self, n_series: usize) -> Result<()> {
        if self.store_set.is_empty() {
            return Err(Error::Config("two-echelon store set is empty".into()));
        }
        if let Some(&s) = self.store_set.iter().find(|&&s| s >= n_series) {
            return Err(Error::Config(format!("store index {s} outside the panel ({n_series} series)")));
        }
        if !(self.store_shortage > 0.0 && self.store_shortage.is_finite()) {
            return Err(Error::Config("store shortage cost must be positive".into()));
        }
        if !(self.initial_dc_inventory >= 0.0 && self.initial_dc_inventory.is_finite()) {
            return Err(Error::Config("initial DC inventory must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchelonOutcome {
    pub avg_network_cost: f64,
    pub network_fill_rate: f64,
    /// `I[t]` at the start of every window day, plus the closing level.
    pub dc_inventory: Vec<f64>,
    pub dc_orders: Vec<f64>,
    pub daily_network_cost: Vec<f64>,
    /// Per store, `Σ_t max(D - F, 0)`.
    pub store_shortfall: Vec<f64>,
    pub total_fulfilled: f64,
    pub total_demand: f64,
}

/// Per-day DC realized demand and DC forecast (sums over the store set).
pub fn aggregate_dc_demand(
    fs: &ForecastSet,
    panel: &SeriesPanel,
    store_set: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if store_set.is_empty() {
        return Err(Error::Config("two-echelon store set is empty".into()));
    }
    fs.check_against(panel)?;
    let realized = fs
        .window()
        .days()
        .map(|d| store_set.iter().map(|&s| panel.demand(s, d)).sum())
        .collect();
    let forecast = fs
        .window()
        .days()
        .map(|d| store_set.iter().map(|&s| fs.get(s, d)).sum())
        .collect();
    Ok((realized, forecast))
}

/// Fulfillment under DC supply `available`. Requests are met in full when
/// supply covers them, otherwise `F[s] = R[s] / (ΣR + ε) · available`.
pub fn allocate(requests: &[f64], available: f64) -> Vec<f64> {
    let total: f64 = requests.iter().sum();
    if total <= available {
        requests.to_vec()
    } else {
        requests
            .iter()
            .map(|r| r / (total + ALLOC_EPS) * available)
            .collect()
    }
}

pub fn simulate_network(fs: &ForecastSet, panel: &SeriesPanel, cfg: &EchelonConfig) -> Result<EchelonOutcome> {
    cfg.validate(panel.n_series())?;
    fs.check_against(panel)?;
    if fs.window().is_empty() {
        return Err(Error::EmptyWindow);
    }
    let stores = &cfg.store_set;
    let mut inventory = cfg.initial_dc_inventory;
    let mut dc_inventory = vec![inventory];
    let mut dc_orders = Vec::with_capacity(fs.window().len as usize);
    let mut daily = Vec::with_capacity(fs.window().len as usize);
    let mut shortfall = vec![0.0; stores.len()];
    let (mut fulfilled_total, mut demand_total) = (0.0, 0.0);

    for d in fs.window().days() {
        let forecasts: Vec<f64> = stores.iter().map(|&s| fs.get(s, d)).collect();
        let demand: Vec<f64> = stores.iter().map(|&s| panel.demand(s, d)).collect();
        let dc_order = order_from_forecast(forecasts.iter().sum());
        let requests: Vec<f64> = forecasts.iter().map(|&f| order_from_forecast(f)).collect();
        let available = inventory + dc_order;
        let fulfilled = allocate(&requests, available);

        let dc_demand: f64 = demand.iter().sum();
        let mut cost = period_cost(available, dc_demand, &cfg.dc_cost);
        for (k, (&dem, &ful)) in demand.iter().zip(&fulfilled).enumerate() {
            let short = (dem - ful).max(0.0);
            shortfall[k] += short;
            cost += cfg.store_shortage * short;
            fulfilled_total += dem.min(ful);
            demand_total += dem;
        }
        inventory = (available - fulfilled.iter().sum::<f64>()).max(0.0);
        dc_inventory.push(inventory);
        dc_orders.push(dc_order);
        daily.push(cost);
    }

    Ok(EchelonOutcome {
        avg_network_cost: daily.iter().sum::<f64>() / daily.len() as f64,
        network_fill_rate: fulfilled_total / (demand_total + FILL_EPS),
        dc_inventory,
        dc_orders,
        daily_network_cost: daily,
        store_shortfall: shortfall,
        total_fulfilled: fulfilled_total,
        total_demand: demand_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::Split;
    use crate::panel::DayWindow;
    use crate::synthetic::panel_from_series;

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate(&[2.0, 2.0], 10.0), vec![2.0, 2.0]);
        let f = allocate(&[6.0, 2.0], 4.0);
        assert!((f[0] - 3.0).abs() < 1e-8 && (f[1] - 1.0).abs() < 1e-8);
        assert_eq!(allocate(&[0.0, 0.0], 4.0), vec![0.0, 0.0]);
    }

    #[test]
    fn aggregation() {
        let p = panel_from_series(&[vec![0.0, 1.0, 2.0], vec![0.0, 3.0, 4.0]]);
        let fs = ForecastSet::new(
            "m",
            Split::Test,
            DayWindow::inclusive(2, 3),
            p.keys().to_vec(),
            vec![1.5, -1.0, 2.5, -2.0],
        )
        .unwrap();
        let (real, fc) = aggregate_dc_demand(&fs, &p, &[0, 1]).unwrap();
        assert_eq!(real, vec![4.0, 6.0]);
        assert_eq!(fc, vec![4.0, -3.0]);
        assert_eq!(order_from_forecast(fc[1]), 0.0);
        assert!(aggregate_dc_demand(&fs, &p, &[]).is_err());
    }

    #[test]
    fn single_day_hand_trace() {
        let p = panel_from_series(&[vec![0.0, 3.0], vec![0.0, 5.0]]);
        let fs = ForecastSet::new("m", Split::Test, DayWindow::inclusive(2, 2), p.keys().to_vec(), vec![2.0, 2.0])
            .unwrap();
        let cfg = EchelonConfig {
            store_set: vec![0, 1],
            dc_cost: CostParams::new(1.0, 5.0).unwrap(),
            store_shortage: 5.0,
            initial_dc_inventory: 0.0,
        };
        let out = simulate_network(&fs, &p, &cfg).unwrap();
        assert_eq!(out.dc_orders, vec![4.0]);
        assert!((out.avg_network_cost - 40.0).abs() < 1e-12);
        assert!((out.network_fill_rate - 0.5).abs() < 1e-9);
        assert_eq!(out.store_shortfall, vec![1.0, 3.0]);
    }

    #[test]
    fn zero_forecasts_are_all_shortage() {
        let p = panel_from_series(&[vec![0.0, 3.0, 1.0], vec![0.0, 5.0, 2.0]]);
        let fs = ForecastSet::new("z", Split::Test, DayWindow::inclusive(2, 3), p.keys().to_vec(), vec![0.0; 4])
            .unwrap();
        let cfg = EchelonConfig {
            store_set: vec![0, 1],
            dc_cost: CostParams::new(1.0, 4.0).unwrap(),
            store_shortage: 7.0,
            initial_dc_inventory: 0.0,
        };
        let out = simulate_network(&fs, &p, &cfg).unwrap();
        assert_eq!(out.network_fill_rate, 0.0);
        assert_eq!(out.daily_network_cost, vec![4.0 * 8.0 + 7.0 * 8.0, 4.0 * 3.0 + 7.0 * 3.0]);
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = EchelonConfig {
            store_set: vec![3],
            dc_cost: CostParams::new(1.0, 4.0).unwrap(),
            store_shortage: 1.0,
            initial_dc_inventory: 0.0,
        };
        assert!(cfg.validate(2).is_err());
    }
}
