//! Models × shortage-penalty grid with baseline-relative deltas.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forecast::ForecastSet;
use crate::metrics::{accuracy, AccuracyReport};
use crate::newsvendor::{simulate_with, CostParams, SimOptions, SimOutcome};
use crate::panel::SeriesPanel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub h: f64,
    pub b_values: Vec<f64>,
    pub baseline: String,
    /// Penalty at which the headline accuracy-and-cost table is taken.
    pub reference_b: f64,
    pub options: SimOptions,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            h: 1.0,
            b_values: vec![2.0, 5.0, 10.0],
            baseline: "naive".into(),
            reference_b: 5.0,
            options: SimOptions::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.b_values.is_empty() {
            return Err(Error::Config("sweep.b_values must not be empty".into()));
        }
        for &b in &self.b_values {
            CostParams::new(self.h, b)?;
        }
        if !self.b_values.contains(&self.reference_b) {
            return Err(Error::Config(format!(
                "sweep.reference_b = {} is not among b_values",
                self.reference_b
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub model: String,
    pub b: f64,
    pub avg_cost: f64,
    pub fill_rate: f64,
    pub rmse: f64,
    pub mae: f64,
    /// `(1 - cost / baseline cost) · 100` at the same `b`.
    pub cost_reduction_pct: f64,
    /// `(fill - baseline fill) · 100`.
    pub fill_gain_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinityCheck {
    pub model: String,
    pub intercept: f64,
    pub slope: f64,
    /// Mean shortage units per series-day; the slope cost must have in `b`.
    pub expected_slope: f64,
    /// Largest deviation of `avg_cost(b)` from the least-squares line.
    pub residual: f64,
    pub fill_rate_invariant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub b: f64,
    /// Model names, cheapest first.
    pub order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub h: f64,
    pub reference_b: f64,
    pub baseline: String,
    pub accuracy: Vec<AccuracyReport>,
    pub rows: Vec<SweepRow>,
    pub affinity: Vec<AffinityCheck>,
    pub rankings: Vec<Ranking>,
    /// True when every per-b ranking equals the reference-b ranking.
    pub ranking_stable: bool,
    #[serde(skip)]
    pub outcomes: Vec<SimOutcome>,
}

/// Least-squares line through `(x, y)`; returns `(intercept, slope, max |residual|)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).abs())
        .fold(0.0, f64::max);
    (intercept, slope, residual)
}

pub fn run_sweep(spec: &SweepSpec, sets: &[ForecastSet], panel: &SeriesPanel) -> Result<SimReport> {
    spec.validate()?;
    let names: BTreeSet<&str> = sets.iter().map(|s| s.model_name()).collect();
    if names.len() != sets.len() {
        return Err(Error::Config("model names in a sweep must be unique".into()));
    }
    let base_idx = sets
        .iter()
        .position(|s| s.model_name() == spec.baseline)
        .ok_or_else(|| Error::Config(format!("baseline `{}` is not among the models", spec.baseline)))?;
    if let Some(first) = sets.first() {
        if let Some(bad) = sets.iter().find(|s| s.window() != first.window()) {
            return Err(Error::WindowMismatch(format!(
                "`{}` covers {} but `{}` covers {}",
                bad.model_name(),
                bad.window(),
                first.model_name(),
                first.window()
            )));
        }
    }

    let acc: Vec<AccuracyReport> = sets.iter().map(|s| accuracy(s, panel)).collect::<Result<_>>()?;
    let mut outcomes = Vec::with_capacity(sets.len() * spec.b_values.len());
    for set in sets {
        for &b in &spec.b_values {
            outcomes.push(simulate_with(set, panel, &CostParams::new(spec.h, b)?, spec.options)?);
        }
    }
    let nb = spec.b_values.len();
    let outcome = |m: usize, k: usize| &outcomes[m * nb + k];

    let mut rows = Vec::with_capacity(outcomes.len());
    for (m, set) in sets.iter().enumerate() {
        for (k, &b) in spec.b_values.iter().enumerate() {
            let (o, base) = (outcome(m, k), outcome(base_idx, k));
            rows.push(SweepRow {
                model: set.model_name().to_string(),
                b,
                avg_cost: o.avg_cost,
                fill_rate: o.fill_rate,
                rmse: acc[m].rmse,
                mae: acc[m].mae,
                cost_reduction_pct: (1.0 - o.avg_cost / base.avg_cost) * 100.0,
                fill_gain_pp: (o.fill_rate - base.fill_rate) * 100.0,
            });
        }
    }

    let affinity = sets
        .iter()
        .enumerate()
        .map(|(m, set)| {
            let costs: Vec<f64> = (0..nb).map(|k| outcome(m, k).avg_cost).collect();
            let (intercept, slope, residual) = fit_line(&spec.b_values, &costs);
            let o0 = outcome(m, 0);
            AffinityCheck {
                model: set.model_name().to_string(),
                intercept,
                slope,
                expected_slope: o0.total_shortage_units / o0.n_cells as f64,
                residual,
                fill_rate_invariant: (0..nb).all(|k| outcome(m, k).fill_rate == o0.fill_rate),
            }
        })
        .collect();

    let rankings: Vec<Ranking> = spec
        .b_values
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let mut idx: Vec<usize> = (0..sets.len()).collect();
            idx.sort_by(|&x, &y| outcome(x, k).avg_cost.total_cmp(&outcome(y, k).avg_cost));
            Ranking {
                b,
                order: idx.iter().map(|&i| sets[i].model_name().to_string()).collect(),
            }
        })
        .collect();
    let ref_rank = rankings
        .iter()
        .find(|r| r.b == spec.reference_b)
        .map(|r| r.order.clone())
        .unwrap_or_default();
    let ranking_stable = rankings.iter().all(|r| r.order == ref_rank);

    Ok(SimReport {
        h: spec.h,
        reference_b: spec.reference_b,
        baseline: spec.baseline.clone(),
        accuracy: acc,
        rows,
        affinity,
        rankings,
        ranking_stable,
        outcomes,
    })
}

impl SimReport {
    pub fn rows_at(&self, b: f64) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.b == b)
    }

    pub fn row(&self, model: &str, b: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.model == model && r.b == b)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,b,avg_cost,fill_rate,rmse,mae,cost_reduction_pct,fill_gain_pp\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.4},{:.4}",
                r.model, r.b, r.avg_cost, r.fill_rate, r.rmse, r.mae, r.cost_reduction_pct, r.fill_gain_pp
            );
        }
        s
    }

    /// Nested by model: accuracy, per-b costs and the affinity check.
    pub fn to_json(&self) -> serde_json::Value {
        let models: Vec<serde_json::Value> = self
            .accuracy
            .iter()
            .zip(&self.affinity)
            .map(|(acc, aff)| {
                let by_b: Vec<_> = self
                    .rows
                    .iter()
                    .filter(|r| r.model == acc.model_name)
                    .map(|r| {
                        serde_json::json!({
                            "b": r.b,
                            "avg_cost": r.avg_cost,
                            "fill_rate": r.fill_rate,
                            "cost_reduction_pct": r.cost_reduction_pct,
                            "fill_gain_pp": r.fill_gain_pp,
                        })
                    })
                    .collect();
                serde_json::json!({
                    "model": acc.model_name,
                    "accuracy": acc,
                    "costs": by_b,
                    "affinity": aff,
                })
            })
            .collect();
        serde_json::json!({
            "h": self.h,
            "reference_b": self.reference_b,
            "baseline": self.baseline,
            "models": models,
            "rankings": self.rankings,
            "ranking_stable": self.ranking_stable,
        })
    }

    /// Plain-text headline and sensitivity tables.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Forecast accuracy and newsvendor KPIs (h={}, b={}); deltas vs {}",
            self.h, self.reference_b, self.baseline
        );
        let _ = writeln!(
            s,
            "{:<22} {:>8} {:>8} {:>10} {:>9} {:>8} {:>9}",
            "Model", "RMSE", "MAE", "Cost/day", "Fill", "Cost-%", "Fill+pp"
        );
        for r in self.rows_at(self.reference_b) {
            let _ = writeln!(
                s,
                "{:<22} {:>8.3} {:>8.3} {:>10.3} {:>9.3} {:>7.1}% {:>9.1}",
                r.model, r.rmse, r.mae, r.avg_cost, r.fill_rate, r.cost_reduction_pct, r.fill_gain_pp
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Average daily cost by shortage penalty (h={})", self.h);
        let mut header = format!("{:<22}", "Model");
        let bs: Vec<f64> = self.rankings.iter().map(|r| r.b).collect();
        for b in &bs {
            let _ = write!(header, " {:>10}", format!("b={b}"));
        }
        let _ = writeln!(s, "{header}");
        let mut models: Vec<&str> = self.accuracy.iter().map(|a| a.model_name.as_str()).collect();
        models.sort_unstable();
        for m in models {
            let _ = write!(s, "{m:<22}");
            for &b in &bs {
                let cost = self.row(m, b).map_or(f64::NAN, |r| r.avg_cost);
                let _ = write!(s, " {cost:>10.3}");
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Cost ranking per b (cheapest first):");
        for r in &self.rankings {
            let _ = writeln!(s, "  b={:<6} {}", r.b, r.order.join(" < "));
        }
        let _ = writeln!(s, "  ranking stable across b: {}", self.ranking_stable);
        s
    }

    pub fn write_all(&self, dir: &Path) -> Result<()> {
        let put = |name: &str, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(p, e))
        };
        put("sweep.csv", self.to_csv())?;
        put(
            "sweep.json",
            serde_json::to_string_pretty(&self.to_json()).expect("report serializes") + "\n",
        )?;
        put("tables.txt", self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{naive_forecast, Split};
    use crate::panel::DayWindow;
    use crate::synthetic::panel_from_series;

    fn setup() -> (SeriesPanel, Vec<ForecastSet>) {
        let p = panel_from_series(&[
            vec![2.0, 0.0, 5.0, 3.0, 1.0, 4.0, 2.0, 6.0],
            vec![1.0, 1.0, 0.0, 2.0, 3.0, 0.0, 1.0, 2.0],
        ]);
        let w = DayWindow::inclusive(3, 8);
        let naive = naive_forecast(&p, w, Split::Test).unwrap();
        let flat = ForecastSet::new("flat", Split::Test, w, p.keys().to_vec(), vec![2.0; 12]).unwrap();
        (p, vec![naive, flat])
    }

    #[test]
    fn baseline_has_zero_deltas_and_costs_are_affine() {
        let (p, sets) = setup();
        let r = run_sweep(&SweepSpec::default(), &sets, &p).unwrap();
        assert_eq!(r.rows.len(), 6);
        for row in r.rows.iter().filter(|x| x.model == "naive") {
            assert_eq!(row.cost_reduction_pct, 0.0);
            assert_eq!(row.fill_gain_pp, 0.0);
        }
        for a in &r.affinity {
            assert!(a.residual < 1e-9);
            assert!((a.slope - a.expected_slope).abs() < 1e-9);
            assert!(a.fill_rate_invariant);
        }
        assert!(r.to_text().contains("naive"));
        assert_eq!(r.to_csv().lines().count(), 7);
    }

    #[test]
    fn missing_baseline_and_empty_b() {
        let (p, sets) = setup();
        let spec = SweepSpec {
            baseline: "nope".into(),
            ..SweepSpec::default()
        };
        assert!(matches!(run_sweep(&spec, &sets, &p), Err(Error::Config(_))));
        let spec = SweepSpec {
            b_values: vec![],
            ..SweepSpec::default()
        };
        assert!(matches!(run_sweep(&spec, &sets, &p), Err(Error::Config(_))));
    }

    #[test]
    fn mismatched_windows() {
        let (p, mut sets) = setup();
        sets.push(naive_forecast(&p, DayWindow::inclusive(4, 8), Split::Test).unwrap().renamed("late"));
        assert!(matches!(
            run_sweep(&SweepSpec::default(), &sets, &p),
            Err(Error::WindowMismatch(_))
        ));
    }

    #[test]
    fn line_fit() {
        let (a, b, r) = fit_line(&[2.0, 5.0, 10.0], &[1.0 + 2.0 * 0.5, 1.0 + 5.0 * 0.5, 1.0 + 10.0 * 0.5]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 0.5).abs() < 1e-12 && r < 1e-12);
    }
}
