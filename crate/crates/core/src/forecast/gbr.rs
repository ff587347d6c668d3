//! Least-squares gradient boosting over depth-limited regression trees,
//! trained globally on pooled `(series, day)` rows.
//!
//! Prediction is `base + η · Σ g_m(x)`. Each stage fits a tree to the current
//! residuals with greedy axis-aligned splits that minimize squared error and
//! mean-residual leaves. Split search runs on per-column histograms: columns
//! with at most [`MAX_BINS`] distinct values are searched exactly, wider
//! columns over quantile cut points.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ForecastSet, Forecaster, Split};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::panel::{DayWindow, SeriesPanel};

pub const MAX_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbrHyper {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Row fraction drawn (without replacement) for each tree; 1.0 uses all rows.
    pub subsample: f64,
}

impl Default for GbrHyper {
    fn default() -> Self {
        GbrHyper {
            n_trees: 300,
            learning_rate: 0.05,
            max_depth: 6,
            min_leaf: 20,
            subsample: 1.0,
        }
    }
}

impl GbrHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be > 0".into()));
        }
        if self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::InvalidParameter("max_depth and min_leaf must be >= 1".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidParameter("subsample must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Column access for training data.
pub trait ColumnSource {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn column(&self, col: usize) -> Vec<f64>;
}

/// Column-major dense matrix.
pub struct DenseColumns<'a>(pub &'a [Vec<f64>]);

impl ColumnSource for DenseColumns<'_> {
    fn n_rows(&self) -> usize {
        self.0.first().map_or(0, Vec::len)
    }

    fn n_cols(&self) -> usize {
        self.0.len()
    }

    fn column(&self, col: usize) -> Vec<f64> {
        self.0[col].clone()
    }
}

/// Selected rows of a feature matrix.
pub struct FeatureRows<'a> {
    pub features: &'a FeatureMatrix,
    pub rows: &'a [usize],
}

impl ColumnSource for FeatureRows<'_> {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn n_cols(&self) -> usize {
        self.features.n_cols()
    }

    fn column(&self, col: usize) -> Vec<f64> {
        self.rows.iter().map(|&r| self.features.value(r, col)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        /// `x[feature] <= threshold` goes left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict<F: Fn(usize) -> f64>(&self, x: F) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    /// Training SSE after 0, 1, .., M trees.
    pub train_sse: Vec<f64>,
}

impl BoostedEnsemble {
    pub fn predict<F: Fn(usize) -> f64>(&self, x: F) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(&x)).sum();
        self.base + self.learning_rate * sum
    }

    pub fn predict_row(&self, features: &FeatureMatrix, row: usize) -> f64 {
        self.predict(|c| features.value(row, c))
    }
}

struct Binned {
    n_rows: usize,
    /// Column-major bin codes.
    bins: Vec<Vec<u8>>,
    /// Upper edge of every bin per column; `x <= edges[b]` ⇔ `bin(x) <= b`.
    edges: Vec<Vec<f64>>,
    offsets: Vec<usize>,
}

fn bin_column(values: &[f64]) -> (Vec<u8>, Vec<f64>) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let edges = if distinct.len() <= MAX_BINS {
        distinct
    } else {
        let n = sorted.len();
        let mut e: Vec<f64> = (1..=MAX_BINS).map(|k| sorted[k * n / MAX_BINS - 1]).collect();
        e.dedup();
        *e.last_mut().expect("non-empty") = *sorted.last().expect("non-empty");
        e
    };
    let codes = values
        .iter()
        .map(|v| edges.partition_point(|e| e < v) as u8)
        .collect();
    (codes, edges)
}

impl Binned {
    fn new(src: &dyn ColumnSource) -> Self {
        let (bins, edges): (Vec<_>, Vec<_>) = (0..src.n_cols()).map(|c| bin_column(&src.column(c))).unzip();
        let mut offsets = vec![0];
        for e in &edges {
            offsets.push(offsets.last().unwrap() + e.len());
        }
        Binned {
            n_rows: src.n_rows(),
            bins,
            edges,
            offsets,
        }
    }

    fn histogram(&self, rows: &[u32], resid: &[f64]) -> Vec<(f64, u32)> {
        let mut h = vec![(0.0, 0u32); *self.offsets.last().unwrap()];
        for (c, col) in self.bins.iter().enumerate() {
            let part = &mut h[self.offsets[c]..self.offsets[c + 1]];
            for &r in rows {
                let slot = &mut part[col[r as usize] as usize];
                slot.0 += resid[r as usize];
                slot.1 += 1;
            }
        }
        h
    }
}

struct SplitChoice {
    feature: usize,
    bin: u8,
}

struct Grower<'a> {
    data: &'a Binned,
    resid: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
    /// Bin of each split node, parallel to `nodes`, for binned traversal.
    split_bins: Vec<u8>,
}

impl Grower<'_> {
    fn best_split(&self, hist: &[(f64, u32)], total: f64, n: u32) -> Option<SplitChoice> {
        let parent = total * total / n as f64;
        let mut best: Option<(f64, SplitChoice)> = None;
        let mut best_gain = 1e-12 * (1.0 + parent.abs());
        for c in 0..self.data.bins.len() {
            let part = &hist[self.data.offsets[c]..self.data.offsets[c + 1]];
            let (mut sl, mut nl) = (0.0, 0u32);
            for (b, &(s, k)) in part.iter().enumerate().take(part.len().saturating_sub(1)) {
                sl += s;
                nl += k;
                if (nl as usize) < self.min_leaf || k == 0 {
                    continue;
                }
                let nr = n - nl;
                if (nr as usize) < self.min_leaf {
                    break;
                }
                let sr = total - sl;
                let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - parent;
                if gain > best_gain {
                    best_gain = gain;
                    best = Some((gain, SplitChoice { feature: c, bin: b as u8 }));
                }
            }
        }
        best.map(|(_, s)| s)
    }

    fn grow(&mut self, rows: Vec<u32>, hist: Vec<(f64, u32)>, depth: usize) -> usize {
        let n = rows.len() as u32;
        let total: f64 = rows.iter().map(|&r| self.resid[r as usize]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: total / n as f64 });
        self.split_bins.push(0);

        if depth >= self.max_depth || (n as usize) < 2 * self.min_leaf {
            return id;
        }
        let Some(choice) = self.best_split(&hist, total, n) else {
            return id;
        };
        let col = &self.data.bins[choice.feature];
        let (left, right): (Vec<u32>, Vec<u32>) =
            rows.into_iter().partition(|&r| col[r as usize] <= choice.bin);
        let (small, large_is_left) = if left.len() <= right.len() { (&left, false) } else { (&right, true) };
        let small_hist = self.data.histogram(small, self.resid);
        let large_hist: Vec<(f64, u32)> = hist
            .iter()
            .zip(&small_hist)
            .map(|(p, s)| (p.0 - s.0, p.1 - s.1))
            .collect();
        let (left_hist, right_hist) = if large_is_left {
            (large_hist, small_hist)
        } else {
            (small_hist, large_hist)
        };
        let l = self.grow(left, left_hist, depth + 1);
        let r = self.grow(right, right_hist, depth + 1);
        self.nodes[id] = Node::Split {
            feature: choice.feature,
            threshold: self.data.edges[choice.feature][choice.bin as usize],
            left: l,
            right: r,
        };
        self.split_bins[id] = choice.bin;
        id
    }
}

fn predict_binned(tree: &RegressionTree, split_bins: &[u8], data: &Binned, row: usize) -> f64 {
    let mut i = 0;
    loop {
        match &tree.nodes[i] {
            Node::Leaf { value } => return *value,
            Node::Split {
                feature, left, right, ..
            } => {
                i = if data.bins[*feature][row] <= split_bins[i] {
                    *left
                } else {
                    *right
                }
            }
        }
    }
}

/// Stagewise least-squares boosting. A constant target yields zero trees.
pub fn fit_ensemble(
    src: &dyn ColumnSource,
    targets: &[f64],
    hyper: &GbrHyper,
    seed: u64,
) -> Result<BoostedEnsemble> {
    hyper.validate()?;
    let n = src.n_rows();
    if targets.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} targets for {n} training rows",
            targets.len()
        )));
    }
    if n < 2 * hyper.min_leaf || n == 0 {
        return Err(Error::InsufficientHistory {
            needed: (2 * hyper.min_leaf).max(1),
            got: n,
        });
    }
    if n > u32::MAX as usize {
        return Err(Error::InvalidParameter("too many training rows".into()));
    }
    let data = Binned::new(src);
    debug_assert_eq!(data.n_rows, n);
    let base = targets.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mut resid: Vec<f64> = targets.iter().map(|y| y - base).collect();
    let sse = |resid: &[f64]| resid.iter().map(|r| r * r).sum::<f64>();
    let mut train_sse = vec![sse(&resid)];
    let mut trees = Vec::with_capacity(hyper.n_trees);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sample = ((n as f64 * hyper.subsample).round() as usize).clamp(1, n);

    for _ in 0..hyper.n_trees {
        let rows: Vec<u32> = if n_sample == n {
            (0..n as u32).collect()
        } else {
            let mut r: Vec<u32> = sample(&mut rng, n, n_sample).into_iter().map(|i| i as u32).collect();
            r.sort_unstable();
            r
        };
        let hist = data.histogram(&rows, &resid);
        let mut grower = Grower {
            data: &data,
            resid: &resid,
            max_depth: hyper.max_depth,
            min_leaf: hyper.min_leaf,
            nodes: Vec::new(),
            split_bins: Vec::new(),
        };
        grower.grow(rows, hist, 0);
        let split_bins = grower.split_bins;
        let tree = RegressionTree { nodes: grower.nodes };
        if tree.nodes.len() == 1 && n_sample == n {
            // nothing left to explain
            break;
        }
        for (row, (p, r)) in pred.iter_mut().zip(resid.iter_mut()).enumerate() {
            *p += hyper.learning_rate * predict_binned(&tree, &split_bins, &data, row);
            *r = targets[row] - *p;
        }
        train_sse.push(sse(&resid));
        trees.push(tree);
    }

    Ok(BoostedEnsemble {
        base,
        learning_rate: hyper.learning_rate,
        trees,
        train_sse,
    })
}

/// Fits on the valid feature rows inside `rows`, targets are realized demand.
pub fn gbr_fit(
    features: &FeatureMatrix,
    rows: &[usize],
    targets: &[f64],
    hyper: &GbrHyper,
    seed: u64,
) -> Result<BoostedEnsemble> {
    if rows.iter().any(|&r| !features.is_valid(r)) {
        return Err(Error::InvalidParameter("training rows must be valid feature rows".into()));
    }
    fit_ensemble(&FeatureRows { features, rows }, targets, hyper, seed)
}

/// Global boosted model over a panel's feature matrix.
#[derive(Debug, Clone)]
pub struct FittedGbr {
    fit_end: u32,
    hyper: GbrHyper,
    ensemble: BoostedEnsemble,
    n_train_rows: usize,
}

impl FittedGbr {
    pub fn fit(
        panel: &SeriesPanel,
        features: &FeatureMatrix,
        fit_window: DayWindow,
        hyper: &GbrHyper,
        seed: u64,
    ) -> Result<Self> {
        let rows = features.valid_rows_in(fit_window);
        let targets: Vec<f64> = rows
            .iter()
            .map(|&r| {
                let (s, d) = features.row_coords(r);
                panel.demand(s, d)
            })
            .collect();
        let ensemble = gbr_fit(features, &rows, &targets, hyper, seed)?;
        Ok(FittedGbr {
            fit_end: fit_window.last().ok_or(Error::EmptyWindow)?,
            hyper: *hyper,
            ensemble,
            n_train_rows: rows.len(),
        })
    }

    pub fn ensemble(&self) -> &BoostedEnsemble {
        &self.ensemble
    }

    pub fn hyper(&self) -> &GbrHyper {
        &self.hyper
    }
}

impl Forecaster for FittedGbr {
    fn name(&self) -> &str {
        "gbr"
    }

    fn fit_end(&self) -> Option<u32> {
        Some(self.fit_end)
    }

    fn forecast_window(
        &self,
        panel: &SeriesPanel,
        features: Option<&FeatureMatrix>,
        window: DayWindow,
        split: Split,
    ) -> Result<ForecastSet> {
        let fm = features.ok_or_else(|| Error::InvalidParameter("gbr needs the feature matrix".into()))?;
        let mut values = Vec::with_capacity(panel.n_series() * window.len as usize);
        for s in 0..panel.n_series() {
            for d in window.days() {
                let row = fm.row_index(s, d);
                if !fm.is_valid(row) {
                    return Err(Error::InsufficientHistory {
                        needed: crate::panel::MAX_FEATURE_LAG + 1,
                        got: (d - panel.first_d()) as usize + 1,
                    });
                }
                values.push(self.ensemble.predict_row(fm, row));
            }
        }
        ForecastSet::new(self.name(), split, window, panel.keys().to_vec(), values)
    }

    fn audit(&self) -> serde_json::Value {
        serde_json::json!({
            "model": "gbr",
            "fit_end": self.fit_end,
            "hyper": self.hyper,
            "base_score": self.ensemble.base,
            "trees": self.ensemble.trees.len(),
            "leaves": self.ensemble.trees.iter().map(RegressionTree::n_leaves).sum::<usize>(),
            "train_rows": self.n_train_rows,
            "final_train_sse": self.ensemble.train_sse.last(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hyper(n_trees: usize, depth: usize, min_leaf: usize, lr: f64) -> GbrHyper {
        GbrHyper {
            n_trees,
            learning_rate: lr,
            max_depth: depth,
            min_leaf,
            subsample: 1.0,
        }
    }

    #[test]
    fn constant_target_has_no_trees() {
        let x = vec![(0..100).map(f64::from).collect::<Vec<_>>()];
        let y = vec![3.5; 100];
        let m = fit_ensemble(&DenseColumns(&x), &y, &hyper(50, 3, 5, 0.1), 0).unwrap();
        assert_eq!(m.base, 3.5);
        assert!(m.trees.is_empty());
        assert_eq!(m.predict(|_| 42.0), 3.5);
    }

    #[test]
    fn step_function_is_learned() {
        let x: Vec<f64> = (0..400).map(|i| i as f64 / 4.0).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| if v < 30.0 { 1.0 } else if v < 70.0 { 5.0 } else { 2.0 })
            .collect();
        let cols = vec![x.clone()];
        let m = fit_ensemble(&DenseColumns(&cols), &y, &hyper(50, 2, 5, 0.5), 0).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var_sum: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let sse: f64 = x
            .iter()
            .zip(&y)
            .map(|(&xi, yi)| (m.predict(|_| xi) - yi).powi(2))
            .sum();
        assert!(sse < 0.01 * var_sum, "sse {sse} vs {var_sum}");
        assert!((sse - m.train_sse.last().unwrap()).abs() < 1e-6 * (1.0 + sse));
    }

    #[test]
    fn prediction_is_base_plus_scaled_tree_sum() {
        let cols = vec![
            (0..200).map(|i| (i % 13) as f64).collect::<Vec<_>>(),
            (0..200).map(|i| (i % 7) as f64).collect::<Vec<_>>(),
        ];
        let y: Vec<f64> = (0..200).map(|i| ((i % 13) * (i % 7)) as f64).collect();
        let m = fit_ensemble(&DenseColumns(&cols), &y, &hyper(20, 3, 4, 0.2), 0).unwrap();
        for row in [0usize, 17, 123] {
            let x = |c: usize| cols[c][row];
            let manual: f64 = m.trees.iter().map(|t| t.predict(x)).sum();
            assert_eq!(m.predict(x), m.base + m.learning_rate * manual);
        }
    }

    #[test]
    fn too_few_rows() {
        let cols = vec![vec![1.0, 2.0, 3.0]];
        let err = fit_ensemble(&DenseColumns(&cols), &[1.0, 2.0, 3.0], &hyper(5, 2, 2, 0.1), 0);
        assert!(matches!(err, Err(Error::InsufficientHistory { .. })));
    }

    #[test]
    fn subsample_is_seed_deterministic() {
        let cols = vec![(0..300).map(|i| (i * 7 % 31) as f64).collect::<Vec<_>>()];
        let y: Vec<f64> = cols[0].iter().map(|v| (v * 0.3).sin()).collect();
        let mut h = hyper(10, 3, 5, 0.1);
        h.subsample = 0.5;
        let a = fit_ensemble(&DenseColumns(&cols), &y, &h, 9).unwrap();
        let b = fit_ensemble(&DenseColumns(&cols), &y, &h, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn binning_respects_thresholds_for_wide_columns() {
        let v: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.37).sin() * 100.0).collect();
        let (codes, edges) = bin_column(&v);
        assert!(edges.len() <= MAX_BINS);
        for (x, &b) in v.iter().zip(&codes) {
            assert!(*x <= edges[b as usize]);
            if b > 0 {
                assert!(*x > edges[b as usize - 1]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn train_sse_non_increasing(
            y in prop::collection::vec(0.0f64..20.0, 60..150),
            lr in 0.05f64..1.0,
            depth in 1usize..5,
        ) {
            let n = y.len();
            let cols = vec![
                (0..n).map(|i| (i % 9) as f64).collect::<Vec<_>>(),
                (0..n).map(|i| ((i * 5) % 17) as f64).collect::<Vec<_>>(),
            ];
            let m = fit_ensemble(&DenseColumns(&cols), &y, &hyper(30, depth, 3, lr), 0).unwrap();
            for w in m.train_sse.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-9);
            }
        }
    }
}
