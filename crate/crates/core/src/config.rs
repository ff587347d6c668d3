//! TOML run configuration and its validation.
//!
//! Relative paths resolve against the directory holding the config file. The
//! output directory may be overridden with `INVCAST_OUTPUT_DIR`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::echelon2::EchelonConfig;
use crate::error::{Error, Result};
use crate::forecast::gbr::GbrHyper;
use crate::newsvendor::{CostParams, SimOptions};
use crate::panel::{count_matching, FilterColumn, SubsetFilter};
use crate::sweep::SweepSpec;

pub const OUTPUT_DIR_ENV: &str = "INVCAST_OUTPUT_DIR";
pub const NATIVE_MODELS: [&str; 4] = ["naive", "holt_winters", "arima", "gbr"];

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    /// `column = value` pairs over the sales id columns.
    #[serde(default)]
    pub filter: BTreeMap<String, String>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub models: ModelsConfig,
    #[serde(default)]
    pub external: Vec<ExternalForecast>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub echelon: EchelonSection,
    #[serde(default)]
    pub report: ReportConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub sales: PathBuf,
    pub calendar: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub valid_days: usize,
    pub test_days: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            valid_days: 28,
            test_days: 28,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsConfig {
    pub native: Vec<String>,
    pub season_length: usize,
    pub gbr: GbrConfig,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        ModelsConfig {
            native: NATIVE_MODELS.iter().map(|s| s.to_string()).collect(),
            season_length: 7,
            gbr: GbrConfig::default(),
        }
    }
}

/// Base hyperparameters plus an optional tuning grid. Every grid axis left
/// empty keeps the base value; the grid is the cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbrConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub subsample: f64,
    pub grid: GbrGrid,
}

impl Default for GbrConfig {
    fn default() -> Self {
        GbrConfig::from_hyper(GbrHyper::default())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbrGrid {
    pub n_trees: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub min_leaf: Vec<usize>,
}

impl GbrConfig {
    pub fn from_hyper(h: GbrHyper) -> Self {
        GbrConfig {
            n_trees: h.n_trees,
            learning_rate: h.learning_rate,
            max_depth: h.max_depth,
            min_leaf: h.min_leaf,
            subsample: h.subsample,
            grid: GbrGrid::default(),
        }
    }

    pub fn base(&self) -> GbrHyper {
        GbrHyper {
            n_trees: self.n_trees,
            learning_rate: self.learning_rate,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            subsample: self.subsample,
        }
    }

    pub fn candidates(&self) -> Vec<GbrHyper> {
        let axis = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
        let lrs = if self.grid.learning_rate.is_empty() {
            vec![self.learning_rate]
        } else {
            self.grid.learning_rate.clone()
        };
        let mut out = Vec::new();
        for &n_trees in &axis(&self.grid.n_trees, self.n_trees) {
            for &learning_rate in &lrs {
                for &max_depth in &axis(&self.grid.max_depth, self.max_depth) {
                    for &min_leaf in &axis(&self.grid.min_leaf, self.min_leaf) {
                        out.push(GbrHyper {
                            n_trees,
                            learning_rate,
                            max_depth,
                            min_leaf,
                            subsample: self.subsample,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalForecast {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub h: f64,
    pub b_values: Vec<f64>,
    pub baseline: String,
    pub reference_b: f64,
    pub round_orders: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let s = SweepSpec::default();
        SweepConfig {
            h: s.h,
            b_values: s.b_values,
            baseline: s.baseline,
            reference_b: s.reference_b,
            round_orders: false,
        }
    }
}

impl SweepConfig {
    pub fn spec(&self) -> SweepSpec {
        SweepSpec {
            h: self.h,
            b_values: self.b_values.clone(),
            baseline: self.baseline.clone(),
            reference_b: self.reference_b,
            options: SimOptions {
                round_orders: self.round_orders,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EchelonGrouping {
    /// One DC per item, supplying every store that carries it.
    ItemId,
    /// One DC supplying every series of the panel.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EchelonSection {
    pub enabled: bool,
    pub group_by: EchelonGrouping,
    pub h_dc: f64,
    /// Defaults to the sweep reference penalty.
    pub b_dc: Option<f64>,
    /// Defaults to the sweep reference penalty.
    pub b_store: Option<f64>,
    pub initial_dc_inventory: f64,
}

impl Default for EchelonSection {
    fn default() -> Self {
        EchelonSection {
            enabled: true,
            group_by: EchelonGrouping::ItemId,
            h_dc: 1.0,
            b_dc: None,
            b_store: None,
            initial_dc_inventory: 0.0,
        }
    }
}

impl EchelonSection {
    pub fn config_for(&self, store_set: Vec<usize>, reference_b: f64) -> Result<EchelonConfig> {
        Ok(EchelonConfig {
            store_set,
            dc_cost: CostParams::new(self.h_dc, self.b_dc.unwrap_or(reference_b))?,
            store_shortage: self.b_store.unwrap_or(reference_b),
            initial_dc_inventory: self.initial_dc_inventory,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Dump per-day cost matrices and DC inventory traces.
    pub verbose: bool,
    pub per_series: bool,
    pub write_forecasts: bool,
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// A parsed config with paths resolved.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source: PathBuf,
    pub raw: String,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig =
            toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.data.sales);
        resolve(&mut config.data.calendar);
        resolve(&mut config.output_dir);
        for ext in &mut config.external {
            resolve(&mut ext.path);
        }
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                config.output_dir = PathBuf::from(dir);
            }
        }
        Ok(LoadedConfig {
            config,
            source: path.to_path_buf(),
            raw,
        })
    }
}

impl RunConfig {
    pub fn subset_filter(&self) -> Result<SubsetFilter> {
        let mut f = SubsetFilter::all();
        for (col, value) in &self.filter {
            let col: FilterColumn = col.parse()?;
            f = f.with(col, value.clone());
        }
        Ok(f)
    }

    /// Every model name in run order: native first, then external.
    pub fn model_names(&self) -> Vec<String> {
        self.models
            .native
            .iter()
            .cloned()
            .chain(self.external.iter().map(|e| e.name.clone()))
            .collect()
    }

    /// Schema and cross-reference checks; an empty list means valid.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut err = |field: &str, message: String| {
            out.push(Diagnostic {
                field: field.to_string(),
                message,
            })
        };

        for (field, path) in [("data.sales", &self.data.sales), ("data.calendar", &self.data.calendar)] {
            if !path.is_file() {
                err(field, format!("file {} does not exist", path.display()));
            }
        }
        for (i, ext) in self.external.iter().enumerate() {
            if !ext.path.is_file() {
                err(
                    &format!("external[{i}].path"),
                    format!("forecast file {} does not exist", ext.path.display()),
                );
            }
            if ext.name.trim().is_empty() {
                err(&format!("external[{i}].name"), "must not be empty".into());
            }
        }

        let filter = match self.subset_filter() {
            Ok(f) => Some(f),
            Err(e) => {
                err("filter", e.to_string());
                None
            }
        };

        if self.split.valid_days == 0 {
            err("split.valid_days", "must be positive".into());
        }
        if self.split.test_days == 0 {
            err("split.test_days", "must be positive".into());
        }
        if self.models.season_length == 0 {
            err("models.season_length", "must be positive".into());
        }

        let mut seen = BTreeSet::new();
        for name in &self.models.native {
            if !NATIVE_MODELS.contains(&name.as_str()) {
                err(
                    "models.native",
                    format!("unknown model `{name}` (expected one of {})", NATIVE_MODELS.join(", ")),
                );
            }
        }
        for name in self.model_names() {
            if !seen.insert(name.clone()) {
                err("models", format!("model name `{name}` is used twice"));
            }
        }
        for h in self.models.gbr.candidates() {
            if let Err(e) = h.validate() {
                err("models.gbr", e.to_string());
                break;
            }
        }

        if self.sweep.b_values.is_empty() {
            err("sweep.b_values", "must list at least one shortage cost".into());
        }
        if self.sweep.b_values.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            err("sweep.b_values", "shortage costs must be positive".into());
        }
        if !(self.sweep.h > 0.0 && self.sweep.h.is_finite()) {
            err("sweep.h", "holding cost must be positive".into());
        }
        if !self.sweep.b_values.is_empty() && !self.sweep.b_values.contains(&self.sweep.reference_b) {
            err(
                "sweep.reference_b",
                format!("{} is not among b_values", self.sweep.reference_b),
            );
        }
        if !seen.contains(&self.sweep.baseline) {
            err(
                "sweep.baseline",
                format!("baseline `{}` is not among the configured models", self.sweep.baseline),
            );
        }

        if self.echelon.enabled {
            if !(self.echelon.h_dc > 0.0) {
                err("echelon.h_dc", "must be positive".into());
            }
            for (field, v) in [("echelon.b_dc", self.echelon.b_dc), ("echelon.b_store", self.echelon.b_store)] {
                if let Some(v) = v {
                    if !(v > 0.0 && v.is_finite()) {
                        err(field, "must be positive".into());
                    }
                }
            }
            if !(self.echelon.initial_dc_inventory >= 0.0) {
                err("echelon.initial_dc_inventory", "must be >= 0".into());
            }
        }

        // only worth scanning the sales file once everything above holds
        if out.is_empty() {
            if let Some(filter) = filter {
                match count_matching(&self.data.sales, &filter) {
                    Ok(0) => out.push(Diagnostic {
                        field: "filter".into(),
                        message: format!("`{filter}` matches no series in {}", self.data.sales.display()),
                    }),
                    Ok(_) => {}
                    Err(e) => out.push(Diagnostic {
                        field: "data.sales".into(),
                        message: e.to_string(),
                    }),
                }
            }
        }
        out
    }
}

/// Loads and checks a config file; parse failures become a single diagnostic.
pub fn validate(path: &Path) -> Vec<Diagnostic> {
    match LoadedConfig::from_path(path) {
        Ok(loaded) => loaded.config.diagnostics(),
        Err(e) => vec![Diagnostic {
            field: "config".into(),
            message: e.to_string(),
        }],
    }
}
