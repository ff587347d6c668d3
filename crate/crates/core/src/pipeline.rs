//! End-to-end evaluation run driven by a [`RunConfig`].
//!
//! Protocol: every native model is fitted on the training window and scored
//! on validation (GBR picks its hyperparameters there), then refitted on
//! train + validation and asked for rolling one-step forecasts over the test
//! window. External forecast files are imported for the test window. All
//! test-window sets are then scored for accuracy, swept over shortage costs
//! and, optionally, run through the two-echelon network.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{EchelonGrouping, LoadedConfig, RunConfig};
use crate::echelon2::simulate_network;
use crate::error::{Error, Result};
use crate::features::{build_features, FeatureMatrix};
use crate::forecast::arima::FittedArima;
use crate::forecast::gbr::{FittedGbr, GbrHyper};
use crate::forecast::holt_winters::FittedHoltWinters;
use crate::forecast::{predict, ForecastSet, Forecaster, Naive, Split};
use crate::forecast_io::{export_forecasts, import_forecasts};
use crate::metrics::{accuracy, per_series, rmse, AccuracyReport};
use crate::panel::{load_panel, make_splits, SeriesPanel, SplitSpec};
use crate::sweep::{run_sweep, SimReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct GbrTrial {
    pub hyper: GbrHyper,
    pub validation_rmse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EchelonRow {
    pub model: String,
    pub networks: usize,
    /// Sum over networks of each network's average daily cost.
    pub avg_network_cost: f64,
    pub network_fill_rate: f64,
    /// Single-echelon cost of the same forecasts at the store shortage cost.
    pub single_echelon_cost: f64,
}

/// Everything a run produces, before it is written to disk.
#[derive(Debug)]
pub struct RunOutcome {
    pub splits: SplitSpec,
    pub n_series: usize,
    pub validation: Vec<AccuracyReport>,
    pub test_sets: Vec<ForecastSet>,
    pub report: SimReport,
    pub echelon: Vec<EchelonRow>,
    pub gbr_trials: Vec<GbrTrial>,
    pub audits: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
}

fn needs_features(cfg: &RunConfig) -> bool {
    cfg.models.native.iter().any(|m| m == "gbr")
}

pub fn load_inputs(cfg: &RunConfig) -> Result<SeriesPanel> {
    load_panel(&cfg.data.sales, &cfg.data.calendar, &cfg.subset_filter()?)
}

fn fit_native(
    name: &str,
    cfg: &RunConfig,
    panel: &SeriesPanel,
    fm: Option<&FeatureMatrix>,
    fit_window: crate::panel::DayWindow,
    gbr_hyper: &GbrHyper,
) -> Result<Box<dyn Forecaster>> {
    Ok(match name {
        "naive" => Box::new(Naive),
        "holt_winters" => Box::new(FittedHoltWinters::fit(panel, fit_window, cfg.models.season_length)?),
        "arima" => Box::new(FittedArima::fit(panel, fit_window)?),
        "gbr" => {
            let fm = fm.expect("features built when gbr is configured");
            Box::new(FittedGbr::fit(panel, fm, fit_window, gbr_hyper, cfg.seed)?)
        }
        other => return Err(Error::Config(format!("unknown model `{other}`"))),
    })
}

/// GBR candidates fitted on train and ranked by validation RMSE. Ties keep
/// the earlier grid point.
fn tune_gbr(cfg: &RunConfig, panel: &SeriesPanel, fm: &FeatureMatrix, splits: &SplitSpec) -> Result<Vec<GbrTrial>> {
    cfg.models
        .gbr
        .candidates()
        .into_iter()
        .map(|hyper| {
            let model = FittedGbr::fit(panel, fm, splits.train(), &hyper, cfg.seed)?;
            let fs = predict(&model, panel, Some(fm), splits.validation(), Split::Validation)?;
            Ok(GbrTrial {
                hyper,
                validation_rmse: rmse(&fs, panel)?,
            })
        })
        .collect()
}

pub fn evaluate(cfg: &RunConfig, panel: &SeriesPanel) -> Result<RunOutcome> {
    let splits = make_splits(panel, cfg.split.valid_days, cfg.split.test_days)?;
    let fm = if needs_features(cfg) {
        Some(build_features(panel)?)
    } else {
        None
    };
    let mut warnings = Vec::new();
    let mut audits = BTreeMap::new();

    let mut gbr_trials = Vec::new();
    let mut gbr_hyper = cfg.models.gbr.base();
    if let Some(fm) = &fm {
        gbr_trials = tune_gbr(cfg, panel, fm, &splits)?;
        if let Some(best) = gbr_trials
            .iter()
            .reduce(|a, b| if b.validation_rmse < a.validation_rmse { b } else { a })
        {
            gbr_hyper = best.hyper;
        }
    }

    let mut validation = Vec::new();
    let mut test_sets = Vec::new();
    for name in &cfg.models.native {
        let on_train = fit_native(name, cfg, panel, fm.as_ref(), splits.train(), &gbr_hyper)?;
        let valid = predict(on_train.as_ref(), panel, fm.as_ref(), splits.validation(), Split::Validation)?;
        validation.push(accuracy(&valid, panel)?);

        let refit = fit_native(name, cfg, panel, fm.as_ref(), splits.train_valid(), &gbr_hyper)?;
        let test = predict(refit.as_ref(), panel, fm.as_ref(), splits.test(), Split::Test)?;
        let mut audit = refit.audit();
        if let Some(obj) = audit.as_object_mut() {
            obj.insert("fit_window".into(), json!(splits.train_valid().to_string()));
            obj.insert("forecast_window".into(), json!(splits.test().to_string()));
        }
        if name == "arima" {
            let n = audit["unconverged"].as_u64().unwrap_or(0);
            if n > 0 {
                warnings.push(format!(
                    "arima: {n} of {} series did not converge; best parameters were kept",
                    panel.n_series()
                ));
            }
        }
        audits.insert(name.clone(), audit);
        test_sets.push(test);
    }

    for ext in &cfg.external {
        let fs = import_forecasts(&ext.path, panel, splits.test())?.renamed(ext.name.clone());
        audits.insert(
            ext.name.clone(),
            json!({ "model": ext.name, "source": "external", "path": ext.path.display().to_string() }),
        );
        test_sets.push(fs);
    }

    let report = run_sweep(&cfg.sweep.spec(), &test_sets, panel)?;
    for acc in &report.accuracy {
        if acc.mape_unreliable {
            warnings.push(format!(
                "{}: MAPE {:.3e} is dominated by zero-demand days and is not comparable",
                acc.model_name, acc.mape
            ));
        }
    }
    if !report.ranking_stable {
        warnings.push("model cost ranking changes across shortage costs".into());
    }

    let echelon = if cfg.echelon.enabled {
        run_echelon(cfg, panel, &test_sets, &report)?
    } else {
        Vec::new()
    };

    Ok(RunOutcome {
        splits,
        n_series: panel.n_series(),
        validation,
        test_sets,
        report,
        echelon,
        gbr_trials,
        audits,
        warnings,
    })
}

/// Store sets for the configured DC grouping, ordered by item id.
pub fn echelon_groups(panel: &SeriesPanel, grouping: EchelonGrouping) -> Vec<Vec<usize>> {
    match grouping {
        EchelonGrouping::All => vec![(0..panel.n_series()).collect()],
        EchelonGrouping::ItemId => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, k) in panel.keys().iter().enumerate() {
                groups.entry(k.item_id.as_str()).or_default().push(i);
            }
            groups.into_values().collect()
        }
    }
}

fn run_echelon(cfg: &RunConfig, panel: &SeriesPanel, sets: &[ForecastSet], report: &SimReport) -> Result<Vec<EchelonRow>> {
    let groups = echelon_groups(panel, cfg.echelon.group_by);
    let b_store = cfg.echelon.b_store.unwrap_or(cfg.sweep.reference_b);
    sets.iter()
        .map(|fs| {
            let (mut cost, mut fulfilled, mut demand) = (0.0, 0.0, 0.0);
            for g in &groups {
                let ec = cfg.echelon.config_for(g.clone(), cfg.sweep.reference_b)?;
                let out = simulate_network(fs, panel, &ec)?;
                cost += out.avg_network_cost;
                fulfilled += out.total_fulfilled;
                demand += out.total_demand;
            }
            let single = report
                .row(fs.model_name(), b_store)
                .map(|r| r.avg_cost * panel.n_series() as f64)
                .unwrap_or(f64::NAN);
            Ok(EchelonRow {
                model: fs.model_name().to_string(),
                networks: groups.len(),
                avg_network_cost: cost,
                network_fill_rate: fulfilled / (demand + crate::echelon2::FILL_EPS),
                single_echelon_cost: single,
            })
        })
        .collect()
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn write(path: PathBuf, body: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(&path, body).map_err(|e| Error::io(path, e))
}

fn json_string(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn accuracy_csv(split: &str, reports: &[AccuracyReport], out: &mut String) {
    for a in reports {
        let _ = writeln!(
            out,
            "{split},{},{:.6},{:.6},{:.6},{},{}",
            a.model_name, a.rmse, a.mae, a.mape, a.mape_unreliable, a.n_points
        );
    }
}

fn input_hashes(loaded: &LoadedConfig) -> Result<BTreeMap<String, String>> {
    let cfg = &loaded.config;
    let mut h = BTreeMap::new();
    h.insert("config".to_string(), format!("{:x}", Sha256::digest(loaded.raw.as_bytes())));
    h.insert("sales".to_string(), sha256_file(&cfg.data.sales)?);
    h.insert("calendar".to_string(), sha256_file(&cfg.data.calendar)?);
    for ext in &cfg.external {
        h.insert(format!("external:{}", ext.name), sha256_file(&ext.path)?);
    }
    Ok(h)
}

/// Writes every report file and returns their names, sorted.
pub fn write_outputs(cfg: &RunConfig, panel: &SeriesPanel, out: &RunOutcome, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec!["accuracy.csv", "models.json", "sweep.csv", "sweep.json", "tables.txt"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();

    let mut acc = String::from("split,model,rmse,mae,mape,mape_unreliable,n_points\n");
    accuracy_csv("validation", &out.validation, &mut acc);
    accuracy_csv("test", &out.report.accuracy, &mut acc);
    write(dir.join("accuracy.csv"), acc)?;

    out.report.write_all(dir)?;

    let models = json!({
        "refit_policy": "fit on train, score validation, refit on train+validation, forecast test",
        "splits": {
            "train": out.splits.train().to_string(),
            "validation": out.splits.validation().to_string(),
            "test": out.splits.test().to_string(),
        },
        "gbr_trials": out.gbr_trials,
        "models": out.audits,
    });
    write(dir.join("models.json"), json_string(&models))?;

    if cfg.echelon.enabled {
        let mut csv = String::from("model,networks,avg_network_cost,network_fill_rate,single_echelon_cost\n");
        for r in &out.echelon {
            let _ = writeln!(
                csv,
                "{},{},{:.6},{:.6},{:.6}",
                r.model, r.networks, r.avg_network_cost, r.network_fill_rate, r.single_echelon_cost
            );
        }
        write(dir.join("echelon.csv"), csv)?;
        write(
            dir.join("echelon.json"),
            json_string(&json!({
                "group_by": cfg.echelon.group_by,
                "h_dc": cfg.echelon.h_dc,
                "b_dc": cfg.echelon.b_dc.unwrap_or(cfg.sweep.reference_b),
                "b_store": cfg.echelon.b_store.unwrap_or(cfg.sweep.reference_b),
                "initial_dc_inventory": cfg.echelon.initial_dc_inventory,
                "rows": out.echelon,
            })),
        )?;
        files.extend(["echelon.csv".to_string(), "echelon.json".to_string()]);
    }

    if cfg.report.write_forecasts {
        let fdir = dir.join("forecasts");
        std::fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
        for fs in &out.test_sets {
            let name = format!("forecasts/{}_test.csv", fs.model_name());
            export_forecasts(fs, &dir.join(&name))?;
            files.push(name);
        }
    }

    if cfg.report.per_series {
        let mut csv = String::from("model,series,rmse,mae\n");
        for fs in &out.test_sets {
            for s in per_series(fs, panel)? {
                let _ = writeln!(csv, "{},{},{:.6},{:.6}", fs.model_name(), s.series, s.rmse, s.mae);
            }
        }
        write(dir.join("per_series.csv"), csv)?;
        files.push("per_series.csv".into());
    }

    if cfg.report.verbose {
        // per-cell costs at the reference penalty
        let mut csv = String::from("model,item_id,store_id,d,cost\n");
        let w = out.splits.test();
        for o in out.report.outcomes.iter().filter(|o| o.params.shortage() == cfg.sweep.reference_b) {
            for (cell, c) in o.per_day_costs.iter().enumerate() {
                let (i, k) = (cell / w.len as usize, cell % w.len as usize);
                let key = &panel.keys()[i];
                let _ = writeln!(csv, "{},{},{},d_{},{}", o.model_name, key.item_id, key.store_id, w.first + k as u32, c);
            }
        }
        write(dir.join("costs.csv"), csv)?;
        files.push("costs.csv".into());
    }

    files.sort();
    Ok(files)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    seed: u64,
    inputs: BTreeMap<String, String>,
    n_series: Option<usize>,
    splits: Option<SplitSpec>,
    models: Vec<String>,
    outputs: Vec<String>,
    warnings: Vec<String>,
}

/// Loads, evaluates and writes a full run. A failing run still leaves a
/// `manifest.json` with `status = "failed"` when the output directory is
/// writable.
pub fn run(loaded: &LoadedConfig) -> Result<RunOutcome> {
    let cfg = &loaded.config;
    let dir = &cfg.output_dir;
    let result = (|| -> Result<(RunOutcome, Vec<String>)> {
        let panel = load_inputs(cfg)?;
        let out = evaluate(cfg, &panel)?;
        let files = write_outputs(cfg, &panel, &out, dir)?;
        Ok((out, files))
    })();
    let inputs = input_hashes(loaded).unwrap_or_default();
    let mut manifest = Manifest {
        tool: "invcast",
        version: VERSION,
        status: "ok",
        error: None,
        seed: cfg.seed,
        inputs,
        n_series: None,
        splits: None,
        models: cfg.model_names(),
        outputs: Vec::new(),
        warnings: Vec::new(),
    };
    match result {
        Ok((out, files)) => {
            manifest.n_series = Some(out.n_series);
            manifest.splits = Some(out.splits);
            manifest.outputs = files;
            manifest.warnings = out.warnings.clone();
            write(dir.join("manifest.json"), json_string(&manifest))?;
            Ok(out)
        }
        Err(e) => {
            manifest.status = "failed";
            manifest.error = Some(e.to_string());
            if std::fs::create_dir_all(dir).is_ok() {
                let _ = write(dir.join("manifest.json"), json_string(&manifest));
            }
            Err(e)
        }
    }
}

/// Writes the feature matrix of the configured panel to `features.csv` in
/// the output directory.
pub fn export_features(cfg: &RunConfig) -> Result<PathBuf> {
    let panel = load_inputs(cfg)?;
    let fm = build_features(&panel)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join("features.csv");
    fm.write_csv(&panel, &path)?;
    Ok(path)
}

/// Checks a forecast file against the configured test window and scores it
/// next to the naive baseline.
pub fn score_external(cfg: &RunConfig, file: &Path, name: &str) -> Result<SimReport> {
    let panel = load_inputs(cfg)?;
    let splits = make_splits(&panel, cfg.split.valid_days, cfg.split.test_days)?;
    let fs = import_forecasts(file, &panel, splits.test())?.renamed(name);
    let naive = predict(&Naive, &panel, None, splits.test(), Split::Test)?;
    let mut spec = cfg.sweep.spec();
    spec.baseline = "naive".into();
    let sets = if name == "naive" { vec![naive] } else { vec![naive, fs] };
    run_sweep(&spec, &sets, &panel)
}
