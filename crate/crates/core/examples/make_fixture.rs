//! Regenerates `tests/fixtures/synthetic`: the input panel, a run config, an
//! external forecast file and the golden outputs of a full run.
//!
//! cargo run -p invcast --example make_fixture

use std::path::Path;

use invcast::config::LoadedConfig;
use invcast::forecast::{ForecastSet, Split};
use invcast::forecast_io::export_forecasts;
use invcast::panel::{load_panel, make_splits, SubsetFilter};
use invcast::pipeline;
use invcast::synthetic::{write_synthetic_m5, SyntheticSpec};

const CONFIG: &str = r#"seed = 7
output_dir = "golden"

[data]
sales = "sales_train_validation.csv"
calendar = "calendar.csv"

[split]
valid_days = 28
test_days = 28

[models]
native = ["naive", "holt_winters", "arima", "gbr"]

[models.gbr]
n_trees = 60
learning_rate = 0.1
max_depth = 3
min_leaf = 10

[models.gbr.grid]
max_depth = [2, 3]

[[external]]
name = "seasonal_7"
path = "seasonal_7_test.csv"

[sweep]
h = 1.0
b_values = [2.0, 5.0, 10.0]
baseline = "naive"
reference_b = 5.0

[echelon]
enabled = true
group_by = "item_id"

[report]
write_forecasts = true
per_series = true
"#;

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic");
    std::fs::create_dir_all(&dir)?;
    let spec = SyntheticSpec {
        items: 4,
        stores: vec!["CA_1", "CA_2"],
        n_days: 200,
        seed: 7,
    };
    let (sales, calendar) = write_synthetic_m5(&dir, &spec)?;
    std::fs::write(dir.join("config.toml"), CONFIG)?;

    // a same-weekday-last-week forecast stands in for an externally produced file
    let panel = load_panel(&sales, &calendar, &SubsetFilter::all())?;
    let test = make_splits(&panel, 28, 28)?.test();
    let values = (0..panel.n_series())
        .flat_map(|i| test.days().map(move |d| (i, d)))
        .map(|(i, d)| panel.demand(i, d - 7))
        .collect();
    let fs = ForecastSet::new("seasonal_7", Split::Test, test, panel.keys().to_vec(), values)?;
    export_forecasts(&fs, &dir.join("seasonal_7_test.csv"))?;

    let golden = dir.join("golden");
    if golden.exists() {
        std::fs::remove_dir_all(&golden)?;
    }
    let loaded = LoadedConfig::from_path(&dir.join("config.toml"))?;
    pipeline::run(&loaded)?;
    println!("fixture written to {}", dir.display());
    Ok(())
}
