//! Forecast CSV exchange so externally trained models can be evaluated by the
//! same simulators as the native ones.
//!
//! ```text
//! # model=<name>
//! # split=<validation|test>
//! item_id,dept_id,store_id,state_id,d,forecast
//! FOODS_1_001,FOODS_1,CA_1,CA,d_1886,1.25
//! ```
//!
//! Rows are written in series-key order, then by day. Values use the
//! shortest representation that parses back to the same `f64`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::forecast::{ForecastSet, Split};
use crate::panel::{parse_d_column, DayWindow, SeriesKey, SeriesPanel};

pub const HEADER: &str = "item_id,dept_id,store_id,state_id,d,forecast";

pub fn export_forecasts(fs: &ForecastSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_forecasts(fs, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_forecasts<W: Write>(fs: &ForecastSet, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "# model={}", fs.model_name())?;
    writeln!(w, "# split={}", fs.split())?;
    writeln!(w, "{HEADER}")?;
    let mut order: Vec<usize> = (0..fs.n_series()).collect();
    order.sort_by(|&a, &b| fs.keys()[a].cmp(&fs.keys()[b]));
    for i in order {
        let k = &fs.keys()[i];
        for (d, v) in fs.window().days().zip(fs.series(i)) {
            writeln!(
                w,
                "{},{},{},{},d_{},{}",
                k.item_id, k.dept_id, k.store_id, k.state_id, d, v
            )?;
        }
    }
    Ok(())
}

/// Reads a forecast file and validates that it covers every panel series on
/// every day of `window` exactly once.
pub fn import_forecasts(path: &Path, panel: &SeriesPanel, window: DayWindow) -> Result<ForecastSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let index: HashMap<&SeriesKey, usize> = panel.keys().iter().enumerate().map(|(i, k)| (k, i)).collect();
    let w = window.len as usize;
    let mut values = vec![f64::NAN; panel.n_series() * w];
    let mut seen = vec![false; values.len()];
    let mut model: Option<String> = None;
    let mut split: Option<Split> = None;
    let mut header_seen = false;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let row = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if header_seen {
                continue;
            }
            if let Some((k, v)) = meta.trim().split_once('=') {
                match k.trim() {
                    "model" => model = Some(v.trim().to_string()),
                    "split" => split = Some(v.parse()?),
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if line.trim() != HEADER {
                return Err(Error::Format(format!(
                    "line {row}: expected header `{HEADER}`, found `{line}`"
                )));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(Error::Format(format!("line {row}: expected 6 fields, found {}", fields.len())));
        }
        let key = SeriesKey {
            item_id: fields[0].to_string(),
            dept_id: fields[1].to_string(),
            store_id: fields[2].to_string(),
            state_id: fields[3].to_string(),
        };
        let series = *index
            .get(&key)
            .ok_or_else(|| Error::Reference(format!("line {row}: series {key} is not in the panel")))?;
        let d = parse_d_column(fields[4])
            .or_else(|| fields[4].parse().ok())
            .ok_or_else(|| Error::Parse {
                row,
                column: "d".into(),
                message: format!("bad day `{}`", fields[4]),
            })?;
        if !window.contains(d) {
            return Err(Error::Format(format!(
                "line {row}: d_{d} for {key} lies outside the window {window}"
            )));
        }
        let v: f64 = fields[5].parse().map_err(|_| Error::Parse {
            row,
            column: "forecast".into(),
            message: format!("`{}` is not a number", fields[5]),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                row,
                column: "forecast".into(),
                message: format!("non-finite forecast `{}`", fields[5]),
            });
        }
        let cell = series * w + (d - window.first) as usize;
        if seen[cell] {
            return Err(Error::Format(format!("line {row}: duplicate forecast for {key} on d_{d}")));
        }
        seen[cell] = true;
        values[cell] = v;
    }

    if !header_seen {
        return Err(Error::Format(format!("{}: missing header `{HEADER}`", path.display())));
    }
    if let Some(cell) = seen.iter().position(|s| !s) {
        return Err(Error::Coverage(format!(
            "no forecast for {} on d_{}",
            panel.keys()[cell / w],
            window.first + (cell % w) as u32
        )));
    }
    let model = model.ok_or_else(|| Error::Format("missing `# model=` line".into()))?;
    let split = split.ok_or_else(|| Error::Format("missing `# split=` line".into()))?;
    ForecastSet::new(model, split, window, panel.keys().to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::naive_forecast;
    use crate::synthetic::panel_from_series;

    fn panel() -> SeriesPanel {
        panel_from_series(&[
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![0.0, 7.0, 0.0, 1.0, 2.0],
        ])
    }

    #[test]
    fn naive_round_trip() {
        let p = panel();
        let fs = naive_forecast(&p, DayWindow::inclusive(3, 5), Split::Test).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        export_forecasts(&fs, &path).unwrap();
        let back = import_forecasts(&path, &p, fs.window()).unwrap();
        assert_eq!(back, fs);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3 + 6);
        assert!(text.starts_with("# model=naive\n# split=test\nitem_id,dept_id,store_id,state_id,d,forecast\n"));
    }

    #[test]
    fn export_is_byte_stable() {
        let p = panel();
        let key = p.keys().to_vec();
        let fs = ForecastSet::new("x", Split::Validation, DayWindow::inclusive(2, 4), key, vec![
            0.1, 1.0 / 3.0, -2.5, 1e-17, 3.0, 2.0f64.sqrt(),
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        export_forecasts(&fs, &a).unwrap();
        let back = import_forecasts(&a, &p, fs.window()).unwrap();
        export_forecasts(&back, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(back.values(), fs.values());
    }

    #[test]
    fn empty_window_is_header_only() {
        let p = panel();
        let fs = ForecastSet::new("e", Split::Test, DayWindow::new(3, 0), p.keys().to_vec(), vec![]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        export_forecasts(&fs, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 3);
        assert_eq!(import_forecasts(&path, &p, fs.window()).unwrap(), fs);
    }

    fn write(dir: &Path, body: &str) -> std::path::PathBuf {
        let path = dir.join("in.csv");
        std::fs::write(&path, format!("# model=ext\n# split=test\n{HEADER}\n{body}")).unwrap();
        path
    }

    #[test]
    fn missing_cell_names_series_and_day() {
        let p = panel();
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            "ITEM_000,FOODS_1,CA_1,CA,d_4,1\nITEM_000,FOODS_1,CA_1,CA,d_5,1\nITEM_001,FOODS_1,CA_1,CA,d_4,1\n",
        );
        let err = import_forecasts(&path, &p, DayWindow::inclusive(4, 5)).unwrap_err();
        match err {
            Error::Coverage(m) => assert!(m.contains("ITEM_001") && m.contains("d_5"), "{m}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_series_is_reference_error() {
        let p = panel();
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "NOPE,FOODS_1,CA_1,CA,d_4,1\n");
        assert!(matches!(
            import_forecasts(&path, &p, DayWindow::inclusive(4, 4)),
            Err(Error::Reference(_))
        ));
    }

    #[test]
    fn non_finite_is_parse_error() {
        let p = panel();
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "ITEM_000,FOODS_1,CA_1,CA,d_4,NaN\n");
        assert!(matches!(
            import_forecasts(&path, &p, DayWindow::inclusive(4, 4)),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn duplicate_row_is_format_error() {
        let p = panel();
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            "ITEM_000,FOODS_1,CA_1,CA,d_4,1\nITEM_000,FOODS_1,CA_1,CA,d_4,2\n",
        );
        assert!(matches!(
            import_forecasts(&path, &p, DayWindow::inclusive(4, 4)),
            Err(Error::Format(_))
        ));
    }
}
