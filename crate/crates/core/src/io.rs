//! Signal files: a columnar CSV of flat samples next to a JSON header.
//!
//! The CSV has the columns `t, re_1..re_m, im_1..im_m`; the header records
//! `nu`, the grid and `m`. Numbers are printed with 17 significant digits,
//! so a round trip reproduces every value.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{EvoqError, Result};
use crate::signal::{TimeGrid, WeightedSignal, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalHeader {
    pub nu: f64,
    pub grid: GridHeader,
    pub m: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
}

impl From<&TimeGrid> for GridHeader {
    fn from(g: &TimeGrid) -> Self {
        Self {
            t_min: g.t_min(),
            t_max: g.t_max(),
            n: g.len(),
        }
    }
}

/// Shortest-exact formatting with 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> EvoqError {
    EvoqError::Io(format!("{}: {e}", path.display()))
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("csv"), stem.with_extension("json"))
}

/// Writes `<stem>.csv` and `<stem>.json`.
pub fn write_signal(stem: &Path, f: &WeightedSignal) -> Result<()> {
    let (csv_path, json_path) = paths(stem);
    let header = SignalHeader {
        nu: f.nu(),
        grid: f.grid().into(),
        m: f.dim(),
    };
    let json = serde_json::to_string_pretty(&header).map_err(|e| io_err(&json_path, e))?;
    fs::write(&json_path, json + "\n").map_err(|e| io_err(&json_path, e))?;

    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    let m = f.dim();
    let mut names = vec!["t".to_string()];
    names.extend((1..=m).map(|i| format!("re_{i}")));
    names.extend((1..=m).map(|i| format!("im_{i}")));
    w.write_record(&names).map_err(|e| io_err(&csv_path, e))?;
    for j in 0..f.len() {
        let s = f.sample(j);
        let mut row = vec![format_number(f.grid().time(j))];
        row.extend(s.iter().map(|z| format_number(z.re)));
        row.extend(s.iter().map(|z| format_number(z.im)));
        w.write_record(&row).map_err(|e| io_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| io_err(&csv_path, e))?;
    Ok(())
}

/// Reads a signal written by [`write_signal`].
pub fn read_signal(stem: &Path) -> Result<WeightedSignal> {
    let (csv_path, json_path) = paths(stem);
    let text = fs::read_to_string(&json_path).map_err(|e| io_err(&json_path, e))?;
    let header: SignalHeader =
        serde_json::from_str(&text).map_err(|e| EvoqError::Parse(format!("{}: {e}", json_path.display())))?;
    let grid = TimeGrid::new(header.grid.t_min, header.grid.t_max, header.grid.n)?;
    let rows = read_columns(&csv_path, 1 + 2 * header.m)?;
    if rows.len() != grid.len() {
        return Err(EvoqError::Parse(format!(
            "{}: expected {} rows, found {}",
            csv_path.display(),
            grid.len(),
            rows.len()
        )));
    }
    let m = header.m;
    let mut data = Vec::with_capacity(grid.len() * m);
    for row in &rows {
        for i in 0..m {
            data.push(C64::new(row[1 + i], row[1 + m + i]));
        }
    }
    WeightedSignal::from_flat(grid, header.nu, m, data)
}

/// Numeric rows of a headed CSV file with exactly `width` columns.
pub fn read_columns(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| EvoqError::Parse(format!("{}: {e}", path.display())))?;
        if rec.len() != width {
            return Err(EvoqError::Parse(format!(
                "{}: row {} has {} columns, expected {width}",
                path.display(),
                line + 1,
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| {
                    EvoqError::Parse(format!("{}: row {}: {e}", path.display(), line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_values() {
        let dir = std::env::temp_dir().join(format!("evoq-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let g = TimeGrid::new(-1.0, 2.0, 7).unwrap();
        let f = WeightedSignal::from_flat_fn(g, 0.3, 2, |t| {
            vec![C64::new(t.sin() / 3.0, 1e-300), C64::new(-t * 1e17, (t * 7.0).cos())]
        })
        .unwrap();
        let stem = dir.join("sig");
        write_signal(&stem, &f).unwrap();
        let back = read_signal(&stem).unwrap();
        assert_eq!(back.flat(), f.flat());
        assert_eq!(back.nu(), f.nu());
        assert!(back.grid().matches(f.grid()));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_file_is_io_error() {
        let r = read_signal(Path::new("/nonexistent/evoq/sig"));
        assert!(matches!(r, Err(EvoqError::Io(_))));
    }
}
