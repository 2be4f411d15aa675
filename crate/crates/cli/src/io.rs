use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const TIME_HEADER: &str = "time_s";
pub const DETUNING_HEADER: &str = "detuning_hz";
pub const VALUE_HEADER: &str = "population_p4";

/// Two-column trace as read from or written to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub x_header: String,
    pub rows: Vec<(f64, f64)>,
}

impl Table {
    pub fn new(x_header: &str, rows: Vec<(f64, f64)>) -> Self {
        Self {
            x_header: x_header.to_string(),
            rows,
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Numerical(format!("csv encoding: {e}"));
        w.write_record([self.x_header.as_str(), VALUE_HEADER]).map_err(fail)?;
        for (x, y) in &self.rows {
            w.write_record([format!("{x}"), format!("{y}")]).map_err(fail)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Numerical(format!("csv encoding: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
        let headers = r.headers().map_err(|e| CliError::io(path, e))?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        let x_header = match names.as_slice() {
            [x, VALUE_HEADER] if *x == TIME_HEADER || *x == DETUNING_HEADER => x.to_string(),
            _ => {
                return Err(CliError::config(format!(
                    "{}: header must be `{TIME_HEADER},{VALUE_HEADER}` or `{DETUNING_HEADER},{VALUE_HEADER}`, got `{}`",
                    path.display(),
                    names.join(",")
                )))
            }
        };
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| CliError::io(path, e))?;
            let parse = |j: usize| -> Result<f64, CliError> {
                rec.get(j)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        CliError::config(format!("{}: row {}: column {} is not a finite number", path.display(), i + 1, j + 1))
                    })
            };
            rows.push((parse(0)?, parse(1)?));
        }
        Ok(Self { x_header, rows })
    }
}

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory and an atomic rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(&target, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(&target, e))?;
    tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
    Ok(target)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub max_abs: f64,
    pub rms: f64,
    pub samples: usize,
}

/// Pointwise deviation of two traces sampled on the same grid.
pub fn compare(a: &Table, b: &Table) -> Result<Deviation, CliError> {
    if a.x_header != b.x_header {
        return Err(CliError::config(format!(
            "schema mismatch: `{}` vs `{}`",
            a.x_header, b.x_header
        )));
    }
    if a.rows.len() != b.rows.len() {
        return Err(CliError::config(format!(
            "grid mismatch: {} rows vs {} rows",
            a.rows.len(),
            b.rows.len()
        )));
    }
    let mut max_abs: f64 = 0.0;
    let mut sum_sq = 0.0;
    for (i, ((xa, ya), (xb, yb))) in a.rows.iter().zip(&b.rows).enumerate() {
        if (xa - xb).abs() > 1e-12 * xa.abs().max(xb.abs()) {
            return Err(CliError::config(format!("grid mismatch at row {}: {xa} vs {xb}", i + 1)));
        }
        let d = (ya - yb).abs();
        max_abs = max_abs.max(d);
        sum_sq += d * d;
    }
    let samples = a.rows.len();
    let rms = if samples == 0 { 0.0 } else { (sum_sq / samples as f64).sqrt() };
    Ok(Deviation { max_abs, rms, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_exactly() {
        let rows = vec![(0.0, 0.1), (1.0e-5, 1.0 / 3.0), (2.5e-5, 0.999999999999)];
        let t = Table::new(TIME_HEADER, rows.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = write_atomic(dir.path(), "trace.csv", &t.to_csv().unwrap()).unwrap();
        let back = Table::read(&path).unwrap();
        assert_eq!(back, t);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("time_s,population_p4\n"));
    }

    #[test]
    fn rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "t,p\n0,1\n").unwrap();
        assert!(matches!(Table::read(&path), Err(CliError::Config(_))));
    }

    #[test]
    fn compare_detects_grid_mismatch() {
        let a = Table::new(TIME_HEADER, vec![(0.0, 0.5), (1.0, 0.5)]);
        let b = Table::new(TIME_HEADER, vec![(0.0, 0.5), (2.0, 0.5)]);
        assert!(compare(&a, &b).is_err());
        let c = Table::new(TIME_HEADER, vec![(0.0, 0.5), (1.0, 0.75)]);
        let d = compare(&a, &c).unwrap();
        assert_eq!(d.max_abs, 0.25);
    }
}
