//! Tidy table emission. Every file starts with comment lines naming the
//! units and the config hash, then a CSV header and one observation per row.

use crate::error::Result;
use crate::ingest::format_float;
use std::io::Write;
use std::path::Path;

pub struct Table {
    pub name: &'static str,
    pub units: &'static str,
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, units: &'static str, headers: Vec<&'static str>) -> Self {
        Table {
            name,
            units,
            headers,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    /// Write to `<dir>/<name>.csv` and return the path.
    pub fn write(&self, dir: &Path, config_hash: &str) -> Result<std::path::PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(file, "# table: {}", self.name)?;
        writeln!(file, "# units: {}", self.units)?;
        writeln!(file, "# config-hash: {config_hash}")?;
        writeln!(file, "{}", self.headers.join(","))?;
        for row in &self.rows {
            writeln!(file, "{}", row.join(","))?;
        }
        file.flush()?;
        Ok(path)
    }
}

/// Full-precision cell (round-trips exactly; deterministic).
pub fn num(v: f64) -> String {
    format_float(v)
}

/// Fixed two-decimal cell for display columns.
pub fn num2(v: f64) -> String {
    format!("{v:.2}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Quote a team name for CSV if it contains a comma or quote.
pub fn text(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
