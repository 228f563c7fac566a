//! CSV tables with fixed number formatting, so equal inputs give equal
//! bytes.

use std::fs;
use std::path::Path;

use crate::error::{AppError, Result};

/// At most six decimals, trailing zeros dropped, no exponent, no "-0".
/// Missing values are empty fields.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// One decimal, for percentages.
pub fn fmt_pct(x: f64) -> String {
    let s = format!("{x:.1}");
    if s == "-0.0" {
        "0.0".to_string()
    } else {
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Panics if the row width differs from the header; every caller builds
    /// rows from a fixed schema.
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        // writing into a Vec cannot fail
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn write_csv_table(table: &CsvTable, path: &Path) -> Result<()> {
    fs::write(path, table.to_bytes()).map_err(|e| AppError::io("write", path, e))
}

/// Reads a headered CSV into strings.
pub fn read_csv_table(path: &Path, stage: &'static str) -> Result<CsvTable> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| AppError::data(stage, format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| AppError::data(stage, format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let mut table = CsvTable::new(&header);
    for rec in r.records() {
        let rec = rec.map_err(|e| AppError::data(stage, format!("{}: {e}", path.display())))?;
        table.rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(table)
}
