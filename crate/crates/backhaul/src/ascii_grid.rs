//! ESRI ASCII grid reading and writing.
//!
//! Header keys are case-insensitive and may come in any order.
//! `XLLCENTER` / `YLLCENTER` are accepted in place of the corner keys.
//! `NODATA_VALUE` is optional and defaults to -9999.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use backhaul_core::raster::{GridHeader, LayerKind, RasterError, RasterGrid};
use thiserror::Error;

pub const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("header key {key}: {reason}")]
    Header { key: String, reason: &'static str },
    #[error("value {index}: cannot parse {token:?}")]
    Value { index: usize, token: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: Box<GridError>,
    },
}

const KEYS: [&str; 6] = ["NCOLS", "NROWS", "XLLCORNER", "YLLCORNER", "CELLSIZE", "NODATA_VALUE"];

fn header_err(key: &str, reason: &'static str) -> GridError {
    GridError::Header {
        key: key.to_string(),
        reason,
    }
}

pub fn parse_ascii_grid(text: &str, kind: LayerKind) -> Result<RasterGrid, GridError> {
    let mut fields: [Option<f64>; 6] = [None; 6];
    let mut centered = [false; 2];
    let mut lines = text.lines().peekable();

    while let Some(line) = lines.peek() {
        let mut tok = line.split_whitespace();
        let Some(key) = tok.next() else {
            lines.next();
            continue;
        };
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let upper = key.to_ascii_uppercase();
        let (slot, center) = match upper.as_str() {
            "XLLCENTER" => (2, true),
            "YLLCENTER" => (3, true),
            k => match KEYS.iter().position(|known| *known == k) {
                Some(i) => (i, false),
                None => return Err(header_err(key, "unknown key")),
            },
        };
        if fields[slot].is_some() {
            return Err(header_err(key, "repeated"));
        }
        let value = tok.next().ok_or_else(|| header_err(key, "missing value"))?;
        if tok.next().is_some() {
            return Err(header_err(key, "trailing tokens"));
        }
        let v: f64 = value.parse().map_err(|_| header_err(key, "not a number"))?;
        fields[slot] = Some(v);
        if slot == 2 || slot == 3 {
            centered[slot - 2] = center;
        }
        lines.next();
    }

    let get = |i: usize| fields[i].ok_or_else(|| header_err(KEYS[i], "missing"));
    let count = |i: usize| -> Result<usize, GridError> {
        let v = get(i)?;
        if v.fract() != 0.0 || v < 1.0 {
            return Err(header_err(KEYS[i], "must be a positive integer"));
        }
        Ok(v as usize)
    };
    let ncols = count(0)?;
    let nrows = count(1)?;
    let cellsize = get(4)?;
    if !(cellsize > 0.0) {
        return Err(header_err(KEYS[4], "must be positive"));
    }
    let mut xll = get(2)?;
    let mut yll = get(3)?;
    if centered[0] {
        xll -= cellsize / 2.0;
    }
    if centered[1] {
        yll -= cellsize / 2.0;
    }
    let header = GridHeader {
        ncols,
        nrows,
        xll,
        yll,
        cellsize,
        nodata: fields[5].unwrap_or(DEFAULT_NODATA),
    };

    let mut values = Vec::with_capacity(ncols * nrows);
    for line in lines {
        for token in line.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| GridError::Value {
                index: values.len(),
                token: token.to_string(),
            })?;
            values.push(v);
        }
    }
    Ok(RasterGrid::new(header, kind, values)?)
}

pub fn load_ascii_grid(path: &Path, kind: LayerKind) -> Result<RasterGrid, GridError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| GridError::Io {
        path: name.clone(),
        source,
    })?;
    parse_ascii_grid(&text, kind).map_err(|e| GridError::InFile {
        path: name,
        source: Box::new(e),
    })
}

/// Shortest round-trip decimal form, so a reload reproduces every value.
pub fn format_ascii_grid(grid: &RasterGrid) -> String {
    let h = grid.header();
    let mut out = String::new();
    let _ = writeln!(out, "NCOLS {}", h.ncols);
    let _ = writeln!(out, "NROWS {}", h.nrows);
    let _ = writeln!(out, "XLLCORNER {}", h.xll);
    let _ = writeln!(out, "YLLCORNER {}", h.yll);
    let _ = writeln!(out, "CELLSIZE {}", h.cellsize);
    let _ = writeln!(out, "NODATA_VALUE {}", h.nodata);
    for (i, v) in grid.values_with_nodata().enumerate() {
        let sep = if i % h.ncols == 0 { "" } else { " " };
        let _ = write!(out, "{sep}{v}");
        if i % h.ncols == h.ncols - 1 {
            out.push('\n');
        }
    }
    out
}

pub fn save_ascii_grid(grid: &RasterGrid, path: &Path) -> Result<(), GridError> {
    fs::write(path, format_ascii_grid(grid)).map_err(|source| GridError::Io {
        path: path.display().to_string(),
        source,
    })
}
