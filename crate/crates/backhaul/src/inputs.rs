//! Tabular inputs: rain classes per administrative area and the
//! line-of-sight lookup table.

use std::collections::BTreeMap;
use std::path::Path;

use backhaul_core::link_budget::RainClass;
use backhaul_core::terrain::{LookupBin, LosLookupTable, DECILES};

use crate::error::{AppError, Result};
use crate::table::{fmt_opt, read_csv_table, CsvTable};

fn require(table: &CsvTable, path: &Path, stage: &'static str, names: &[&str]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            table
                .column(n)
                .ok_or_else(|| AppError::data(stage, format!("{}: missing column {n}", path.display())))
        })
        .collect()
}

/// Columns `admin_id` and `class` (`rain` is accepted for the latter).
pub fn read_rain_csv(path: &Path) -> Result<BTreeMap<u32, RainClass>> {
    const STAGE: &str = "rain";
    let t = read_csv_table(path, STAGE)?;
    let id = require(&t, path, STAGE, &["admin_id"])?[0];
    let class = t
        .column("class")
        .or_else(|| t.column("rain"))
        .ok_or_else(|| AppError::data(STAGE, format!("{}: missing column class", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, row) in t.rows.iter().enumerate() {
        let line = i + 2;
        let admin: u32 = row[id]
            .parse()
            .map_err(|_| AppError::data(STAGE, format!("{}:{line}: bad admin_id {:?}", path.display(), row[id])))?;
        let rain = RainClass::parse(&row[class])
            .ok_or_else(|| AppError::data(STAGE, format!("{}:{line}: unknown rain class {:?}", path.display(), row[class])))?;
        if out.insert(admin, rain).is_some() {
            return Err(AppError::data(STAGE, format!("{}:{line}: admin_id {admin} repeated", path.display())));
        }
    }
    Ok(out)
}

pub fn rain_table(rain: &BTreeMap<u32, RainClass>) -> CsvTable {
    let mut t = CsvTable::new(&["admin_id", "class"]);
    for (id, class) in rain {
        t.push(vec![id.to_string(), class.name().to_string()]);
    }
    t
}

pub fn lookup_table(table: &LosLookupTable) -> CsvTable {
    let mut t = CsvTable::new(&["decile", "bin_lo_km", "bin_hi_km", "p_los", "n_pairs"]);
    for d in 1..=DECILES {
        let row = table.row(d).expect("deciles 1..=10 exist");
        for (bin, b) in row.iter().enumerate() {
            let (lo, hi) = table.bin_range(bin);
            t.push(vec![
                d.to_string(),
                crate::table::fmt_num(lo),
                crate::table::fmt_num(hi),
                fmt_opt(b.p_los),
                b.pairs.to_string(),
            ]);
        }
    }
    t
}

/// Reads a lookup table written by [`lookup_table`]. Bins must be uniform
/// and start at zero; visible counts are recovered from `p_los × n_pairs`.
pub fn read_lookup_csv(path: &Path) -> Result<LosLookupTable> {
    const STAGE: &str = "lookup";
    let t = read_csv_table(path, STAGE)?;
    let cols = require(&t, path, STAGE, &["decile", "bin_lo_km", "bin_hi_km", "p_los", "n_pairs"])?;
    let bad = |line: usize, what: &str| AppError::data(STAGE, format!("{}:{line}: {what}", path.display()));

    let mut parsed = Vec::with_capacity(t.rows.len());
    for (i, row) in t.rows.iter().enumerate() {
        let line = i + 2;
        let decile: u8 = row[cols[0]].parse().map_err(|_| bad(line, "bad decile"))?;
        let lo: f64 = row[cols[1]].parse().map_err(|_| bad(line, "bad bin_lo_km"))?;
        let hi: f64 = row[cols[2]].parse().map_err(|_| bad(line, "bad bin_hi_km"))?;
        let p = match row[cols[3]].as_str() {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad(line, "bad p_los"))?),
        };
        if p.is_some_and(|p| !(0.0..=1.0).contains(&p)) {
            return Err(bad(line, "p_los outside [0, 1]"));
        }
        let n: u64 = row[cols[4]].parse().map_err(|_| bad(line, "bad n_pairs"))?;
        if !(hi > lo) {
            return Err(bad(line, "empty bin"));
        }
        parsed.push((line, decile, lo, hi, p, n));
    }
    let first = parsed.first().ok_or_else(|| bad(1, "no rows"))?;
    let width = first.3 - first.2;
    let max_km = parsed.iter().map(|r| r.3).fold(0.0, f64::max);
    let mut table = LosLookupTable::empty(width, max_km);
    let mut seen = vec![false; DECILES as usize * table.bins()];
    for (line, decile, lo, hi, p, n) in parsed {
        let bin = table.bin_of((lo + hi) / 2.0).ok_or_else(|| bad(line, "bin outside range"))?;
        let (elo, ehi) = table.bin_range(bin);
        if (elo - lo).abs() > 1e-9 || (ehi - hi).abs() > 1e-9 {
            return Err(bad(line, "bins are not uniform"));
        }
        let visible = p.map_or(0, |p| (p * n as f64).round() as u64);
        table
            .set(decile, bin, LookupBin { visible, pairs: n, p_los: p })
            .map_err(|e| bad(line, &e.to_string()))?;
        let slot = (decile as usize - 1) * table.bins() + bin;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(bad(line, "repeated bin"));
        }
    }
    Ok(table)
}
