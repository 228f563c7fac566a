//! Subcommand bodies, callable without the argument parser.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use backhaul_core::cost::{CostComposition, RegionCost};
use backhaul_core::link_budget::Confidence;
use backhaul_core::network::Strategy;
use backhaul_core::report::{constant_tables, savings_report, SavingsReport};

use crate::config::ScenarioConfig;
use crate::error::{AppError, Result};
use crate::inputs::lookup_table;
use crate::outputs::{self, COST_COLUMNS};
use crate::scenario::{self, manifest, write_staged};
use crate::table::read_csv_table;

fn manifest_file(cfg: &ScenarioConfig) -> Result<(String, Vec<u8>)> {
    let m = serde_json::to_string_pretty(&manifest(cfg)?).expect("manifest serializes") + "\n";
    Ok(("manifest.json".into(), m.into_bytes()))
}

pub fn preprocess(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let layers = scenario::load_layers(cfg)?;
    let pre = scenario::preprocess(cfg, &layers)?;
    write_staged(
        out,
        &[
            ("tiles.csv".into(), outputs::tiles_csv(&pre).to_bytes()),
            ("los_lookup.csv".into(), lookup_table(&pre.lookup).to_bytes()),
        ],
    )
}

/// Settlements alone, or settlements and regions.
pub fn demand(cfg: &ScenarioConfig, out: &Path, with_regions: bool) -> Result<()> {
    let layers = scenario::load_layers(cfg)?;
    let mut tiles = backhaul_core::terrain::partition_tiles(&layers.elevation, cfg.tile_km);
    backhaul_core::terrain::measure_tiles(&mut tiles, &layers.elevation);
    let tiles = backhaul_core::terrain::assign_deciles(&tiles).tiles;
    let d = scenario::demand(cfg, &layers, &tiles)?;
    let mut files = vec![("settlements.csv".to_string(), outputs::settlements_csv(&d).to_bytes())];
    if with_regions {
        files.push(("regions.csv".into(), outputs::regions_csv(&d).to_bytes()));
    }
    write_staged(out, &files)
}

/// One strategy: plans, costs and a manifest that `report --compare` reads.
pub fn assess(cfg: &ScenarioConfig, strategy: Strategy, seed: Option<u64>, confidence: Option<Confidence>, out: &Path) -> Result<()> {
    let mut cfg = cfg.clone();
    cfg.strategies = vec![strategy.name().to_string()];
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(c) = confidence {
        cfg.confidence = c.name().to_string();
    }
    cfg.output_dir = out.to_path_buf();
    cfg.validate()?;
    let layers = scenario::load_layers(&cfg)?;
    let pre = scenario::preprocess(&cfg, &layers)?;
    let d = scenario::demand(&cfg, &layers, &pre.tiles)?;
    let r = [scenario::assess(&cfg, strategy, &layers, &pre, &d)?];
    let mut files = vec![
        ("links.csv".to_string(), outputs::links_csv(&r).to_bytes()),
        ("relays.csv".into(), outputs::relays_csv(&r).to_bytes()),
        ("costs.csv".into(), outputs::costs_csv(&r).to_bytes()),
    ];
    if cfg.repetitions > 1 {
        files.push(("cost_spread.csv".into(), outputs::cost_spread_csv(&r).to_bytes()));
    }
    files.push(manifest_file(&cfg)?);
    write_staged(out, &files)
}

pub fn run(cfg: &ScenarioConfig) -> Result<scenario::ScenarioResult> {
    scenario::run_scenario(cfg)
}

pub fn dump_tables(out: Option<&Path>) -> Result<()> {
    let tables = constant_tables();
    match out {
        Some(dir) => {
            let files: Vec<(String, Vec<u8>)> = tables
                .iter()
                .map(|t| (format!("{}.csv", t.name), outputs::constant_csv(t).to_bytes()))
                .collect();
            write_staged(dir, &files)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for (i, t) in tables.iter().enumerate() {
                let sep = if i == 0 { "" } else { "\n" };
                let _ = writeln!(stdout, "{sep}# {}", t.name);
                let _ = stdout.write_all(&outputs::constant_csv(t).to_bytes());
            }
            Ok(())
        }
    }
}

const STAGE: &str = "report";

fn read_manifest(dir: &Path) -> Result<serde_json::Value> {
    let p = dir.join("manifest.json");
    let text = fs::read_to_string(&p).map_err(|e| AppError::data(STAGE, format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| AppError::data(STAGE, format!("{}: {e}", p.display())))
}

/// Keys that may legitimately differ between the two runs being compared.
const FREE_KEYS: [&str; 2] = ["strategies", "output_dir"];

/// Differences between two manifests, ignoring strategy and output dir.
pub fn manifest_diff(a: &serde_json::Value, b: &serde_json::Value) -> Vec<String> {
    let mut diff = Vec::new();
    walk("", a, b, &mut diff);
    diff
}

fn walk(path: &str, a: &serde_json::Value, b: &serde_json::Value, diff: &mut Vec<String>) {
    use serde_json::Value;
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                if path == ".config" && FREE_KEYS.contains(&k.as_str()) {
                    continue;
                }
                let sub = format!("{path}.{k}");
                match (x.get(k), y.get(k)) {
                    (Some(va), Some(vb)) => walk(&sub, va, vb, diff),
                    (va, vb) => diff.push(format!("{sub}: {va:?} != {vb:?}")),
                }
            }
        }
        _ if a != b => diff.push(format!("{path}: {a} != {b}")),
        _ => {}
    }
}

fn read_costs(dir: &Path) -> Result<Vec<RegionCost>> {
    let p = dir.join("costs.csv");
    let t = read_csv_table(&p, STAGE)?;
    let cols: Vec<usize> = COST_COLUMNS
        .iter()
        .map(|c| t.column(c).ok_or_else(|| AppError::data(STAGE, format!("{}: missing column {c}", p.display()))))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (i, row) in t.rows.iter().enumerate() {
        let bad = || AppError::data(STAGE, format!("{}:{}: malformed row", p.display(), i + 2));
        let n = |k: usize| row[cols[k]].parse::<u64>().map_err(|_| bad());
        let composition = CostComposition {
            radios_usd: n(5)?,
            antennas_usd: n(6)?,
            towers_usd: n(7)?,
            planning_usd: n(8)?,
            power_usd: n(9)?,
        };
        if composition.total_usd() != n(10)? {
            return Err(bad());
        }
        out.push(RegionCost {
            region_id: n(0)? as usize,
            strategy: Strategy::parse(&row[cols[1]]).ok_or_else(bad)?,
            links: Vec::new(),
            composition,
            total_usd: n(10)?,
            n_links: n(2)? as usize,
            n_relays: n(3)? as usize,
            n_towers: n(4)? as usize,
            canopy_fallbacks: 0,
        });
    }
    Ok(out)
}

/// Savings between two `assess` outputs; the manifests must agree on
/// everything except strategy and output directory.
pub fn compare(a: &Path, b: &Path) -> Result<SavingsReport> {
    let diff = manifest_diff(&read_manifest(a)?, &read_manifest(b)?);
    if !diff.is_empty() {
        return Err(AppError::config(STAGE, format!("runs are not comparable:\n  {}", diff.join("\n  "))));
    }
    let mut all = read_costs(a)?;
    all.extend(read_costs(b)?);
    let (clos, hybrid): (Vec<RegionCost>, Vec<RegionCost>) = all.into_iter().partition(|c| c.strategy == Strategy::ClosOnly);
    savings_report(&clos, &hybrid).map_err(|e| AppError::config(STAGE, e))
}

pub fn report(a: &Path, b: &Path, out: Option<&Path>) -> Result<SavingsReport> {
    let s = compare(a, b)?;
    let bytes = outputs::savings_csv(&s).to_bytes();
    match out {
        Some(dir) => write_staged(dir, &[("savings.csv".into(), bytes)])?,
        None => {
            let _ = std::io::stdout().write_all(&bytes);
        }
    }
    Ok(s)
}

/// Default output directory for a subcommand: under the config's output.
pub fn default_out(cfg: &ScenarioConfig, sub: &str) -> PathBuf {
    cfg.output_dir.join(sub)
}
