//! Output tables. Every table is built from in-memory results in a fixed
//! row order so that identical runs give identical bytes.

use backhaul_core::cost::{CostComposition, RegionCost};
use backhaul_core::report::{ConstantTable, DecileCurve, SavingsReport, SavingsRow};

use crate::config::ScenarioConfig;
use crate::inputs::lookup_table;
use crate::scenario::{Demand, Preprocessed, ScenarioResult, StrategyResult};
use crate::table::{fmt_num, fmt_opt, fmt_pct, CsvTable};

pub fn constant_csv(t: &ConstantTable) -> CsvTable {
    let mut out = CsvTable::new(&t.header);
    for r in &t.rows {
        out.push(r.clone());
    }
    out
}

pub fn tiles_csv(pre: &Preprocessed) -> CsvTable {
    let mut t = CsvTable::new(&["tile_id", "x0", "y0", "x1", "y1", "delta_h_m", "decile", "degraded"]);
    for tile in &pre.tiles {
        let b = tile.bounds;
        t.push(vec![
            tile.tile_id.to_string(),
            fmt_num(b.x0),
            fmt_num(b.y0),
            fmt_num(b.x1),
            fmt_num(b.y1),
            fmt_opt(tile.delta_h_m),
            tile.decile.map(|d| d.to_string()).unwrap_or_default(),
            pre.degraded.to_string(),
        ]);
    }
    t
}

pub fn settlements_csv(d: &Demand) -> CsvTable {
    let mut t = CsvTable::new(&["id", "x", "y", "population", "is_major", "region_id"]);
    for s in &d.settlements {
        t.push(vec![
            s.id.to_string(),
            fmt_num(s.location.x),
            fmt_num(s.location.y),
            fmt_num(s.population),
            s.is_major.to_string(),
            d.regions.settlement_region[s.id].map(|r| r.to_string()).unwrap_or_default(),
        ]);
    }
    t
}

pub fn regions_csv(d: &Demand) -> CsvTable {
    let mut t = CsvTable::new(&[
        "region_id",
        "anchor_id",
        "rain",
        "area_km2",
        "pop_density",
        "mean_decile",
        "mean_decile_exact",
        "population",
        "settlements",
        "admin_ids",
    ]);
    for r in &d.regions.regions {
        let admins: Vec<String> = r.member_admin_ids.iter().map(u32::to_string).collect();
        t.push(vec![
            r.region_id.to_string(),
            r.anchor.to_string(),
            r.rain.name().to_string(),
            fmt_num(r.area_km2),
            fmt_num(r.pop_density_per_km2),
            r.mean_decile.to_string(),
            fmt_num(r.mean_decile_exact),
            fmt_num(r.population),
            r.settlements.len().to_string(),
            admins.join(" "),
        ]);
    }
    t
}

pub fn links_csv(results: &[StrategyResult]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "strategy",
        "repetition",
        "region_id",
        "edge",
        "a",
        "b",
        "kind",
        "distance_km",
        "frequency_ghz",
        "los_source",
    ]);
    for r in results {
        for plan in r.plans.iter().flatten() {
            for l in &plan.links {
                t.push(vec![
                    r.strategy.name().to_string(),
                    plan.repetition.to_string(),
                    plan.region_id.to_string(),
                    l.edge.to_string(),
                    l.a.to_string(),
                    l.b.to_string(),
                    l.kind.name().to_string(),
                    fmt_num(l.distance_km),
                    fmt_num(l.frequency_ghz),
                    l.los_source.name().to_string(),
                ]);
            }
        }
    }
    t
}

pub fn relays_csv(results: &[StrategyResult]) -> CsvTable {
    let mut t = CsvTable::new(&["strategy", "repetition", "region_id", "id", "x", "y", "parent_edge"]);
    for r in results {
        for plan in r.plans.iter().flatten() {
            for relay in &plan.relays {
                t.push(vec![
                    r.strategy.name().to_string(),
                    plan.repetition.to_string(),
                    plan.region_id.to_string(),
                    relay.id.to_string(),
                    fmt_num(relay.location.x),
                    fmt_num(relay.location.y),
                    relay.parent_edge.to_string(),
                ]);
            }
        }
    }
    t
}

pub const COST_COLUMNS: [&str; 11] = [
    "region_id",
    "strategy",
    "links",
    "relays",
    "towers",
    "radios_usd",
    "antennas_usd",
    "towers_usd",
    "planning_usd",
    "power_usd",
    "total_usd",
];

fn composition_cells(c: &CostComposition) -> [String; 5] {
    [c.radios_usd, c.antennas_usd, c.towers_usd, c.planning_usd, c.power_usd].map(|v| v.to_string())
}

pub fn costs_csv(results: &[StrategyResult]) -> CsvTable {
    let mut t = CsvTable::new(&COST_COLUMNS);
    for r in results {
        for c in r.primary_costs() {
            t.push(cost_row(&c));
        }
    }
    t
}

fn cost_row(c: &RegionCost) -> Vec<String> {
    let mut row = vec![
        c.region_id.to_string(),
        c.strategy.name().to_string(),
        c.n_links.to_string(),
        c.n_relays.to_string(),
        c.n_towers.to_string(),
    ];
    row.extend(composition_cells(&c.composition));
    row.push(c.total_usd.to_string());
    row
}

/// Per-region spread over repetitions.
pub fn cost_spread_csv(results: &[StrategyResult]) -> CsvTable {
    let mut t = CsvTable::new(&["region_id", "strategy", "repetitions", "mean_usd", "min_usd", "max_usd", "sd_usd"]);
    for r in results {
        for reps in &r.costs {
            let totals: Vec<f64> = reps.iter().map(|c| c.total_usd as f64).collect();
            let n = totals.len() as f64;
            let mean = totals.iter().sum::<f64>() / n;
            let var = totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            t.push(vec![
                reps[0].region_id.to_string(),
                r.strategy.name().to_string(),
                reps.len().to_string(),
                fmt_num(mean),
                fmt_num(totals.iter().copied().fold(f64::INFINITY, f64::min)),
                fmt_num(totals.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                fmt_num(var.sqrt()),
            ]);
        }
    }
    t
}

pub fn decile_curves_csv(curves: &[DecileCurve]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "ranking",
        "strategy",
        "decile",
        "regions",
        "usd",
        "cumulative_usd",
        "radios_usd",
        "antennas_usd",
        "towers_usd",
        "planning_usd",
        "power_usd",
    ]);
    for c in curves {
        for p in &c.points {
            let mut row = vec![
                c.ranking.name().to_string(),
                c.strategy.name().to_string(),
                p.decile.to_string(),
                p.regions.to_string(),
                p.usd.to_string(),
                p.cumulative_usd.to_string(),
            ];
            row.extend(composition_cells(&p.composition));
            t.push(row);
        }
    }
    t
}

fn delta(a: u64, b: u64) -> String {
    (a as i64 - b as i64).to_string()
}

fn savings_row(r: &SavingsRow) -> Vec<String> {
    let (c, h) = (&r.clos, &r.hybrid);
    vec![
        r.region_id.map(|i| i.to_string()).unwrap_or_else(|| "total".into()),
        r.clos_usd.to_string(),
        r.hybrid_usd.to_string(),
        r.saving_usd.to_string(),
        fmt_pct(r.saving_pct),
        delta(c.radios_usd, h.radios_usd),
        delta(c.antennas_usd, h.antennas_usd),
        delta(c.towers_usd, h.towers_usd),
        delta(c.planning_usd, h.planning_usd),
        delta(c.power_usd, h.power_usd),
    ]
}

/// Deltas are CLOS minus hybrid.
pub fn savings_csv(s: &SavingsReport) -> CsvTable {
    let mut t = CsvTable::new(&[
        "region_id",
        "clos_usd",
        "hybrid_usd",
        "saving_usd",
        "saving_pct",
        "radios_delta_usd",
        "antennas_delta_usd",
        "towers_delta_usd",
        "planning_delta_usd",
        "power_delta_usd",
    ]);
    for r in &s.rows {
        t.push(savings_row(r));
    }
    t.push(savings_row(&s.total));
    t
}

fn entry(name: &str, t: CsvTable) -> (String, Vec<u8>) {
    (name.to_string(), t.to_bytes())
}

/// Every CSV a full run writes, manifest excluded.
pub fn scenario_files(cfg: &ScenarioConfig, r: &ScenarioResult) -> Vec<(String, Vec<u8>)> {
    let mut files = vec![
        entry("tiles.csv", tiles_csv(&r.pre)),
        entry("los_lookup.csv", lookup_table(&r.pre.lookup)),
        entry("settlements.csv", settlements_csv(&r.demand)),
        entry("regions.csv", regions_csv(&r.demand)),
        entry("links.csv", links_csv(&r.strategies)),
        entry("relays.csv", relays_csv(&r.strategies)),
        entry("costs.csv", costs_csv(&r.strategies)),
        entry("decile_curves.csv", decile_curves_csv(&r.curves)),
    ];
    if cfg.repetitions > 1 {
        files.push(entry("cost_spread.csv", cost_spread_csv(&r.strategies)));
    }
    if let Some(s) = &r.savings {
        files.push(entry("savings.csv", savings_csv(s)));
    }
    files
}
