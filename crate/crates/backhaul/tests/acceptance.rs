//! Acceptance checks. Each test prints one `criterion N ...: PASS|FAIL`
//! line before asserting, so `cargo test --test acceptance -- --nocapture`
//! gives a readable scorecard.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use backhaul::core::cost::{required_tower_height, tower_cost, CostItemTable, TowerPricing};
use backhaul::core::link_budget::{
    fresnel_clearance_lookup, fresnel_max_radius, fresnel_radius_at, fspl, received_power, Confidence, LinkGeometry,
    RadioParams,
};
use backhaul::core::network::{build_mst, Strategy};
use backhaul::core::raster::{GridHeader, LayerKind, RasterGrid};
use backhaul::core::rng::StreamKey;
use backhaul::core::terrain::{
    assign_deciles, build_los_lookup, lookup_probability, measure_tiles, partition_tiles, LookupConfig, DECILES, DEFAULT_TILE_KM,
};
use backhaul::core::viewshed::{earth_bulge_m, line_of_sight, TerrainProfile};
use backhaul::core::Point;
use backhaul::outputs::scenario_files;
use backhaul::scenario::{compute_scenario, run_scenario, sha256_hex, ScenarioResult};
use backhaul::synth::{self, World};
use backhaul::ScenarioConfig;
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use tempfile::TempDir;

const FSPL_TOL_DB: f64 = 1e-4;
const FRESNEL_MIDPOINT_REL_TOL: f64 = 1e-3;
const BULGE_45KM_M: f64 = 29.8;
const BULGE_TOL_M: f64 = 0.2;
const FLAT_LOS_MIN: f64 = 0.99;
const MST_REL_TOL: f64 = 1e-9;
const SAVINGS_BAND_PCT: (f64, f64) = (5.0, 50.0);
const PIPELINE_BUDGET: Duration = Duration::from_secs(60);
/// The ridge and flat fixtures are generated once from this seed.
const WORLD_SEED: u64 = 1;
const ALT_SEEDS: [u64; 3] = [2, 3, 4];

fn verdict(n: u32, name: &str, ok: bool, detail: impl AsRef<str>) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} {name}: {status} ({})", detail.as_ref());
}

fn fixture(world: World, seed: u64) -> (TempDir, ScenarioConfig) {
    let dir = TempDir::new().unwrap();
    let mut cfg = synth::write_world(&synth::generate(world, WORLD_SEED), dir.path(), seed).unwrap();
    cfg.output_dir = dir.path().join("out");
    (dir, cfg)
}

fn region_totals(r: &ScenarioResult, s: Strategy) -> Vec<u64> {
    r.strategy(s).unwrap().primary_costs().iter().map(|c| c.total_usd).collect()
}

// ---------------------------------------------------------------- 1

/// Reference clearance in metres: distance band, frequency band, p50/p90/p99.
const CLEARANCE_FIXTURE: &str = "\
<10|6 to 8|6.7|9.4|10.4
<10|11 to 15|6.1|7.5|8.1
<10|15 to 18|4.7|6.6|6.9
10-25|6 to 8|13.2|15.7|17.0
10-25|11 to 15|10.1|11.9|12.6
10-25|15 to 18|9.0|10.2|11.0
25-45|6 to 8|18.7|21.0|22.4
25-45|11 to 15|14.2|16.1|17.3
25-45|15 to 18|12.1|13.3|14.3";

/// Reference item prices in USD.
const COST_FIXTURE: &str = "\
radios|6,000
antennas <10 km|1,200
antennas 10-20 km|2,200
antennas 20-30 km|3,600
antennas 30-45 km|4,460
tower per 10 m|10,000
planning|8,700
power|12,000";

fn read_dump(dir: &Path, name: &str) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join(format!("{name}.csv"))).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn criterion_01_constants_fidelity() {
    let dir = TempDir::new().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_backhaul"))
        .args(["dump-tables", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());

    let mut mismatches = Vec::new();
    let clearance = read_dump(dir.path(), "fresnel_clearance");
    let expected: Vec<Vec<&str>> = CLEARANCE_FIXTURE.lines().map(|l| l.split('|').collect()).collect();
    let mut cells = 0;
    for (row, want) in clearance.iter().zip(&expected) {
        let band = match (row[0].as_str(), row[1].as_str()) {
            ("0", "10") => "<10",
            ("10", "25") => "10-25",
            ("25", "45") => "25-45",
            other => panic!("unexpected distance band {other:?}"),
        };
        let freq = format!("{} to {}", row[2], row[3]);
        if band != want[0] || freq != want[1] {
            mismatches.push(format!("band {band} {freq} vs {} {}", want[0], want[1]));
        }
        for k in 0..3 {
            cells += 1;
            let got: f64 = row[4 + k].parse().unwrap();
            let printed: f64 = want[2 + k].parse().unwrap();
            if got != printed {
                mismatches.push(format!("{band} {freq} col {k}: {got} vs {printed}"));
            }
        }
    }
    if clearance.len() != expected.len() {
        mismatches.push(format!("{} clearance rows, expected {}", clearance.len(), expected.len()));
    }

    let costs = read_dump(dir.path(), "cost_items");
    let got: Vec<u64> = costs.iter().map(|r| r[3].parse().unwrap()).collect();
    let printed: Vec<u64> = COST_FIXTURE
        .lines()
        .map(|l| l.split('|').nth(1).unwrap().replace(',', "").parse().unwrap())
        .collect();
    if got != printed {
        mismatches.push(format!("prices {got:?} vs {printed:?}"));
    }

    let ok = mismatches.is_empty() && cells == 27;
    verdict(1, "constants fidelity", ok, format!("{cells} clearance cells, {} prices; {mismatches:?}", got.len()));
    assert!(ok);
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_02_link_budget_math() {
    let at_1_1 = fspl(&LinkGeometry::new(1.0, 1.0));
    let at_10_18 = fspl(&LinkGeometry::new(10.0, 18.0));
    let fresnel_8_8 = fresnel_max_radius(&LinkGeometry::new(8.0, 8.0));

    let key = StreamKey::root(2);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let d = 0.1 + 44.9 * key.child(2 * i).unit();
        let f = 1.0 + 39.0 * key.child(2 * i + 1).unit();
        let g = LinkGeometry::new(d, f);
        // maximum radius written out directly: 8.66 sqrt(D/F)
        let direct = 8.66 * (d / f).sqrt();
        worst = worst.max((fresnel_radius_at(&g, d / 2.0) - direct).abs() / direct);
    }

    let checks = [
        ("fspl(1,1) == 32.44", at_1_1 == 32.44),
        ("|fspl(10,18) - 77.5453| <= 1e-4", (at_10_18 - 77.5453).abs() <= FSPL_TOL_DB),
        ("fresnel_max_radius(8,8) == 8.66", fresnel_8_8 == 8.66),
        ("midpoint radius within 0.1%", worst <= FRESNEL_MIDPOINT_REL_TOL),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let ok = failed.is_empty();
    verdict(
        2,
        "link-budget math",
        ok,
        format!("fspl(1,1)={at_1_1}, fspl(10,18)={at_10_18:.6}, r(8,8)={fresnel_8_8}, worst midpoint rel err {worst:.2e}; failed: {failed:?}"),
    );
    assert!(ok, "failed sub-checks: {failed:?}");
}

// ---------------------------------------------------------------- 3

fn band_frequency() -> impl proptest::strategy::Strategy<Value = f64> {
    prop_oneof![6.0..=8.0f64, 11.0..=18.0f64]
}

fn confidence() -> impl proptest::strategy::Strategy<Value = Confidence> {
    prop_oneof![Just(Confidence::P50), Just(Confidence::P90), Just(Confidence::P99)]
}

#[test]
fn criterion_03_monotonicity() {
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 10_000,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    let radio = RadioParams::reference();
    let table = CostItemTable::default();
    let cases = (
        (0.1..45.0f64, 0.01..10.0f64, 1.0..40.0f64, 0.01..10.0f64),
        (0.01..45.0f64, 0.01..45.0f64, band_frequency(), band_frequency(), confidence()),
        (0.1..200.0f64, 0.0..50.0f64),
    );
    let result = runner.run(&cases, |((d, dd, f, df), (d1, d2, f1, f2, conf), (h, dh))| {
        let rp = |d: f64, f: f64| received_power(&radio, &LinkGeometry::new(d, f), 0.0);
        prop_assert!(rp(d + dd, f) < rp(d, f));
        prop_assert!(rp(d, f + df) < rp(d, f));

        let lookup = |d: f64, f: f64, c: Confidence| fresnel_clearance_lookup(d, f, c).unwrap();
        let (dlo, dhi) = (d1.min(d2), d1.max(d2));
        prop_assert!(lookup(dlo, f1, conf) <= lookup(dhi, f1, conf));
        let (flo, fhi) = (f1.min(f2), f1.max(f2));
        prop_assert!(lookup(d1, fhi, conf) <= lookup(d1, flo, conf));

        for pricing in [TowerPricing::Sections, TowerPricing::ProRata] {
            prop_assert!(tower_cost(h + dh, &table, pricing).unwrap() >= tower_cost(h, &table, pricing).unwrap());
        }
        Ok(())
    });
    let ok = result.is_ok();
    verdict(3, "monotonicity", ok, format!("10000 cases: {result:?}"));
    assert!(ok);
}

// ---------------------------------------------------------------- 4

const EFFECTIVE_RADIUS_M: f64 = 6_371_000.0 * 4.0 / 3.0;

/// Brute force: every interior sample, bulged, against the straight ray.
fn los_oracle(total_km: f64, heights: &[f64], ha: f64, hb: f64, curvature: bool) -> bool {
    let n = heights.len() - 1;
    let span = total_km * 1000.0;
    let (z0, z1) = (heights[0] + ha, heights[n] + hb);
    (1..n).all(|i| {
        let x = span * i as f64 / n as f64;
        let ray = z0 + (z1 - z0) * i as f64 / n as f64;
        let bulge = if curvature { x * (span - x) / (2.0 * EFFECTIVE_RADIUS_M) } else { 0.0 };
        heights[i] + bulge <= ray
    })
}

#[test]
fn criterion_04_viewshed_oracle() {
    let key = StreamKey::root(4);
    let (mut mismatches, mut visible) = (0, 0);
    for case in 0..1000u64 {
        let k = key.child(case);
        let u = |i: u64| k.child(i).unit();
        let total_km = 0.5 + 44.5 * u(0);
        let relief = if case % 2 == 0 { 20.0 } else { 300.0 };
        let heights: Vec<f64> = (0..64).map(|i| 100.0 + relief * u(10 + i)).collect();
        let (ha, hb) = (60.0 * u(1), 60.0 * u(2));
        let curvature = case % 3 != 0;
        let got = line_of_sight(&TerrainProfile::from_heights(total_km, &heights), ha, hb, curvature).visible;
        if got != los_oracle(total_km, &heights, ha, hb, curvature) {
            mismatches += 1;
        }
        visible += got as usize;
    }
    let bulge = earth_bulge_m(22.5, 22.5);
    let ok = mismatches == 0 && (bulge - BULGE_45KM_M).abs() <= BULGE_TOL_M;
    verdict(
        4,
        "viewshed oracle",
        ok,
        format!("{mismatches} mismatches over 1000 profiles ({visible} visible), 45 km midpoint bulge {bulge:.3} m"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_05_flat_world_lookup() {
    let h = GridHeader {
        ncols: 200,
        nrows: 200,
        xll: 0.0,
        yll: 0.0,
        cellsize: 250.0,
        nodata: -9999.0,
    };
    let dem = RasterGrid::filled(h, LayerKind::Elevation, 250.0).unwrap();
    let cfg = LookupConfig::default();
    let mut tiles = partition_tiles(&dem, DEFAULT_TILE_KM);
    measure_tiles(&mut tiles, &dem);
    let tiles = assign_deciles(&tiles).tiles;
    let table = build_los_lookup(&tiles, &dem, &cfg);

    let mut lowest = f64::INFINITY;
    for decile in 1..=DECILES {
        for bin in 0..table.bins() {
            let (lo, hi) = table.bin_range(bin);
            lowest = lowest.min(lookup_probability(&table, decile, (lo + hi) / 2.0).unwrap());
        }
    }
    let ok = lowest >= FLAT_LOS_MIN;
    verdict(5, "flat-world lookup", ok, format!("lowest p_los {lowest} over {} bins x 10 deciles", table.bins()));
    assert!(ok);
}

// ---------------------------------------------------------------- 6

/// Minimum weight over every labelled tree, enumerated by Prüfer sequence.
fn brute_force_mst_km(points: &[Point]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let dist = |a: usize, b: usize| (points[a].x - points[b].x).hypot(points[a].y - points[b].y) / 1000.0;
    if n == 2 {
        return dist(0, 1);
    }
    let mut best = f64::INFINITY;
    let mut seq = vec![0usize; n - 2];
    loop {
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut weight = 0.0;
        for &s in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
            weight += dist(leaf, s);
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        weight += dist(rest[0], rest[1]);
        best = best.min(weight);

        let mut i = 0;
        while i < seq.len() && seq[i] == n - 1 {
            seq[i] = 0;
            i += 1;
        }
        if i == seq.len() {
            return best;
        }
        seq[i] += 1;
    }
}

#[test]
fn criterion_06_mst_oracle() {
    let key = StreamKey::root(6);
    let mut worst = 0.0f64;
    for case in 0..50u64 {
        let k = key.child(case);
        let n = 1 + (k.child(0).unit() * 8.0) as usize;
        let points: Vec<Point> = (0..n as u64)
            .map(|i| Point::new(60_000.0 * k.child(1 + 2 * i).unit(), 60_000.0 * k.child(2 + 2 * i).unit()))
            .collect();
        let nodes: Vec<(usize, Point)> = points.iter().copied().enumerate().collect();
        let got = build_mst(&nodes, 0).total_km();
        let want = brute_force_mst_km(&points);
        worst = worst.max((got - want).abs() / want.max(1e-12));
    }
    let ok = worst <= MST_REL_TOL;
    verdict(6, "MST oracle", ok, format!("50 instances, worst relative gap {worst:.2e}"));
    assert!(ok);
}

// ---------------------------------------------------------------- 7

/// Dominance per region, one strict region, and the total saving in %.
fn dominance(r: &ScenarioResult) -> (bool, bool, f64) {
    let clos = region_totals(r, Strategy::ClosOnly);
    let hybrid = region_totals(r, Strategy::Hybrid);
    let all = clos.iter().zip(&hybrid).all(|(c, h)| h <= c);
    let strict = clos.iter().zip(&hybrid).any(|(c, h)| h < c);
    (all, strict, r.savings.as_ref().unwrap().total.saving_pct)
}

#[test]
fn criterion_07_strategy_dominance() {
    let (_dir, cfg) = fixture(World::Ridge, WORLD_SEED);
    let r = compute_scenario(&cfg).unwrap();
    let (all, strict, pct) = dominance(&r);
    let in_band = pct >= SAVINGS_BAND_PCT.0 && pct <= SAVINGS_BAND_PCT.1;
    let ok = all && strict && pct > 0.0 && in_band;
    verdict(
        7,
        "strategy dominance",
        ok,
        format!(
            "clos {:?} hybrid {:?}, total saving {pct:.1}%",
            region_totals(&r, Strategy::ClosOnly),
            region_totals(&r, Strategy::Hybrid)
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 8

/// Plans agree in everything but the strategy label, and costs are equal.
fn flat_equal(r: &ScenarioResult) -> bool {
    let (c, h) = (r.strategy(Strategy::ClosOnly).unwrap(), r.strategy(Strategy::Hybrid).unwrap());
    let plans_equal = c.plans.iter().flatten().zip(h.plans.iter().flatten()).all(|(a, b)| {
        let mut b = b.clone();
        b.strategy = a.strategy;
        *a == b
    });
    plans_equal && region_totals(r, Strategy::ClosOnly) == region_totals(r, Strategy::Hybrid)
}

#[test]
fn criterion_08_flat_world_equality() {
    let (_dir, cfg) = fixture(World::Flat, WORLD_SEED);
    let r = compute_scenario(&cfg).unwrap();
    let ok = flat_equal(&r);
    verdict(
        8,
        "flat-world equality",
        ok,
        format!("region totals {:?}", region_totals(&r, Strategy::ClosOnly)),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_09_worked_cost() {
    let (_dir, mut cfg) = fixture(World::Pair, WORLD_SEED);
    cfg.confidence = "p50".into();
    let r = compute_scenario(&cfg).unwrap();
    let totals: Vec<u64> = [Strategy::ClosOnly, Strategy::Hybrid]
        .iter()
        .flat_map(|&s| region_totals(&r, s))
        .collect();
    let links = r.strategy(Strategy::ClosOnly).unwrap().plans[0][0].links.clone();
    // 6000 radios + 1200 antennas + 2 x (10000 tower + 8700 + 12000)
    let tower_m = required_tower_height(0.0, 0.0, 8.0, 18.0, Confidence::P50).unwrap();
    let ok = totals == [68_600, 68_600] && links.len() == 1 && links[0].distance_km == 8.0;
    verdict(
        9,
        "worked cost",
        ok,
        format!("totals {totals:?}, {} link(s), tower {tower_m} m", links.len()),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 10

fn csv_hashes(cfg: &ScenarioConfig, r: &ScenarioResult) -> BTreeMap<String, String> {
    scenario_files(cfg, r).into_iter().map(|(name, bytes)| (name, sha256_hex(&bytes))).collect()
}

fn written_hashes(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "csv") {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), sha256_hex(&fs::read(&p).unwrap()));
        }
    }
    out
}

#[test]
fn criterion_10_determinism() {
    let (dir, mut cfg) = fixture(World::Ridge, WORLD_SEED);
    cfg.output_dir = dir.path().join("first");
    run_scenario(&cfg).unwrap();
    let first = written_hashes(&cfg.output_dir);
    cfg.output_dir = dir.path().join("second");
    let r = run_scenario(&cfg).unwrap();
    let second = written_hashes(&cfg.output_dir);
    let identical = !first.is_empty() && first == second && csv_hashes(&cfg, &r) == first;

    let base_links = &first["links.csv"];
    let (mut changed, mut invariants) = (0, true);
    for seed in ALT_SEEDS {
        let (_r, ridge) = fixture(World::Ridge, seed);
        let rr = compute_scenario(&ridge).unwrap();
        if &csv_hashes(&ridge, &rr)["links.csv"] != base_links {
            changed += 1;
        }
        let (all, strict, pct) = dominance(&rr);
        let (_f, flat) = fixture(World::Flat, seed);
        invariants &= all && strict && pct > 0.0 && flat_equal(&compute_scenario(&flat).unwrap());
    }
    let ok = identical && changed > 0 && invariants;
    verdict(
        10,
        "determinism",
        ok,
        format!(
            "{} csv files identical: {identical}; {changed}/{} other seeds changed links; criteria 7-8 hold: {invariants}",
            first.len(),
            ALT_SEEDS.len()
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 11

#[test]
fn criterion_11_end_to_end_runtime() {
    let (_dir, cfg) = fixture(World::Ridge, WORLD_SEED);
    let start = Instant::now();
    let r = run_scenario(&cfg).unwrap();
    let elapsed = start.elapsed();
    let ok = elapsed < PIPELINE_BUDGET && r.demand.settlements.len() == synth::SETTLEMENTS;
    verdict(
        11,
        "end-to-end runtime",
        ok,
        format!("{:.2} s for {} settlements on 200x200 cells", elapsed.as_secs_f64(), r.demand.settlements.len()),
    );
    assert!(ok);
}
