//! End-to-end scenario: load, preprocess, demand, design, cost, report.
//!
//! Everything is computed in memory first; files are written to a staging
//! directory and moved into the output directory only once every stage has
//! succeeded.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use backhaul_core::cost::{cost_region, RegionCost};
use backhaul_core::demand::{build_modeling_regions, extract_settlements, RegionBuild, Settlement};
use backhaul_core::link_budget::RainClass;
use backhaul_core::network::{assess_region_repeated, RegionPlan, Strategy};
use backhaul_core::raster::{LayerKind, RasterGrid};
use backhaul_core::report::{constant_tables, decile_curves, savings_report, DecileCurve, Ranking, SavingsReport};
use backhaul_core::terrain::{assign_deciles, build_los_lookup, measure_tiles, partition_tiles, LosLookupTable, TerrainTile};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::ascii_grid::load_ascii_grid;
use crate::config::ScenarioConfig;
use crate::error::{AppError, Result};
use crate::inputs::{read_lookup_csv, read_rain_csv};
use crate::outputs;

#[derive(Debug)]
pub struct Layers {
    pub elevation: RasterGrid,
    pub population: RasterGrid,
    pub vegetation: RasterGrid,
    pub canopy: RasterGrid,
    pub admin: RasterGrid,
}

pub fn load_layers(cfg: &ScenarioConfig) -> Result<Layers> {
    const STAGE: &str = "load";
    let load = |p: &Path, k| load_ascii_grid(p, k).map_err(|e| AppError::data(STAGE, e));
    let layers = Layers {
        elevation: load(&cfg.elevation, LayerKind::Elevation)?,
        population: load(&cfg.population, LayerKind::Population)?,
        vegetation: load(&cfg.vegetation, LayerKind::Vegetation)?,
        canopy: load(&cfg.canopy, LayerKind::Canopy)?,
        admin: load(&cfg.admin, LayerKind::RegionId)?,
    };
    for (name, g) in [
        ("population", &layers.population),
        ("vegetation", &layers.vegetation),
        ("canopy", &layers.canopy),
        ("admin", &layers.admin),
    ] {
        layers
            .elevation
            .ensure_aligned(g)
            .map_err(|e| AppError::data(STAGE, format!("{name} layer: {e}")))?;
    }
    Ok(layers)
}

#[derive(Debug)]
pub struct Preprocessed {
    pub tiles: Vec<TerrainTile>,
    pub degraded: bool,
    pub lookup: LosLookupTable,
}

pub fn preprocess(cfg: &ScenarioConfig, layers: &Layers) -> Result<Preprocessed> {
    let mut tiles = partition_tiles(&layers.elevation, cfg.tile_km);
    measure_tiles(&mut tiles, &layers.elevation);
    let ranked = assign_deciles(&tiles);
    if ranked.tiles.iter().all(|t| t.decile.is_none()) {
        return Err(AppError::data("preprocess", "no tile has enough elevation data to rank"));
    }
    let lookup = match &cfg.lookup {
        Some(p) => read_lookup_csv(p)?,
        None => build_los_lookup(&ranked.tiles, &layers.elevation, &cfg.lookup_config()),
    };
    Ok(Preprocessed {
        tiles: ranked.tiles,
        degraded: ranked.degraded,
        lookup,
    })
}

#[derive(Debug)]
pub struct Demand {
    pub settlements: Vec<Settlement>,
    pub rain: BTreeMap<u32, RainClass>,
    pub regions: RegionBuild,
}

pub fn demand(cfg: &ScenarioConfig, layers: &Layers, tiles: &[TerrainTile]) -> Result<Demand> {
    let settlements = extract_settlements(&layers.population, &cfg.thresholds());
    let rain = read_rain_csv(&cfg.rain)?;
    let regions =
        build_modeling_regions(&settlements, &layers.admin, &rain, tiles).map_err(|e| AppError::data("regions", e))?;
    for w in &regions.warnings {
        log::warn!("{w}");
    }
    Ok(Demand {
        settlements,
        rain,
        regions,
    })
}

/// Plans and costs for one strategy, indexed `[region][repetition]`.
#[derive(Debug)]
pub struct StrategyResult {
    pub strategy: Strategy,
    pub plans: Vec<Vec<RegionPlan>>,
    pub costs: Vec<Vec<RegionCost>>,
}

impl StrategyResult {
    /// Costs of the first repetition, which the reports use.
    pub fn primary_costs(&self) -> Vec<RegionCost> {
        self.costs.iter().map(|c| c[0].clone()).collect()
    }

    pub fn total_usd(&self) -> u64 {
        self.costs.iter().map(|c| c[0].total_usd).sum()
    }
}

pub fn assess(cfg: &ScenarioConfig, strategy: Strategy, layers: &Layers, pre: &Preprocessed, dem: &Demand) -> Result<StrategyResult> {
    let scfg = cfg.strategy_config(strategy);
    let ccfg = cfg.cost_config();
    let mut plans = Vec::with_capacity(dem.regions.regions.len());
    let mut costs = Vec::with_capacity(dem.regions.regions.len());
    for region in &dem.regions.regions {
        let reps = assess_region_repeated(region, &dem.settlements, &layers.elevation, &pre.lookup, &scfg)
            .map_err(|e| AppError::internal("design", format!("region {}: {e}", region.region_id)))?;
        let mut rc = Vec::with_capacity(reps.len());
        for plan in &reps {
            let c = cost_region(plan, &layers.vegetation, &layers.canopy, &ccfg)
                .map_err(|e| AppError::data("cost", format!("region {}: {e}", region.region_id)))?;
            rc.push(c);
        }
        plans.push(reps);
        costs.push(rc);
    }
    Ok(StrategyResult { strategy, plans, costs })
}

#[derive(Debug)]
pub struct ScenarioResult {
    pub pre: Preprocessed,
    pub demand: Demand,
    pub strategies: Vec<StrategyResult>,
    pub curves: Vec<DecileCurve>,
    pub savings: Option<SavingsReport>,
}

impl ScenarioResult {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategyResult> {
        self.strategies.iter().find(|r| r.strategy == s)
    }
}

pub fn compute_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let layers = load_layers(cfg)?;
    let pre = preprocess(cfg, &layers)?;
    let dem = demand(cfg, &layers, &pre.tiles)?;
    let mut strategies = Vec::new();
    for s in cfg.strategy_list()? {
        strategies.push(assess(cfg, s, &layers, &pre, &dem)?);
    }
    let mut curves = Vec::new();
    if !dem.regions.regions.is_empty() {
        for r in &strategies {
            for ranking in [Ranking::PopulationDensity, Ranking::TerrainIrregularity] {
                let c = decile_curves(&r.primary_costs(), &dem.regions.regions, ranking)
                    .map_err(|e| AppError::internal("report", e))?;
                curves.push(c);
            }
        }
    }
    let savings = match (
        strategies.iter().find(|r| r.strategy == Strategy::ClosOnly),
        strategies.iter().find(|r| r.strategy == Strategy::Hybrid),
    ) {
        (Some(c), Some(h)) => {
            Some(savings_report(&c.primary_costs(), &h.primary_costs()).map_err(|e| AppError::internal("report", e))?)
        }
        _ => None,
    };
    Ok(ScenarioResult {
        pre,
        demand: dem,
        strategies,
        curves,
        savings,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| AppError::io("manifest", path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Digest of every embedded constant table.
pub fn tables_hash() -> String {
    let mut h = Sha256::new();
    for t in constant_tables() {
        h.update(t.name.as_bytes());
        h.update(outputs::constant_csv(&t).to_bytes());
    }
    hex::encode(h.finalize())
}

pub fn manifest(cfg: &ScenarioConfig) -> Result<serde_json::Value> {
    let mut inputs = serde_json::Map::new();
    for (name, p) in [
        ("elevation", &cfg.elevation),
        ("population", &cfg.population),
        ("vegetation", &cfg.vegetation),
        ("canopy", &cfg.canopy),
        ("admin", &cfg.admin),
        ("rain", &cfg.rain),
    ] {
        inputs.insert(name.into(), json!(file_hash(p)?));
    }
    if let Some(p) = &cfg.lookup {
        inputs.insert("lookup".into(), json!(file_hash(p)?));
    }
    Ok(json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "inputs_sha256": inputs,
        "tables_sha256": tables_hash(),
    }))
}

/// Writes files to a sibling staging directory, then moves them into
/// `dir`. A failure before the move leaves `dir` untouched.
pub fn write_staged(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    const STAGE: &str = "write";
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| AppError::io(STAGE, parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".backhaul-staging")
        .tempdir_in(parent)
        .map_err(|e| AppError::io(STAGE, parent, e))?;
    for (name, bytes) in files {
        let p = staging.path().join(name);
        fs::write(&p, bytes).map_err(|e| AppError::io(STAGE, &p, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| AppError::io(STAGE, dir, e))?;
    for (name, _) in files {
        let to = dir.join(name);
        fs::rename(staging.path().join(name), &to).map_err(|e| AppError::io(STAGE, &to, e))?;
    }
    Ok(())
}

/// Computes the whole scenario and writes every output.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let result = compute_scenario(cfg)?;
    let mut files = outputs::scenario_files(cfg, &result);
    let manifest = serde_json::to_string_pretty(&manifest(cfg)?).expect("manifest serializes") + "\n";
    files.push(("manifest.json".into(), manifest.into_bytes()));
    write_staged(&cfg.output_dir, &files)?;
    Ok(result)
}
