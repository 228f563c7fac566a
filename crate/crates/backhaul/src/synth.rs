//! Synthetic desk-scale worlds.
//!
//! The flat and ridge worlds share settlements, administrative areas, rain
//! classes and land cover; only the elevation differs. The ridge world has
//! north-south ridges between settled valleys, so links across a valley
//! wall need either a relay or a single diffracting hop.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use backhaul_core::link_budget::RainClass;
use backhaul_core::raster::{GridHeader, LayerKind, RasterGrid};
use backhaul_core::rng::StreamKey;
use backhaul_core::Point;

use crate::ascii_grid::{save_ascii_grid, DEFAULT_NODATA};
use crate::config::ScenarioConfig;
use crate::error::{AppError, Result};
use crate::inputs::rain_table;
use crate::table::write_csv_table;

pub const WORLD_CELLS: usize = 200;
pub const CELL_M: f64 = 250.0;
pub const SETTLEMENTS: usize = 30;
/// Tile edge for the 50 km desk worlds, giving 16 tiles to rank.
pub const WORLD_TILE_KM: f64 = 12.5;

const VALLEY_PITCH_M: f64 = 8000.0;
const BASE_M: f64 = 200.0;
/// Background population per cell stays below the density threshold.
const BACKGROUND_PER_CELL: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum World {
    Flat,
    Ridge,
    /// Two settlements 8 km apart on flat open ground.
    Pair,
}

impl World {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "flat" => Some(World::Flat),
            "ridge" => Some(World::Ridge),
            "pair" => Some(World::Pair),
            _ => None,
        }
    }
}

#[derive(Debug)]
pub struct SynthWorld {
    pub elevation: RasterGrid,
    pub population: RasterGrid,
    pub vegetation: RasterGrid,
    pub canopy: RasterGrid,
    pub admin: RasterGrid,
    pub rain: BTreeMap<u32, RainClass>,
    pub tile_km: f64,
}

fn header(ncols: usize, nrows: usize) -> GridHeader {
    GridHeader {
        ncols,
        nrows,
        xll: 0.0,
        yll: 0.0,
        cellsize: CELL_M,
        nodata: DEFAULT_NODATA,
    }
}

fn grid(h: GridHeader, kind: LayerKind, f: impl FnMut(Point) -> f64) -> RasterGrid {
    RasterGrid::from_fn(h, kind, f).expect("synthetic layers are in range")
}

/// Top-left cell `(row, col)` of each 2×2 settlement block and its
/// population. Blocks sit in valley floors at least 3 km apart.
fn settlement_blocks(seed: u64) -> Vec<(usize, usize, f64)> {
    let key = StreamKey::root(seed).child(0x5e77);
    let mut placed: Vec<(Point, f64)> = Vec::new();
    let mut draw = 0u64;
    while placed.len() < SETTLEMENTS {
        let this = key.child(draw);
        let u = |k: u64| this.child(k).unit();
        let valley = (u(0) * 7.0).floor().min(6.0);
        let x = (valley * VALLEY_PITCH_M + (u(1) - 0.5) * 3000.0).clamp(1000.0, 49_000.0);
        let y = 1500.0 + u(2) * 47_000.0;
        draw += 1;
        let p = Point::new((x / CELL_M).round() * CELL_M, (y / CELL_M).round() * CELL_M);
        if placed.iter().any(|(q, _)| q.distance_m(&p) < 3000.0) {
            continue;
        }
        // one major per quadrant, placed first
        let pop = if placed.len() < 4 {
            25_000.0 + 35_000.0 * u(3)
        } else {
            400.0 + 3600.0 * u(3)
        };
        let p = if placed.len() < 4 {
            let qx = if placed.len() % 2 == 0 { 0.25 } else { 0.75 };
            let qy = if placed.len() < 2 { 0.25 } else { 0.75 };
            let vx = ((qx * 50_000.0) / VALLEY_PITCH_M).round() * VALLEY_PITCH_M;
            Point::new(vx, qy * 50_000.0)
        } else {
            p
        };
        if placed.iter().any(|(q, _)| q.distance_m(&p) < 3000.0) {
            continue;
        }
        placed.push((p, pop));
    }
    // the block's shared corner is its population-weighted centroid
    placed
        .into_iter()
        .map(|(p, pop)| {
            let col = (p.x / CELL_M) as usize - 1;
            let row = WORLD_CELLS - (p.y / CELL_M) as usize - 1;
            (row, col, pop)
        })
        .collect()
}

fn population_layer(h: GridHeader, blocks: &[(usize, usize, f64)]) -> RasterGrid {
    let mut values = vec![BACKGROUND_PER_CELL; h.len()];
    for (row, col, pop) in blocks {
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            values[h.index(row + r, col + c)] = pop / 4.0;
        }
    }
    RasterGrid::new(h, LayerKind::Population, values).expect("population is non-negative")
}

fn ridge_height(p: Point) -> f64 {
    // ridge crest midway between valleys, 500 m wide, 50 to 80 m high
    let offset = (p.x - VALLEY_PITCH_M / 2.0).rem_euclid(VALLEY_PITCH_M);
    if !(250.0..VALLEY_PITCH_M - 250.0).contains(&offset) {
        65.0 + 15.0 * (p.y / 9000.0).sin()
    } else {
        0.0
    }
}

pub fn generate(world: World, seed: u64) -> SynthWorld {
    if world == World::Pair {
        return pair_world();
    }
    let h = header(WORLD_CELLS, WORLD_CELLS);
    let half = WORLD_CELLS as f64 * CELL_M / 2.0;
    let elevation = match world {
        World::Flat => grid(h, LayerKind::Elevation, |_| BASE_M),
        _ => grid(h, LayerKind::Elevation, |p| BASE_M + 0.001 * p.y + ridge_height(p)),
    };
    SynthWorld {
        elevation,
        population: population_layer(h, &settlement_blocks(seed)),
        vegetation: grid(h, LayerKind::Vegetation, |p| if p.x < half { 0.45 } else { 0.1 }),
        canopy: grid(h, LayerKind::Canopy, |p| if p.x < half { 15.0 } else { 6.0 }),
        admin: grid(h, LayerKind::RegionId, |p| {
            1.0 + if p.x >= half { 1.0 } else { 0.0 } + if p.y >= half { 2.0 } else { 0.0 }
        }),
        rain: BTreeMap::from([
            (1, RainClass::Low),
            (2, RainClass::Moderate),
            (3, RainClass::Moderate),
            (4, RainClass::High),
        ]),
        tile_km: WORLD_TILE_KM,
    }
}

fn pair_world() -> SynthWorld {
    let h = header(60, 20);
    // blocks at columns 10 and 42: centroids at x = 2750 and 10750
    let blocks = [(9, 10, 30_000.0), (9, 42, 500.0)];
    SynthWorld {
        elevation: grid(h, LayerKind::Elevation, |_| BASE_M),
        population: population_layer(h, &blocks),
        vegetation: grid(h, LayerKind::Vegetation, |_| 0.0),
        canopy: grid(h, LayerKind::Canopy, |_| 0.0),
        admin: grid(h, LayerKind::RegionId, |_| 1.0),
        rain: BTreeMap::from([(1, RainClass::Low)]),
        tile_km: 50.0,
    }
}

/// Writes the layers, `rain.csv` and a `scenario.json` with relative paths;
/// returns the loaded config.
pub fn write_world(world: &SynthWorld, dir: &Path, seed: u64) -> Result<ScenarioConfig> {
    const STAGE: &str = "synth";
    fs::create_dir_all(dir).map_err(|e| AppError::io(STAGE, dir, e))?;
    for (name, g) in [
        ("elevation.asc", &world.elevation),
        ("population.asc", &world.population),
        ("vegetation.asc", &world.vegetation),
        ("canopy.asc", &world.canopy),
        ("admin.asc", &world.admin),
    ] {
        save_ascii_grid(g, &dir.join(name)).map_err(|e| AppError::data(STAGE, e))?;
    }
    write_csv_table(&rain_table(&world.rain), &dir.join("rain.csv"))?;
    let mut cfg = ScenarioConfig::with_inputs(Path::new(""));
    cfg.output_dir = PathBuf::from("out");
    cfg.seed = seed;
    cfg.tile_km = world.tile_km;
    let path = dir.join("scenario.json");
    fs::write(&path, cfg.to_json() + "\n").map_err(|e| AppError::io(STAGE, &path, e))?;
    ScenarioConfig::load(&path)
}
