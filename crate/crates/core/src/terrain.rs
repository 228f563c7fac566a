//! Terrain irregularity and the sampled line-of-sight probability table.
//!
//! The DEM is cut into square tiles; each tile's irregularity is the
//! inter-decile range (p90 − p10) of its elevations. Tiles are ranked into
//! ten equal-count deciles, one tile per decile is sampled on a regular
//! grid of random points, and line of sight between every pair of points
//! within range gives the probability of a clear path by decile and
//! distance.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::raster::RasterGrid;
use crate::rng::StreamKey;
use crate::viewshed::{extract_profile, line_of_sight};
use crate::Point;

pub const DEFAULT_TILE_KM: f64 = 50.0;
pub const DECILES: u8 = 10;
pub const MIN_TILE_CELLS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("tile {tile_id} has {found} valid cells, need at least {MIN_TILE_CELLS}")]
    InsufficientData { tile_id: usize, found: usize },
    #[error("distance {0} km outside the lookup range")]
    Range(f64),
    #[error("decile {0} is not in 1..=10")]
    BadDecile(u8),
    #[error("no sampled probabilities for decile {0}")]
    EmptyRow(u8),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TileBounds {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl TileBounds {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x < self.x1 && p.y >= self.y0 && p.y < self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerrainTile {
    pub tile_id: usize,
    pub bounds: TileBounds,
    pub delta_h_m: Option<f64>,
    pub decile: Option<u8>,
}

/// Axis-aligned tiling from the DEM's lower-left corner. Tile ids run
/// row-major from the south-west tile; edge tiles may be smaller.
pub fn partition_tiles(dem: &RasterGrid, tile_km: f64) -> Vec<TerrainTile> {
    let h = dem.header();
    let tile_m = tile_km * 1000.0;
    let count = |extent: f64| (libm::ceil(extent / tile_m - 1e-9) as usize).max(1);
    let (nx, ny) = (count(h.width_m()), count(h.height_m()));
    let mut tiles = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let x0 = h.xll + ix as f64 * tile_m;
            let y0 = h.yll + iy as f64 * tile_m;
            tiles.push(TerrainTile {
                tile_id: iy * nx + ix,
                bounds: TileBounds {
                    x0,
                    y0,
                    x1: (x0 + tile_m).min(h.xmax()),
                    y1: (y0 + tile_m).min(h.ymax()),
                },
                delta_h_m: None,
                decile: None,
            });
        }
    }
    tiles
}

/// Index of the tile holding `p` in a tiling built by [`partition_tiles`].
pub fn tile_index_of(tiles: &[TerrainTile], p: Point) -> Option<usize> {
    tiles.iter().position(|t| t.bounds.contains(p)).or_else(|| {
        // far edges of the DEM are closed
        tiles.iter().position(|t| {
            p.x >= t.bounds.x0 && p.x <= t.bounds.x1 && p.y >= t.bounds.y0 && p.y <= t.bounds.y1
        })
    })
}

/// Percentile with linear interpolation between order statistics
/// (`h = (n − 1)·q`). `sorted` must be ascending and non-empty.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Elevations of the valid cells whose centres fall in the tile.
fn tile_values(tile: &TerrainTile, dem: &RasterGrid) -> Vec<f64> {
    let h = dem.header();
    dem.valid_cells()
        .filter(|(r, c, _)| tile.bounds.contains(h.cell_center(*r, *c)))
        .map(|(_, _, v)| v)
        .collect()
}

pub fn interdecile_range(tile: &TerrainTile, dem: &RasterGrid) -> Result<f64, TerrainError> {
    let mut values = tile_values(tile, dem);
    if values.len() < MIN_TILE_CELLS {
        return Err(TerrainError::InsufficientData {
            tile_id: tile.tile_id,
            found: values.len(),
        });
    }
    values.sort_by(f64::total_cmp);
    Ok(percentile(&values, 0.9) - percentile(&values, 0.1))
}

/// Fills `delta_h_m` for every tile, leaving it `None` where data is short.
pub fn measure_tiles(tiles: &mut [TerrainTile], dem: &RasterGrid) {
    for tile in tiles.iter_mut() {
        tile.delta_h_m = match interdecile_range(tile, dem) {
            Ok(dh) => Some(dh),
            Err(e) => {
                log::warn!("{e}; tile excluded from deciles");
                None
            }
        };
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecileAssignment {
    pub tiles: Vec<TerrainTile>,
    /// Fewer than ten measured tiles: deciles are spread over the
    /// available tiles by rank instead of ten full groups.
    pub degraded: bool,
}

/// Ranks measured tiles by `(delta_h_m, tile_id)` and cuts them into ten
/// equal-count groups; decile 1 is the least irregular.
pub fn assign_deciles(tiles: &[TerrainTile]) -> DecileAssignment {
    let mut ranked: Vec<(f64, usize, usize)> = tiles
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.delta_h_m.map(|dh| (dh, t.tile_id, i)))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = ranked.len();
    let degraded = n < DECILES as usize;
    if degraded {
        log::warn!("only {n} measured tiles; decile assignment is degraded");
    }
    let mut out: Vec<TerrainTile> = tiles.to_vec();
    for t in out.iter_mut() {
        t.decile = None;
    }
    for (rank, (_, _, i)) in ranked.iter().enumerate() {
        out[*i].decile = Some((rank * DECILES as usize / n) as u8 + 1);
    }
    DecileAssignment { tiles: out, degraded }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LookupConfig {
    pub seed: u64,
    pub tower_m: f64,
    pub bin_width_km: f64,
    pub max_km: f64,
    /// Pitch of the sampling grid laid over each selected tile.
    pub sample_cell_km: f64,
    pub tiles_per_decile: usize,
    pub curvature: bool,
    /// Profile sampling step; `None` uses the DEM cell size.
    pub step_m: Option<f64>,
}

impl Default for LookupConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tower_m: 30.0,
            bin_width_km: 2.5,
            max_km: 45.0,
            sample_cell_km: 2.5,
            tiles_per_decile: 1,
            curvature: true,
            step_m: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LookupBin {
    pub visible: u64,
    pub pairs: u64,
    /// `None` when nothing was sampled for this bin.
    pub p_los: Option<f64>,
}

/// Probability of line of sight by decile (rows 1..=10) and distance bin.
#[derive(Clone, Debug, PartialEq)]
pub struct LosLookupTable {
    pub bin_width_km: f64,
    pub max_km: f64,
    rows: Vec<Vec<LookupBin>>,
    /// Rows filled from neighbouring deciles rather than sampled.
    pub interpolated: Vec<u8>,
}

impl LosLookupTable {
    pub fn empty(bin_width_km: f64, max_km: f64) -> Self {
        let bins = libm::ceil(max_km / bin_width_km - 1e-9) as usize;
        Self {
            bin_width_km,
            max_km,
            rows: alloc::vec![alloc::vec![LookupBin::default(); bins]; DECILES as usize],
            interpolated: Vec::new(),
        }
    }

    pub fn bins(&self) -> usize {
        self.rows[0].len()
    }

    pub fn bin_range(&self, bin: usize) -> (f64, f64) {
        let lo = bin as f64 * self.bin_width_km;
        (lo, (lo + self.bin_width_km).min(self.max_km))
    }

    pub fn bin_of(&self, distance_km: f64) -> Option<usize> {
        if !(distance_km >= 0.0) || distance_km > self.max_km {
            return None;
        }
        Some((libm::floor(distance_km / self.bin_width_km) as usize).min(self.bins() - 1))
    }

    pub fn row(&self, decile: u8) -> Result<&[LookupBin], TerrainError> {
        if decile == 0 || decile > DECILES {
            return Err(TerrainError::BadDecile(decile));
        }
        Ok(&self.rows[decile as usize - 1])
    }

    pub fn set(&mut self, decile: u8, bin: usize, value: LookupBin) -> Result<(), TerrainError> {
        if decile == 0 || decile > DECILES {
            return Err(TerrainError::BadDecile(decile));
        }
        self.rows[decile as usize - 1][bin] = value;
        Ok(())
    }

    fn row_is_empty(&self, decile: u8) -> bool {
        self.rows[decile as usize - 1].iter().all(|b| b.p_los.is_none())
    }

    /// Fills rows with no samples by linear interpolation between the
    /// nearest sampled deciles, or by copying the single nearest one.
    pub fn interpolate_missing_rows(&mut self) {
        let sampled: Vec<u8> = (1..=DECILES).filter(|d| !self.row_is_empty(*d)).collect();
        if sampled.is_empty() {
            return;
        }
        for d in 1..=DECILES {
            if sampled.contains(&d) {
                continue;
            }
            let below = sampled.iter().rev().find(|s| **s < d).copied();
            let above = sampled.iter().find(|s| **s > d).copied();
            for bin in 0..self.bins() {
                let p = |s: u8| self.probability_in_row(s, bin);
                let value = match (below, above) {
                    (Some(lo), Some(hi)) => {
                        let w = (d - lo) as f64 / (hi - lo) as f64;
                        p(lo) * (1.0 - w) + p(hi) * w
                    }
                    (Some(s), None) | (None, Some(s)) => p(s),
                    (None, None) => unreachable!(),
                };
                self.rows[d as usize - 1][bin] = LookupBin {
                    visible: 0,
                    pairs: 0,
                    p_los: Some(value),
                };
            }
            log::warn!("decile {d} had no usable tile; interpolated from neighbours");
            self.interpolated.push(d);
        }
    }

    // Nearest populated bin in the row; ties prefer the shorter distance.
    fn probability_in_row(&self, decile: u8, bin: usize) -> f64 {
        let row = &self.rows[decile as usize - 1];
        (0..row.len())
            .filter_map(|b| row[b].p_los.map(|p| (b.abs_diff(bin), b, p)))
            .min_by(|x, y| x.0.cmp(&y.0).then(x.1.cmp(&y.1)))
            .map(|x| x.2)
            .expect("row is populated")
    }
}

/// Probability of a clear path for `decile` over `distance_km`.
pub fn lookup_probability(table: &LosLookupTable, decile: u8, distance_km: f64) -> Result<f64, TerrainError> {
    let bin = table.bin_of(distance_km).ok_or(TerrainError::Range(distance_km))?;
    table.row(decile)?;
    if table.row_is_empty(decile) {
        return Err(TerrainError::EmptyRow(decile));
    }
    Ok(table.probability_in_row(decile, bin))
}

/// Sampling points for one tile: one uniform point per grid cell of
/// `cell_km`, the grid clipped to the tile.
pub fn sample_points(tile: &TerrainTile, cell_km: f64, key: StreamKey) -> Vec<Point> {
    let cell = cell_km * 1000.0;
    let b = tile.bounds;
    let count = |extent: f64| (libm::ceil(extent / cell - 1e-9) as usize).max(1);
    let (nx, ny) = (count(b.width()), count(b.height()));
    let mut points = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let x0 = b.x0 + ix as f64 * cell;
            let y0 = b.y0 + iy as f64 * cell;
            let w = (x0 + cell).min(b.x1) - x0;
            let h = (y0 + cell).min(b.y1) - y0;
            let mut rng = key.child((iy * nx + ix) as u64).rng();
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            points.push(Point::new(x0 + u * w, y0 + v * h));
        }
    }
    points
}

/// Builds the lookup table by explicit line of sight between every ordered
/// pair of sample points within `max_km` on the selected tiles.
pub fn build_los_lookup(tiles: &[TerrainTile], dem: &RasterGrid, cfg: &LookupConfig) -> LosLookupTable {
    let mut table = LosLookupTable::empty(cfg.bin_width_km, cfg.max_km);
    let step = cfg.step_m.unwrap_or(dem.header().cellsize);
    let root = StreamKey::root(cfg.seed);

    let mut by_decile: BTreeMap<u8, Vec<&TerrainTile>> = BTreeMap::new();
    for t in tiles {
        if let Some(d) = t.decile {
            by_decile.entry(d).or_default().push(t);
        }
    }

    for (decile, mut candidates) in by_decile {
        candidates.sort_by_key(|t| t.tile_id);
        let chosen = choose_tiles(&candidates, cfg.tiles_per_decile, root.child(decile as u64));
        let mut visible = alloc::vec![0u64; table.bins()];
        let mut pairs = alloc::vec![0u64; table.bins()];
        for tile in chosen {
            let key = root.child(1000 + tile.tile_id as u64);
            let points = sample_points(tile, cfg.sample_cell_km, key);
            for (i, a) in points.iter().enumerate() {
                for (j, b) in points.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let d = a.distance_km(b);
                    let Some(bin) = table.bin_of(d) else { continue };
                    if d == 0.0 {
                        continue;
                    }
                    let Ok(profile) = extract_profile(dem, *a, *b, step) else {
                        continue;
                    };
                    pairs[bin] += 1;
                    if line_of_sight(&profile, cfg.tower_m, cfg.tower_m, cfg.curvature).visible {
                        visible[bin] += 1;
                    }
                }
            }
        }
        for bin in 0..table.bins() {
            let p_los = (pairs[bin] > 0).then(|| visible[bin] as f64 / pairs[bin] as f64);
            table.rows[decile as usize - 1][bin] = LookupBin {
                visible: visible[bin],
                pairs: pairs[bin],
                p_los,
            };
        }
    }
    table.interpolate_missing_rows();
    table
}

// Partial Fisher-Yates over the candidate list.
fn choose_tiles<'a>(candidates: &[&'a TerrainTile], k: usize, key: StreamKey) -> Vec<&'a TerrainTile> {
    let mut pool: Vec<&TerrainTile> = candidates.to_vec();
    let mut rng = key.rng();
    let k = k.min(pool.len());
    for i in 0..k {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}
