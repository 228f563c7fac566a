//! Settlements and modeling regions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::link_budget::RainClass;
use crate::raster::{GridHeader, RasterError, RasterGrid};
use crate::terrain::{tile_index_of, TerrainTile, DECILES};
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("no major settlement; every region needs one to anchor it")]
    NoMajorSettlement,
    #[error("the administrative raster has no valid cells")]
    NoAdminArea,
    #[error("no rain class for any administrative area of region anchored at settlement {anchor}")]
    MissingRain { anchor: usize },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SettlementThresholds {
    /// Cells must exceed this density, persons per km².
    pub density_min: f64,
    /// Components must total at least this many persons.
    pub pop_min: f64,
    /// Components above this are major settlements.
    pub major_min: f64,
    pub connectivity: Connectivity,
}

impl Default for SettlementThresholds {
    fn default() -> Self {
        Self {
            density_min: 50.0,
            pop_min: 100.0,
            major_min: 20_000.0,
            connectivity: Connectivity::Four,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settlement {
    pub id: usize,
    /// Population-weighted centroid.
    pub location: Point,
    pub population: f64,
    pub is_major: bool,
}

/// Connected components of dense cells that hold enough people.
///
/// Settlement ids follow the first row-major cell of each component, so
/// they do not depend on traversal order.
pub fn extract_settlements(pop: &RasterGrid, th: &SettlementThresholds) -> Vec<Settlement> {
    let h = *pop.header();
    let cell_km2 = h.cell_area_km2();
    let dense: Vec<bool> = pop
        .raw_values()
        .iter()
        .map(|v| !v.is_nan() && *v / cell_km2 > th.density_min)
        .collect();
    let mut seen = alloc::vec![false; h.len()];
    let mut stack = Vec::new();
    let mut out = Vec::new();

    for start in 0..h.len() {
        if !dense[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut total, mut wx, mut wy) = (0.0, 0.0, 0.0);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / h.ncols, i % h.ncols);
            let v = pop.raw_values()[i];
            let center = h.cell_center(r, c);
            total += v;
            wx += v * center.x;
            wy += v * center.y;
            for j in neighbours(&h, r, c, th.connectivity) {
                if dense[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if total >= th.pop_min {
            out.push(Settlement {
                id: out.len(),
                location: Point::new(wx / total, wy / total),
                population: total,
                is_major: total > th.major_min,
            });
        }
    }
    out
}

fn neighbours(h: &GridHeader, r: usize, c: usize, conn: Connectivity) -> impl Iterator<Item = usize> + '_ {
    const FOUR: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    const EIGHT: [(isize, isize); 8] = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];
    let offsets: &[(isize, isize)] = match conn {
        Connectivity::Four => &FOUR,
        Connectivity::Eight => &EIGHT,
    };
    offsets.iter().filter_map(move |(dr, dc)| {
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        (nr >= 0 && nc >= 0 && (nr as usize) < h.nrows && (nc as usize) < h.ncols)
            .then(|| nr as usize * h.ncols + nc as usize)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelingRegion {
    pub region_id: usize,
    pub member_admin_ids: BTreeSet<u32>,
    /// Settlement ids, ascending.
    pub settlements: Vec<usize>,
    pub majors: Vec<usize>,
    pub anchor: usize,
    pub rain: RainClass,
    pub population: f64,
    pub area_km2: f64,
    pub pop_density_per_km2: f64,
    /// Mean decile of the terrain tiles the region touches.
    pub mean_decile_exact: f64,
    pub mean_decile: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionBuild {
    pub regions: Vec<ModelingRegion>,
    /// Region index per settlement id; `None` only for settlements that
    /// could not be placed on any administrative area.
    pub settlement_region: Vec<Option<usize>>,
    /// Nearest major for every minor settlement, before merging.
    pub pairings: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so results do not depend on union order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn admin_at(admin: &RasterGrid, p: Point) -> Result<Option<u32>, RasterError> {
    Ok(admin.sample_at(p)?.map(|v| v as u32))
}

/// Nearest valid administrative cell by ring search; ties go to the
/// lowest id.
fn nearest_admin(admin: &RasterGrid, p: Point) -> Option<u32> {
    let h = admin.header();
    let (r0, c0) = h.cell_of(p).ok()?;
    let max_ring = h.nrows.max(h.ncols);
    for ring in 1..=max_ring {
        let mut best: Option<(f64, u32)> = None;
        let rlo = r0.saturating_sub(ring);
        let rhi = (r0 + ring).min(h.nrows - 1);
        let clo = c0.saturating_sub(ring);
        let chi = (c0 + ring).min(h.ncols - 1);
        for r in rlo..=rhi {
            for c in clo..=chi {
                if r.abs_diff(r0) != ring && c.abs_diff(c0) != ring {
                    continue;
                }
                if let Some(v) = admin.get(r, c) {
                    let d = h.cell_center(r, c).distance_m(&p);
                    let cand = (d, v as u32);
                    if best.is_none_or(|b| cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1)) {
                        best = Some(cand);
                    }
                }
            }
        }
        if let Some((_, id)) = best {
            return Some(id);
        }
    }
    None
}

/// Nearest major settlement by straight-line distance; ties by id.
pub fn nearest_major(settlements: &[Settlement], from: &Settlement) -> Option<usize> {
    settlements
        .iter()
        .filter(|s| s.is_major)
        .map(|s| (s.location.distance_m(&from.location), s.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

/// Merges administrative areas into regions that each hold at least one
/// major settlement.
///
/// Every minor settlement is joined to its nearest major along a straight
/// line, and every administrative area that line crosses joins that
/// major's region. Overlapping merges are unioned transitively.
pub fn build_modeling_regions(
    settlements: &[Settlement],
    admin: &RasterGrid,
    rain: &BTreeMap<u32, RainClass>,
    tiles: &[TerrainTile],
) -> Result<RegionBuild, DemandError> {
    if !settlements.iter().any(|s| s.is_major) {
        return Err(DemandError::NoMajorSettlement);
    }
    let mut warnings = Vec::new();

    // admin ids present in the raster, indexed densely
    let ids: BTreeSet<u32> = admin.valid_cells().map(|(_, _, v)| v as u32).collect();
    if ids.is_empty() {
        return Err(DemandError::NoAdminArea);
    }
    let index: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let id_of: Vec<u32> = ids.iter().copied().collect();
    let mut dsu = DisjointSet::new(ids.len());

    let mut home: Vec<Option<u32>> = Vec::with_capacity(settlements.len());
    for s in settlements {
        let id = match admin_at(admin, s.location)? {
            Some(id) => Some(id),
            None => {
                let near = nearest_admin(admin, s.location);
                let msg = format!(
                    "settlement {} lies on a nodata administrative cell; assigned to area {:?}",
                    s.id, near
                );
                log::warn!("{msg}");
                warnings.push(msg);
                near
            }
        };
        home.push(id);
    }

    let mut pairings = Vec::new();
    for s in settlements.iter().filter(|s| !s.is_major) {
        let Some(major) = nearest_major(settlements, s) else { continue };
        pairings.push((s.id, major));
        let target = &settlements[major];
        let (Some(from), Some(to)) = (home[s.id], home[major]) else { continue };
        dsu.union(index[&from], index[&to]);
        for (r, c) in admin.header().cells_on_segment(s.location, target.location)? {
            if let Some(v) = admin.get(r, c) {
                dsu.union(index[&from], index[&(v as u32)]);
            }
        }
    }

    // components that contain a major settlement become regions
    let mut majors_by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in settlements.iter().filter(|s| s.is_major) {
        if let Some(id) = home[s.id] {
            majors_by_root.entry(dsu.find(index[&id])).or_default().push(s.id);
        }
    }
    let roots: Vec<usize> = majors_by_root.keys().copied().collect();
    let region_of_root: BTreeMap<usize, usize> = roots.iter().enumerate().map(|(i, r)| (*r, i)).collect();

    let mut settlement_region = alloc::vec![None; settlements.len()];
    let mut members: Vec<Vec<usize>> = alloc::vec![Vec::new(); roots.len()];
    for s in settlements {
        let Some(id) = home[s.id] else { continue };
        let root = dsu.find(index[&id]);
        if let Some(&r) = region_of_root.get(&root) {
            settlement_region[s.id] = Some(r);
            members[r].push(s.id);
        }
    }

    let h = admin.header();
    let mut cells_per_admin: BTreeMap<u32, usize> = BTreeMap::new();
    let mut tiles_per_admin: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
    for (r, c, v) in admin.valid_cells() {
        let id = v as u32;
        *cells_per_admin.entry(id).or_default() += 1;
        if let Some(t) = tile_index_of(tiles, h.cell_center(r, c)) {
            tiles_per_admin.entry(id).or_default().insert(t);
        }
    }

    let mut regions = Vec::with_capacity(roots.len());
    for (region_id, root) in roots.iter().enumerate() {
        let member_admin_ids: BTreeSet<u32> = (0..id_of.len())
            .filter(|i| dsu.find(*i) == *root)
            .map(|i| id_of[i])
            .collect();
        let majors = majors_by_root[root].clone();
        let anchor = *majors
            .iter()
            .max_by(|a, b| {
                settlements[**a]
                    .population
                    .total_cmp(&settlements[**b].population)
                    .then(b.cmp(a))
            })
            .expect("region has a major");

        let mut class: Option<RainClass> = None;
        for id in &member_admin_ids {
            match rain.get(id) {
                Some(c) => class = Some(class.map_or(*c, |k| k.worst(*c))),
                None => {
                    let msg = format!("no rain class for administrative area {id}");
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }
        let rain_class = class.ok_or(DemandError::MissingRain { anchor })?;

        let cells: usize = member_admin_ids.iter().map(|id| cells_per_admin[id]).sum();
        let area_km2 = cells as f64 * h.cell_area_km2();
        let population: f64 = members[region_id].iter().map(|i| settlements[*i].population).sum();

        let touched: BTreeSet<usize> = member_admin_ids
            .iter()
            .filter_map(|id| tiles_per_admin.get(id))
            .flatten()
            .copied()
            .collect();
        let deciles: Vec<f64> = touched.iter().filter_map(|t| tiles[*t].decile).map(f64::from).collect();
        let mean_decile_exact = if deciles.is_empty() {
            let msg = format!("region {region_id} touches no ranked terrain tile; using decile {DECILES}");
            log::warn!("{msg}");
            warnings.push(msg);
            DECILES as f64
        } else {
            deciles.iter().sum::<f64>() / deciles.len() as f64
        };
        let mean_decile = (libm::round(mean_decile_exact) as u8).clamp(1, DECILES);

        regions.push(ModelingRegion {
            region_id,
            member_admin_ids,
            settlements: members[region_id].clone(),
            majors,
            anchor,
            rain: rain_class,
            population,
            area_km2,
            pop_density_per_km2: if area_km2 > 0.0 { population / area_km2 } else { 0.0 },
            mean_decile_exact,
            mean_decile,
        });
    }

    Ok(RegionBuild {
        regions,
        settlement_region,
        pairings,
        warnings,
    })
}
