//! Tower heights and capital cost.
//!
//! All money is integer USD. A site is costed once however many links it
//! carries; its tower is sized for the longest link it terminates.

use alloc::vec::Vec;

use thiserror::Error;

use crate::link_budget::{fresnel_clearance_lookup, Confidence, LinkError};
use crate::network::{RegionPlan, SiteId, Strategy};
use crate::raster::{RasterError, RasterGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("no antenna size for a {0} km link")]
    AntennaRange(f64),
    #[error("tower height must be positive, got {0} m")]
    TowerHeight(f64),
    #[error("vegetation fraction {0} is outside [0, 1]")]
    Vegetation(f64),
    #[error("site {0} carries no link")]
    IdleSite(SiteId),
}

/// Unit prices in USD.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostItemTable {
    pub radio_pair_usd: u64,
    /// `(upper bound km, price)`; buckets are half-open except the last.
    pub antenna_pair_usd: [(u32, u64); 4],
    pub tower_usd_per_10m: u64,
    pub planning_per_site_usd: u64,
    pub power_per_site_usd: u64,
}

impl Default for CostItemTable {
    fn default() -> Self {
        Self {
            radio_pair_usd: 6_000,
            antenna_pair_usd: [(10, 1_200), (20, 2_200), (30, 3_600), (45, 4_460)],
            tower_usd_per_10m: 10_000,
            planning_per_site_usd: 8_700,
            power_per_site_usd: 12_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TowerPricing {
    /// Whole 10 m sections, rounded up.
    #[default]
    Sections,
    /// Linear in height, rounded to the nearest dollar.
    ProRata,
}

pub const FOLIAGE_THRESHOLD: f64 = 0.20;
pub const MOUNT_ALLOWANCE_M: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CostConfig {
    pub confidence: Confidence,
    pub pricing: TowerPricing,
    pub table: CostItemTable,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            confidence: Confidence::P90,
            pricing: TowerPricing::Sections,
            table: CostItemTable::default(),
        }
    }
}

/// Canopy (only where foliage exceeds 20 %) plus Fresnel clearance plus the
/// antenna mount allowance.
pub fn required_tower_height(
    veg_fraction: f64,
    canopy_m: f64,
    distance_km: f64,
    frequency_ghz: f64,
    confidence: Confidence,
) -> Result<f64, CostError> {
    if !(0.0..=1.0).contains(&veg_fraction) {
        return Err(CostError::Vegetation(veg_fraction));
    }
    let canopy = if veg_fraction > FOLIAGE_THRESHOLD { canopy_m.max(0.0) } else { 0.0 };
    Ok(canopy + fresnel_clearance_lookup(distance_km, frequency_ghz, confidence)? + MOUNT_ALLOWANCE_M)
}

pub fn tower_cost(height_m: f64, table: &CostItemTable, pricing: TowerPricing) -> Result<u64, CostError> {
    if !(height_m > 0.0) || !height_m.is_finite() {
        return Err(CostError::TowerHeight(height_m));
    }
    Ok(match pricing {
        TowerPricing::Sections => libm::ceil(height_m / 10.0) as u64 * table.tower_usd_per_10m,
        TowerPricing::ProRata => libm::round(height_m / 10.0 * table.tower_usd_per_10m as f64) as u64,
    })
}

pub fn antenna_pair_cost(distance_km: f64, table: &CostItemTable) -> Result<u64, CostError> {
    if !(distance_km > 0.0) {
        return Err(CostError::AntennaRange(distance_km));
    }
    let last = table.antenna_pair_usd.len() - 1;
    for (i, (hi, usd)) in table.antenna_pair_usd.iter().enumerate() {
        let hi = *hi as f64;
        if distance_km < hi || (i == last && distance_km <= hi) {
            return Ok(*usd);
        }
    }
    Err(CostError::AntennaRange(distance_km))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiteCost {
    pub site: SiteId,
    pub tower_height_m: f64,
    pub tower_usd: u64,
    pub planning_usd: u64,
    pub power_usd: u64,
    /// Canopy came from the region mean because the layer had no data.
    pub canopy_fallback: bool,
}

impl SiteCost {
    pub fn total_usd(&self) -> u64 {
        self.tower_usd + self.planning_usd + self.power_usd
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkCost {
    pub link: usize,
    pub radios_usd: u64,
    pub antennas_usd: u64,
    /// Sites first used by this link.
    pub new_site_costs: Vec<SiteCost>,
    pub total_usd: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct CostComposition {
    pub radios_usd: u64,
    pub antennas_usd: u64,
    pub towers_usd: u64,
    pub planning_usd: u64,
    pub power_usd: u64,
}

impl CostComposition {
    pub fn total_usd(&self) -> u64 {
        self.radios_usd + self.antennas_usd + self.towers_usd + self.planning_usd + self.power_usd
    }

    pub fn add(&mut self, other: &CostComposition) {
        self.radios_usd += other.radios_usd;
        self.antennas_usd += other.antennas_usd;
        self.towers_usd += other.towers_usd;
        self.planning_usd += other.planning_usd;
        self.power_usd += other.power_usd;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionCost {
    pub region_id: usize,
    pub strategy: Strategy,
    pub links: Vec<LinkCost>,
    pub composition: CostComposition,
    pub total_usd: u64,
    pub n_links: usize,
    pub n_relays: usize,
    pub n_towers: usize,
    pub canopy_fallbacks: usize,
}

/// Costs a region plan. Vegetation nodata counts as no foliage; canopy
/// nodata under foliage falls back to the mean canopy over the plan's sites,
/// then over the whole layer.
pub fn cost_region(
    plan: &RegionPlan,
    vegetation: &RasterGrid,
    canopy: &RasterGrid,
    cfg: &CostConfig,
) -> Result<RegionCost, CostError> {
    let t = &cfg.table;

    // governing link per site: longest incident, first in plan order on ties
    let mut governing: Vec<Option<usize>> = alloc::vec![None; plan.sites.len()];
    for (li, l) in plan.links.iter().enumerate() {
        for end in [l.a, l.b] {
            if let Some(si) = plan.sites.iter().position(|s| s.id == end) {
                let g = &mut governing[si];
                if g.is_none_or(|gi| l.distance_km > plan.links[gi].distance_km) {
                    *g = Some(li);
                }
            }
        }
    }

    let mut site_canopy = Vec::with_capacity(plan.sites.len());
    for s in &plan.sites {
        site_canopy.push(canopy.sample_at(s.location)?);
    }
    let known: Vec<f64> = site_canopy.iter().flatten().copied().collect();
    let fallback = if known.is_empty() {
        canopy.mean().unwrap_or(0.0)
    } else {
        known.iter().sum::<f64>() / known.len() as f64
    };

    let mut site_costs = Vec::with_capacity(plan.sites.len());
    for (si, s) in plan.sites.iter().enumerate() {
        let li = governing[si].ok_or(CostError::IdleSite(s.id))?;
        let l = &plan.links[li];
        let veg = vegetation.sample_at(s.location)?.unwrap_or(0.0);
        let (canopy_m, used_fallback) = match site_canopy[si] {
            Some(c) => (c, false),
            None => (fallback, veg > FOLIAGE_THRESHOLD),
        };
        if used_fallback {
            log::warn!("site {}: canopy missing, using region mean {:.1} m", s.id, fallback);
        }
        let h = required_tower_height(veg, canopy_m, l.distance_km, l.frequency_ghz, cfg.confidence)?;
        site_costs.push(SiteCost {
            site: s.id,
            tower_height_m: h,
            tower_usd: tower_cost(h, t, cfg.pricing)?,
            planning_usd: t.planning_per_site_usd,
            power_usd: t.power_per_site_usd,
            canopy_fallback: used_fallback,
        });
    }

    let mut built = alloc::vec![false; plan.sites.len()];
    let mut links = Vec::with_capacity(plan.links.len());
    let mut composition = CostComposition::default();
    for (li, l) in plan.links.iter().enumerate() {
        let radios_usd = t.radio_pair_usd;
        let antennas_usd = antenna_pair_cost(l.distance_km, t)?;
        let mut new_site_costs = Vec::new();
        for end in [l.a, l.b] {
            if let Some(si) = plan.sites.iter().position(|s| s.id == end) {
                if !built[si] {
                    built[si] = true;
                    new_site_costs.push(site_costs[si]);
                }
            }
        }
        composition.radios_usd += radios_usd;
        composition.antennas_usd += antennas_usd;
        for sc in &new_site_costs {
            composition.towers_usd += sc.tower_usd;
            composition.planning_usd += sc.planning_usd;
            composition.power_usd += sc.power_usd;
        }
        let total_usd = radios_usd + antennas_usd + new_site_costs.iter().map(SiteCost::total_usd).sum::<u64>();
        links.push(LinkCost {
            link: li,
            radios_usd,
            antennas_usd,
            new_site_costs,
            total_usd,
        });
    }

    Ok(RegionCost {
        region_id: plan.region_id,
        strategy: plan.strategy,
        total_usd: composition.total_usd(),
        n_links: plan.links.len(),
        n_relays: plan.relays.len(),
        n_towers: built.iter().filter(|b| **b).count(),
        canopy_fallbacks: site_costs.iter().filter(|s| s.canopy_fallback).count(),
        links,
        composition,
    })
}
