//! Decile-ranked cost curves, strategy savings and the embedded constant
//! tables in printable form.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::cost::{CostComposition, CostItemTable};
use crate::demand::ModelingRegion;
use crate::link_budget::{
    max_link_distance, Confidence, LinkMode, RainClass, CLEARANCE_DISTANCE_BUCKETS, CLEARANCE_FREQUENCY_BUCKETS,
    FRESNEL_CLEARANCE_M,
};
use crate::network::Strategy;
use crate::cost::RegionCost;

pub const DECILE_COUNT: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("no costed regions")]
    Empty,
    #[error("region {0} has a cost but no region record")]
    UnknownRegion(usize),
    #[error("region sets differ between strategies")]
    RegionMismatch,
    #[error("expected {expected} costs, got {found}")]
    StrategyMismatch { expected: Strategy, found: Strategy },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ranking {
    /// Decile 1 is the densest.
    PopulationDensity,
    /// Decile 1 is the flattest.
    TerrainIrregularity,
}

impl Ranking {
    pub fn name(&self) -> &'static str {
        match self {
            Ranking::PopulationDensity => "population_density",
            Ranking::TerrainIrregularity => "terrain_irregularity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecilePoint {
    pub decile: u8,
    pub regions: usize,
    pub usd: u64,
    pub cumulative_usd: u64,
    pub composition: CostComposition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecileCurve {
    pub ranking: Ranking,
    pub strategy: Strategy,
    pub points: Vec<DecilePoint>,
    /// Fewer regions than deciles; some groups are empty.
    pub sparse: bool,
}

impl DecileCurve {
    pub fn total_usd(&self) -> u64 {
        self.points.last().map_or(0, |p| p.cumulative_usd)
    }
}

/// Ranks regions into ten equal-count groups and accumulates their cost.
/// Ties rank by region id.
pub fn decile_curves(costs: &[RegionCost], regions: &[ModelingRegion], ranking: Ranking) -> Result<DecileCurve, ReportError> {
    let first = costs.first().ok_or(ReportError::Empty)?;
    let mut keyed = Vec::with_capacity(costs.len());
    for c in costs {
        if c.strategy != first.strategy {
            return Err(ReportError::StrategyMismatch {
                expected: first.strategy,
                found: c.strategy,
            });
        }
        let r = regions
            .iter()
            .find(|r| r.region_id == c.region_id)
            .ok_or(ReportError::UnknownRegion(c.region_id))?;
        let key = match ranking {
            Ranking::PopulationDensity => -r.pop_density_per_km2,
            Ranking::TerrainIrregularity => r.mean_decile_exact,
        };
        keyed.push((key, c.region_id, c));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let n = keyed.len();
    let mut points: Vec<DecilePoint> = (1..=DECILE_COUNT as u8)
        .map(|decile| DecilePoint {
            decile,
            regions: 0,
            usd: 0,
            cumulative_usd: 0,
            composition: CostComposition::default(),
        })
        .collect();
    for (rank, (_, _, c)) in keyed.iter().enumerate() {
        let p = &mut points[rank * DECILE_COUNT / n];
        p.regions += 1;
        p.usd += c.total_usd;
        p.composition.add(&c.composition);
    }
    let mut running = 0;
    for p in &mut points {
        running += p.usd;
        p.cumulative_usd = running;
    }
    let sparse = n < DECILE_COUNT;
    if sparse {
        log::warn!("{n} regions for {DECILE_COUNT} deciles; some deciles are empty");
    }
    Ok(DecileCurve {
        ranking,
        strategy: first.strategy,
        points,
        sparse,
    })
}

/// Saving as a percentage of the CLOS cost; zero when CLOS costs nothing.
pub fn savings_pct(clos_usd: u64, hybrid_usd: u64) -> f64 {
    if clos_usd == 0 {
        0.0
    } else {
        (clos_usd as f64 - hybrid_usd as f64) / clos_usd as f64 * 100.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SavingsRow {
    pub region_id: Option<usize>,
    pub clos_usd: u64,
    pub hybrid_usd: u64,
    pub saving_usd: i64,
    pub saving_pct: f64,
    pub clos: CostComposition,
    pub hybrid: CostComposition,
}

impl SavingsRow {
    fn new(region_id: Option<usize>, clos: CostComposition, hybrid: CostComposition) -> Self {
        let (c, h) = (clos.total_usd(), hybrid.total_usd());
        Self {
            region_id,
            clos_usd: c,
            hybrid_usd: h,
            saving_usd: c as i64 - h as i64,
            saving_pct: savings_pct(c, h),
            clos,
            hybrid,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SavingsReport {
    pub rows: Vec<SavingsRow>,
    pub total: SavingsRow,
}

/// Pairs the two strategies' costs region by region.
pub fn savings_report(clos: &[RegionCost], hybrid: &[RegionCost]) -> Result<SavingsReport, ReportError> {
    for (set, want) in [(clos, Strategy::ClosOnly), (hybrid, Strategy::Hybrid)] {
        if let Some(c) = set.iter().find(|c| c.strategy != want) {
            return Err(ReportError::StrategyMismatch {
                expected: want,
                found: c.strategy,
            });
        }
    }
    let mut c: Vec<&RegionCost> = clos.iter().collect();
    let mut h: Vec<&RegionCost> = hybrid.iter().collect();
    c.sort_by_key(|r| r.region_id);
    h.sort_by_key(|r| r.region_id);
    if c.len() != h.len() || c.iter().zip(&h).any(|(a, b)| a.region_id != b.region_id) {
        return Err(ReportError::RegionMismatch);
    }
    let mut total_c = CostComposition::default();
    let mut total_h = CostComposition::default();
    let rows = c
        .iter()
        .zip(&h)
        .map(|(a, b)| {
            total_c.add(&a.composition);
            total_h.add(&b.composition);
            SavingsRow::new(Some(a.region_id), a.composition, b.composition)
        })
        .collect();
    Ok(SavingsReport {
        rows,
        total: SavingsRow::new(None, total_c, total_h),
    })
}

/// A table of embedded constants, already formatted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstantTable {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn constant_tables() -> Vec<ConstantTable> {
    let mut clearance = ConstantTable {
        name: "fresnel_clearance",
        header: vec!["distance_lo_km", "distance_hi_km", "frequency_lo_ghz", "frequency_hi_ghz", "p50_m", "p90_m", "p99_m"],
        rows: Vec::new(),
    };
    for (di, d) in CLEARANCE_DISTANCE_BUCKETS.iter().enumerate() {
        for (fi, f) in CLEARANCE_FREQUENCY_BUCKETS.iter().enumerate() {
            let mut row = vec![num(d.lo_km), num(d.hi_km), num(f.lo_ghz), num(f.hi_ghz)];
            row.extend(Confidence::ALL.iter().map(|c| num(FRESNEL_CLEARANCE_M[di][fi][*c as usize])));
            clearance.rows.push(row);
        }
    }

    let t = CostItemTable::default();
    let mut items = ConstantTable {
        name: "cost_items",
        header: vec!["item", "distance_lo_km", "distance_hi_km", "usd"],
        rows: vec![vec!["radio_pair".into(), String::new(), String::new(), t.radio_pair_usd.to_string()]],
    };
    let mut lo = 0;
    for (hi, usd) in t.antenna_pair_usd {
        items.rows.push(vec!["antenna_pair".into(), lo.to_string(), hi.to_string(), usd.to_string()]);
        lo = hi;
    }
    for (item, usd) in [
        ("tower_per_10m", t.tower_usd_per_10m),
        ("planning_per_site", t.planning_per_site_usd),
        ("power_per_site", t.power_per_site_usd),
    ] {
        items.rows.push(vec![item.into(), String::new(), String::new(), usd.to_string()]);
    }

    let frequency = ConstantTable {
        name: "frequency_rules",
        header: vec!["mode", "distance_lo_km", "distance_hi_km", "frequency_ghz"],
        rows: [
            ("clos", 0, 10, 18),
            ("clos", 10, 25, 15),
            ("clos", 25, 45, 8),
            ("nlos", 0, 5, 18),
            ("nlos", 5, 10, 15),
            ("nlos", 10, 15, 8),
        ]
        .iter()
        .map(|(m, lo, hi, f)| vec![m.to_string(), lo.to_string(), hi.to_string(), f.to_string()])
        .collect(),
    };

    let rain = ConstantTable {
        name: "rain_caps",
        header: vec!["mode", "high_km", "moderate_km", "low_km"],
        rows: [LinkMode::Clos, LinkMode::Nlos]
            .iter()
            .map(|m| {
                let mut row = vec![m.name().to_string()];
                row.extend([RainClass::High, RainClass::Moderate, RainClass::Low].iter().map(|r| num(max_link_distance(*r, *m))));
                row
            })
            .collect(),
    };

    vec![clearance, items, frequency, rain]
}
