//! Routing and link planning.
//!
//! Each modeling region is wired as a minimum spanning tree rooted at its
//! anchor. Every tree edge is then planned by a recursive procedure:
//!
//!  1. Segments longer than the rain-region CLOS cap are split into equal
//!     hops with relay towers at the split points.
//!  2. Line of sight is decided explicitly from the DEM for segments whose
//!     both ends are settlements, and by a Bernoulli draw against the
//!     lookup table for segments touching a new relay.
//!  3. A clear segment becomes a CLOS link.
//!  4. Otherwise the hybrid strategy tries a single diffractive NLOS hop.
//!  5. Otherwise a relay goes at the midpoint and both halves recurse;
//!     halves shorter than the minimum segment are built as CLOS.
//!
//! Draws are keyed by the segment's position in the recursion tree, so the
//! same sub-segment sees the same draw under either strategy and under any
//! evaluation order.

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::demand::{ModelingRegion, Settlement};
use crate::link_budget::{assign_frequency, max_link_distance, Confidence, LinkError, LinkMode, NlosMargins};
use crate::raster::RasterGrid;
use crate::rng::StreamKey;
use crate::terrain::{lookup_probability, LosLookupTable, TerrainError};
use crate::viewshed::{extract_profile, knife_edge_eligible, line_of_sight, ViewshedError};
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Viewshed(#[from] ViewshedError),
    #[error(transparent)]
    Lookup(#[from] TerrainError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("minimum segment length must be positive")]
    BadMinSegment,
    #[error("settlement {0} is not in the settlement list")]
    UnknownSettlement(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    ClosOnly,
    Hybrid,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::ClosOnly => "clos",
            Strategy::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clos" | "clos_only" => Some(Strategy::ClosOnly),
            "hybrid" => Some(Strategy::Hybrid),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LosSource {
    ExplicitViewshed,
    ProbabilisticLookup,
    /// Below the minimum segment length; built without a test.
    ForcedFloor,
}

impl LosSource {
    pub fn name(&self) -> &'static str {
        match self {
            LosSource::ExplicitViewshed => "explicit_viewshed",
            LosSource::ProbabilisticLookup => "probabilistic_lookup",
            LosSource::ForcedFloor => "forced_floor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteId {
    Settlement(usize),
    Relay(usize),
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiteId::Settlement(i) => write!(f, "s{i}"),
            SiteId::Relay(i) => write!(f, "r{i}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RouteEdge {
    pub id: usize,
    pub a: usize,
    pub b: usize,
    pub length_km: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouteGraph {
    pub nodes: Vec<(usize, Point)>,
    pub edges: Vec<RouteEdge>,
}

impl RouteGraph {
    pub fn total_km(&self) -> f64 {
        self.edges.iter().map(|e| e.length_km).sum()
    }
}

/// Minimum spanning tree of the complete Euclidean graph, grown from
/// `anchor` (Prim). Equal-weight candidates resolve to the
/// lexicographically smallest `(min id, max id)` pair.
pub fn build_mst(nodes: &[(usize, Point)], anchor: usize) -> RouteGraph {
    let n = nodes.len();
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n < 2 {
        return RouteGraph {
            nodes: nodes.to_vec(),
            edges,
        };
    }
    let start = nodes.iter().position(|(id, _)| *id == anchor).unwrap_or(0);
    let mut in_tree = alloc::vec![false; n];
    // best[i] = (distance, tree node index) for nodes outside the tree
    let mut best: Vec<(f64, usize)> = alloc::vec![(f64::INFINITY, start); n];
    in_tree[start] = true;
    for i in 0..n {
        if i != start {
            best[i] = (nodes[i].1.distance_km(&nodes[start].1), start);
        }
    }
    let pair = |i: usize, j: usize| {
        let (a, b) = (nodes[i].0, nodes[j].0);
        if a < b { (a, b) } else { (b, a) }
    };
    for _ in 1..n {
        let mut pick: Option<usize> = None;
        for i in (0..n).filter(|i| !in_tree[*i]) {
            pick = match pick {
                None => Some(i),
                Some(p) => {
                    let better = best[i].0 < best[p].0
                        || (best[i].0 == best[p].0 && pair(i, best[i].1) < pair(p, best[p].1));
                    Some(if better { i } else { p })
                }
            };
        }
        let v = pick.expect("a node remains outside the tree");
        let (len, u) = best[v];
        in_tree[v] = true;
        edges.push(RouteEdge {
            id: edges.len(),
            a: nodes[u].0,
            b: nodes[v].0,
            length_km: len,
        });
        for i in (0..n).filter(|i| !in_tree[*i]) {
            let d = nodes[i].1.distance_km(&nodes[v].1);
            if d < best[i].0 || (d == best[i].0 && pair(i, v) < pair(i, best[i].1)) {
                best[i] = (d, v);
            }
        }
    }
    RouteGraph {
        nodes: nodes.to_vec(),
        edges,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub seed: u64,
    pub min_segment_km: f64,
    pub confidence: Confidence,
    pub curvature: bool,
    pub repetitions: usize,
    pub tower_m: f64,
    pub margins: NlosMargins,
    /// Accept NLOS on probabilistic segments without a geometry test.
    pub nlos_on_probabilistic: bool,
    /// Profile sampling step; `None` uses the DEM cell size.
    pub step_m: Option<f64>,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        Self {
            strategy,
            seed,
            min_segment_km: 1.0,
            confidence: Confidence::P90,
            curvature: true,
            repetitions: 1,
            tower_m: 30.0,
            margins: NlosMargins::default(),
            nlos_on_probabilistic: true,
            step_m: None,
        }
    }

    pub fn with_strategy(&self, strategy: Strategy) -> Self {
        Self { strategy, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackhaulLink {
    pub a: SiteId,
    pub b: SiteId,
    pub distance_km: f64,
    pub kind: LinkMode,
    pub frequency_ghz: f64,
    pub los_source: LosSource,
    pub edge: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaySite {
    pub id: usize,
    pub location: Point,
    pub parent_edge: usize,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct EdgePlan {
    pub links: Vec<BackhaulLink>,
    /// Relay ids are local to the edge, numbered from zero.
    pub relays: Vec<RelaySite>,
    pub max_depth: usize,
}

/// Inputs shared by every segment of one edge.
struct EdgeContext<'a> {
    edge: usize,
    dem: &'a RasterGrid,
    lookup: &'a LosLookupTable,
    region: &'a ModelingRegion,
    cfg: &'a StrategyConfig,
    step_m: f64,
}

#[derive(Clone, Copy)]
struct End {
    site: SiteId,
    at: Point,
}

impl EdgeContext<'_> {
    fn link(&self, p: End, q: End, d: f64, kind: LinkMode, source: LosSource) -> Result<BackhaulLink, PlanError> {
        Ok(BackhaulLink {
            a: p.site,
            b: q.site,
            distance_km: d,
            kind,
            frequency_ghz: assign_frequency(d, kind)?,
            los_source: source,
            edge: self.edge,
        })
    }

    fn relay(&self, plan: &mut EdgePlan, at: Point) -> End {
        let id = plan.relays.len();
        plan.relays.push(RelaySite {
            id,
            location: at,
            parent_edge: self.edge,
        });
        End {
            site: SiteId::Relay(id),
            at,
        }
    }

    fn segment(
        &self,
        plan: &mut EdgePlan,
        p: End,
        q: End,
        first_order: bool,
        key: StreamKey,
        depth: usize,
    ) -> Result<(), PlanError> {
        plan.max_depth = plan.max_depth.max(depth);
        let d = p.at.distance_km(&q.at);
        let rain = self.region.rain;
        let max_clos = max_link_distance(rain, LinkMode::Clos);

        if d > max_clos {
            let hops = libm::ceil(d / max_clos) as usize;
            let mut prev = p;
            for i in 1..=hops {
                let next = if i == hops {
                    q
                } else {
                    self.relay(plan, p.at.lerp(&q.at, i as f64 / hops as f64))
                };
                self.segment(plan, prev, next, false, key.child(i as u64), depth + 1)?;
                prev = next;
            }
            return Ok(());
        }

        let hybrid = self.cfg.strategy == Strategy::Hybrid;
        let nlos_ok = d <= max_link_distance(rain, LinkMode::Nlos);
        if first_order {
            let profile = extract_profile(self.dem, p.at, q.at, self.step_m)?;
            let h = self.cfg.tower_m;
            if line_of_sight(&profile, h, h, self.cfg.curvature).visible {
                plan.links.push(self.link(p, q, d, LinkMode::Clos, LosSource::ExplicitViewshed)?);
                return Ok(());
            }
            if hybrid
                && nlos_ok
                && knife_edge_eligible(&profile, h, h, &self.cfg.margins, self.cfg.curvature)?.eligible
            {
                plan.links.push(self.link(p, q, d, LinkMode::Nlos, LosSource::ExplicitViewshed)?);
                return Ok(());
            }
        } else {
            let prob = lookup_probability(self.lookup, self.region.mean_decile, d)?;
            if key.unit() < prob {
                plan.links.push(self.link(p, q, d, LinkMode::Clos, LosSource::ProbabilisticLookup)?);
                return Ok(());
            }
            if hybrid && nlos_ok && self.cfg.nlos_on_probabilistic {
                plan.links.push(self.link(p, q, d, LinkMode::Nlos, LosSource::ProbabilisticLookup)?);
                return Ok(());
            }
        }

        let mid = self.relay(plan, p.at.lerp(&q.at, 0.5));
        if d / 2.0 < self.cfg.min_segment_km {
            plan.links.push(self.link(p, mid, d / 2.0, LinkMode::Clos, LosSource::ForcedFloor)?);
            plan.links.push(self.link(mid, q, d / 2.0, LinkMode::Clos, LosSource::ForcedFloor)?);
            plan.max_depth = plan.max_depth.max(depth + 1);
            return Ok(());
        }
        self.segment(plan, p, mid, false, key.child(1), depth + 1)?;
        self.segment(plan, mid, q, false, key.child(2), depth + 1)
    }
}

/// Plans one route edge between settlements `a` and `b`.
#[allow(clippy::too_many_arguments)]
pub fn plan_edge(
    edge: &RouteEdge,
    a: Point,
    b: Point,
    dem: &RasterGrid,
    lookup: &LosLookupTable,
    region: &ModelingRegion,
    cfg: &StrategyConfig,
    key: StreamKey,
) -> Result<EdgePlan, PlanError> {
    if !(cfg.min_segment_km > 0.0) {
        return Err(PlanError::BadMinSegment);
    }
    let ctx = EdgeContext {
        edge: edge.id,
        dem,
        lookup,
        region,
        cfg,
        step_m: cfg.step_m.unwrap_or(dem.header().cellsize),
    };
    let mut plan = EdgePlan::default();
    if a.distance_m(&b) == 0.0 {
        return Ok(plan);
    }
    let p = End {
        site: SiteId::Settlement(edge.a),
        at: a,
    };
    let q = End {
        site: SiteId::Settlement(edge.b),
        at: b,
    };
    ctx.segment(&mut plan, p, q, true, key, 0)?;
    Ok(plan)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Site {
    pub id: SiteId,
    pub location: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionPlan {
    pub region_id: usize,
    pub strategy: Strategy,
    pub repetition: usize,
    pub graph: RouteGraph,
    pub links: Vec<BackhaulLink>,
    pub relays: Vec<RelaySite>,
    /// Every site that carries at least one link, settlements first.
    pub sites: Vec<Site>,
}

impl RegionPlan {
    pub fn count_kind(&self, kind: LinkMode) -> usize {
        self.links.iter().filter(|l| l.kind == kind).count()
    }

    pub fn site(&self, id: SiteId) -> Option<&Site> {
        self.sites.iter().find(|s| s.id == id)
    }
}

/// Stream for one edge of one region in one repetition.
pub fn edge_key(seed: u64, repetition: usize, region_id: usize, edge_id: usize) -> StreamKey {
    StreamKey::root(seed)
        .child(repetition as u64)
        .child(region_id as u64)
        .child(edge_id as u64)
}

/// Plans every MST edge of a region. Relays from different edges closer
/// than `merge_m` (default: one DEM cell) are merged.
pub fn assess_region(
    region: &ModelingRegion,
    settlements: &[Settlement],
    dem: &RasterGrid,
    lookup: &LosLookupTable,
    cfg: &StrategyConfig,
    repetition: usize,
) -> Result<RegionPlan, PlanError> {
    let mut nodes = Vec::with_capacity(region.settlements.len());
    for id in &region.settlements {
        let s = settlements.get(*id).filter(|s| s.id == *id).ok_or(PlanError::UnknownSettlement(*id))?;
        nodes.push((*id, s.location));
    }
    let graph = build_mst(&nodes, region.anchor);
    let merge_m = dem.header().cellsize;

    let mut links: Vec<BackhaulLink> = Vec::new();
    let mut relays: Vec<RelaySite> = Vec::new();
    for edge in &graph.edges {
        let key = edge_key(cfg.seed, repetition, region.region_id, edge.id);
        let plan = plan_edge(
            edge,
            settlements[edge.a].location,
            settlements[edge.b].location,
            dem,
            lookup,
            region,
            cfg,
            key,
        )?;
        // local relay id -> global relay id, merging near-duplicates
        let mut remap = Vec::with_capacity(plan.relays.len());
        for r in &plan.relays {
            let existing = relays.iter().find(|g| g.location.distance_m(&r.location) <= merge_m);
            let id = match existing {
                Some(g) => g.id,
                None => {
                    let id = relays.len();
                    relays.push(RelaySite { id, ..*r });
                    id
                }
            };
            remap.push(id);
        }
        let fix = |s: SiteId| match s {
            SiteId::Relay(i) => SiteId::Relay(remap[i]),
            other => other,
        };
        for l in plan.links {
            let (a, b) = (fix(l.a), fix(l.b));
            if a != b {
                links.push(BackhaulLink { a, b, ..l });
            }
        }
    }

    let mut sites: Vec<Site> = Vec::new();
    for id in &region.settlements {
        let sid = SiteId::Settlement(*id);
        if links.iter().any(|l| l.a == sid || l.b == sid) {
            sites.push(Site {
                id: sid,
                location: settlements[*id].location,
            });
        }
    }
    for r in &relays {
        sites.push(Site {
            id: SiteId::Relay(r.id),
            location: r.location,
        });
    }

    Ok(RegionPlan {
        region_id: region.region_id,
        strategy: cfg.strategy,
        repetition,
        graph,
        links,
        relays,
        sites,
    })
}

/// One plan per repetition; repetition `r` draws from its own streams.
pub fn assess_region_repeated(
    region: &ModelingRegion,
    settlements: &[Settlement],
    dem: &RasterGrid,
    lookup: &LosLookupTable,
    cfg: &StrategyConfig,
) -> Result<Vec<RegionPlan>, PlanError> {
    (0..cfg.repetitions.max(1))
        .map(|r| assess_region(region, settlements, dem, lookup, cfg, r))
        .collect()
}
