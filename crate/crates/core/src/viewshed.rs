//! Point-to-point line of sight over sampled terrain profiles.
//!
//! Heights along a profile are compared against the straight sight line
//! between the two antenna tips. With curvature enabled each interior
//! sample is raised by the earth bulge `d1·d2 / (2·R_eff)` using the 4/3
//! effective earth radius.

use alloc::vec::Vec;

use thiserror::Error;

use crate::link_budget::{fresnel_radius_at, LinkGeometry, NlosMargins};
use crate::raster::{RasterError, RasterGrid};
use crate::Point;

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const EFFECTIVE_EARTH_RADIUS_KM: f64 = EARTH_RADIUS_KM * 4.0 / 3.0;

/// Clusters separated by fewer clear samples than this are merged.
pub const DEFAULT_CLUSTER_GAP: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViewshedError {
    #[error("profile endpoints coincide")]
    DegenerateSegment,
    #[error("sampling step must be positive")]
    BadStep,
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("every sample along the profile is nodata")]
    AllMissing,
    #[error("knife-edge test requires an obstructed profile")]
    ProfileVisible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerrainProfile {
    pub total_km: f64,
    /// `(along_km, ground_m)`, sorted, first at 0 and last at `total_km`.
    pub samples: Vec<(f64, f64)>,
}

impl TerrainProfile {
    /// Evenly spaced profile from ground heights.
    pub fn from_heights(total_km: f64, heights: &[f64]) -> Self {
        assert!(heights.len() >= 2, "a profile needs at least two samples");
        let n = heights.len() - 1;
        let samples = heights
            .iter()
            .enumerate()
            .map(|(i, h)| (if i == n { total_km } else { total_km * i as f64 / n as f64 }, *h))
            .collect();
        Self { total_km, samples }
    }

    pub fn ground_a(&self) -> f64 {
        self.samples[0].1
    }

    pub fn ground_b(&self) -> f64 {
        self.samples[self.samples.len() - 1].1
    }

    /// The same terrain walked from `b` to `a`.
    pub fn reversed(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|(d, h)| (self.total_km - d, *h))
            .collect();
        Self {
            total_km: self.total_km,
            samples,
        }
    }
}

/// Samples `dem` every `step_m` from `a` to `b`, both ends included.
///
/// When the length is not a multiple of the step the spacing shrinks
/// slightly so that samples stay even. Nodata samples copy the nearest
/// valid sample along the profile.
pub fn extract_profile(
    dem: &RasterGrid,
    a: Point,
    b: Point,
    step_m: f64,
) -> Result<TerrainProfile, ViewshedError> {
    if !(step_m > 0.0) {
        return Err(ViewshedError::BadStep);
    }
    let length_m = a.distance_m(&b);
    if length_m == 0.0 {
        return Err(ViewshedError::DegenerateSegment);
    }
    let header = dem.header();
    for p in [a, b] {
        if !header.contains(p) {
            return Err(RasterError::OutOfBounds { x: p.x, y: p.y }.into());
        }
    }
    let segments = (libm::ceil(length_m / step_m - 1e-9) as usize).max(1);
    let mut raw: Vec<Option<f64>> = Vec::with_capacity(segments + 1);
    for i in 0..=segments {
        let t = i as f64 / segments as f64;
        raw.push(dem.sample_at(a.lerp(&b, t))?);
    }
    let filled = fill_nearest(&raw).ok_or(ViewshedError::AllMissing)?;
    let total_km = length_m / 1000.0;
    Ok(TerrainProfile::from_heights(total_km, &filled))
}

// Ties prefer the earlier sample.
fn fill_nearest(raw: &[Option<f64>]) -> Option<Vec<f64>> {
    let n = raw.len();
    let mut prev: Vec<Option<usize>> = Vec::with_capacity(n);
    let mut last = None;
    for (i, v) in raw.iter().enumerate() {
        if v.is_some() {
            last = Some(i);
        }
        prev.push(last);
    }
    let mut next: Vec<Option<usize>> = alloc::vec![None; n];
    let mut upcoming = None;
    for i in (0..n).rev() {
        if raw[i].is_some() {
            upcoming = Some(i);
        }
        next[i] = upcoming;
    }
    (0..n)
        .map(|i| {
            let src = match (prev[i], next[i]) {
                (Some(p), Some(q)) => {
                    if i - p <= q - i {
                        p
                    } else {
                        q
                    }
                }
                (Some(p), None) => p,
                (None, Some(q)) => q,
                (None, None) => return None,
            };
            raw[src]
        })
        .collect()
}

/// Curvature bulge in metres at `d1_km` / `d2_km` from the two ends.
pub fn earth_bulge_m(d1_km: f64, d2_km: f64) -> f64 {
    d1_km * d2_km / (2.0 * EFFECTIVE_EARTH_RADIUS_KM) * 1000.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LosOptions {
    pub curvature: bool,
    /// Strict mode: require 60% of the first Fresnel zone at this carrier
    /// frequency (GHz) to be clear as well.
    pub fresnel_ghz: Option<f64>,
}

impl LosOptions {
    pub fn geometric(curvature: bool) -> Self {
        Self {
            curvature,
            fresnel_ghz: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LosResult {
    pub visible: bool,
    pub max_intrusion_m: f64,
    pub intrusion_at_km: f64,
}

/// Per-sample clearance: sight-line height minus effective terrain.
/// Negative values obstruct. Endpoints are not tested.
fn clearances<'a>(
    profile: &'a TerrainProfile,
    h_a: f64,
    h_b: f64,
    opts: &'a LosOptions,
) -> impl Iterator<Item = (usize, f64, f64)> + 'a {
    let d = profile.total_km;
    let za = profile.ground_a() + h_a;
    let zb = profile.ground_b() + h_b;
    let n = profile.samples.len();
    profile.samples[1..n - 1].iter().enumerate().map(move |(k, &(x, g))| {
        let line = za + (zb - za) * (x / d);
        let mut terrain = g;
        if opts.curvature {
            terrain += earth_bulge_m(x, d - x);
        }
        let mut clear = line - terrain;
        if let Some(f) = opts.fresnel_ghz {
            clear -= 0.6 * fresnel_radius_at(&LinkGeometry::new(d, f), x);
        }
        (k + 1, x, clear)
    })
}

/// Geometric visibility between antennas `h_a_m` / `h_b_m` above the
/// profile ends. Terrain that exactly grazes the sight line does not
/// obstruct it.
pub fn line_of_sight(profile: &TerrainProfile, h_a_m: f64, h_b_m: f64, curvature: bool) -> LosResult {
    line_of_sight_with(profile, h_a_m, h_b_m, &LosOptions::geometric(curvature))
}

pub fn line_of_sight_with(profile: &TerrainProfile, h_a_m: f64, h_b_m: f64, opts: &LosOptions) -> LosResult {
    let mut worst = 0.0;
    let mut at = 0.0;
    for (_, x, clear) in clearances(profile, h_a_m, h_b_m, opts) {
        if -clear > worst {
            worst = -clear;
            at = x;
        }
    }
    LosResult {
        visible: worst == 0.0,
        max_intrusion_m: worst,
        intrusion_at_km: at,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstructionCluster {
    pub start_km: f64,
    pub end_km: f64,
    pub peak_km: f64,
    pub peak_intrusion_m: f64,
    /// Sample index of the peak.
    pub peak_index: usize,
}

/// Runs of obstructing samples; runs separated by fewer than `min_gap`
/// clear samples are merged.
pub fn obstruction_clusters(
    profile: &TerrainProfile,
    h_a_m: f64,
    h_b_m: f64,
    curvature: bool,
) -> Vec<ObstructionCluster> {
    obstruction_clusters_with(profile, h_a_m, h_b_m, &LosOptions::geometric(curvature), DEFAULT_CLUSTER_GAP)
}

pub fn obstruction_clusters_with(
    profile: &TerrainProfile,
    h_a_m: f64,
    h_b_m: f64,
    opts: &LosOptions,
    min_gap: usize,
) -> Vec<ObstructionCluster> {
    let mut clusters: Vec<ObstructionCluster> = Vec::new();
    let mut last_hit: Option<usize> = None;
    for (i, x, clear) in clearances(profile, h_a_m, h_b_m, opts) {
        if clear >= 0.0 {
            continue;
        }
        let intrusion = -clear;
        let merge = match (last_hit, clusters.last()) {
            (Some(prev), Some(_)) => i - prev - 1 < min_gap,
            _ => false,
        };
        if merge {
            let c = clusters.last_mut().expect("cluster exists");
            c.end_km = x;
            if intrusion > c.peak_intrusion_m {
                c.peak_intrusion_m = intrusion;
                c.peak_km = x;
                c.peak_index = i;
            }
        } else {
            clusters.push(ObstructionCluster {
                start_km: x,
                end_km: x,
                peak_km: x,
                peak_intrusion_m: intrusion,
                peak_index: i,
            });
        }
        last_hit = Some(i);
    }
    clusters
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnifeEdge {
    pub eligible: bool,
    /// The single obstruction, when there is exactly one.
    pub peak: Option<ObstructionCluster>,
    pub deviation_deg: Option<f64>,
    pub clusters: usize,
}

/// Bend angle at `peak` between the rays from `a` and towards `b`, in
/// degrees. Points are `(along_m, height_m)`.
pub fn deviation_angle_deg(a: (f64, f64), peak: (f64, f64), b: (f64, f64)) -> f64 {
    let u = (peak.0 - a.0, peak.1 - a.1);
    let v = (b.0 - peak.0, b.1 - peak.1);
    let cross = u.0 * v.1 - u.1 * v.0;
    let dot = u.0 * v.0 + u.1 * v.1;
    libm::atan2(cross.abs(), dot).to_degrees()
}

/// Whether an obstructed path can be closed by a single shallow
/// diffraction over one obstacle.
pub fn knife_edge_eligible(
    profile: &TerrainProfile,
    h_a_m: f64,
    h_b_m: f64,
    margins: &NlosMargins,
    curvature: bool,
) -> Result<KnifeEdge, ViewshedError> {
    let clusters = obstruction_clusters(profile, h_a_m, h_b_m, curvature);
    if clusters.is_empty() {
        return Err(ViewshedError::ProfileVisible);
    }
    if clusters.len() != 1 {
        return Ok(KnifeEdge {
            eligible: false,
            peak: None,
            deviation_deg: None,
            clusters: clusters.len(),
        });
    }
    let peak = clusters[0];
    let (x, g) = profile.samples[peak.peak_index];
    let d = profile.total_km;
    let top = if curvature { g + earth_bulge_m(x, d - x) } else { g };
    let a = (0.0, profile.ground_a() + h_a_m);
    let b = (d * 1000.0, profile.ground_b() + h_b_m);
    let deviation = deviation_angle_deg(a, (x * 1000.0, top), b);
    Ok(KnifeEdge {
        eligible: deviation <= margins.max_deviation_deg,
        peak: Some(peak),
        deviation_deg: Some(deviation),
        clusters: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{GridHeader, LayerKind};
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn flat(n: usize, km: f64, h: f64) -> TerrainProfile {
        TerrainProfile::from_heights(km, &vec![h; n])
    }

    fn with_bump(n: usize, km: f64, at: usize, h: f64) -> TerrainProfile {
        let mut heights = vec![0.0; n];
        heights[at] = h;
        TerrainProfile::from_heights(km, &heights)
    }

    fn dem(ncols: usize, nrows: usize, cs: f64, f: impl FnMut(Point) -> f64) -> RasterGrid {
        let h = GridHeader {
            ncols,
            nrows,
            xll: 0.0,
            yll: 0.0,
            cellsize: cs,
            nodata: -9999.0,
        };
        RasterGrid::from_fn(h, LayerKind::Elevation, f).unwrap()
    }

    #[test]
    fn flat_profile_sample_count() {
        let g = dem(20, 20, 100.0, |_| 100.0);
        let p = extract_profile(&g, Point::new(0.0, 50.0), Point::new(1000.0, 50.0), 100.0).unwrap();
        assert_eq!(p.samples.len(), 11);
        assert!(p.samples.iter().all(|s| s.1 == 100.0));
        assert_eq!(p.total_km, 1.0);
    }

    #[test]
    fn ramp_profile() {
        // cell value = left edge x / 10
        let g = dem(101, 2, 10.0, |c| (c.x - 5.0) / 10.0);
        let p = extract_profile(&g, Point::new(0.0, 0.0), Point::new(1000.0, 0.0), 500.0).unwrap();
        assert_eq!(p.samples, vec![(0.0, 0.0), (0.5, 50.0), (1.0, 100.0)]);
    }

    #[test]
    fn profile_errors() {
        let g = dem(10, 10, 100.0, |_| 0.0);
        let a = Point::new(10.0, 10.0);
        assert_eq!(extract_profile(&g, a, a, 100.0), Err(ViewshedError::DegenerateSegment));
        assert!(matches!(
            extract_profile(&g, a, Point::new(5000.0, 10.0), 100.0),
            Err(ViewshedError::Raster(RasterError::OutOfBounds { .. }))
        ));
        assert_eq!(
            extract_profile(&g, a, Point::new(500.0, 10.0), 0.0),
            Err(ViewshedError::BadStep)
        );
    }

    #[test]
    fn nodata_takes_nearest_neighbour() {
        let h = GridHeader {
            ncols: 5,
            nrows: 1,
            xll: 0.0,
            yll: 0.0,
            cellsize: 1.0,
            nodata: -9999.0,
        };
        let g = RasterGrid::new(h, LayerKind::Elevation, vec![1.0, -9999.0, -9999.0, -9999.0, 5.0]).unwrap();
        let p = extract_profile(&g, Point::new(0.5, 0.5), Point::new(4.5, 0.5), 1.0).unwrap();
        let hs: Vec<f64> = p.samples.iter().map(|s| s.1).collect();
        assert_eq!(hs, vec![1.0, 1.0, 1.0, 5.0, 5.0]);

        let empty = RasterGrid::new(h, LayerKind::Elevation, vec![-9999.0; 5]).unwrap();
        assert_eq!(
            extract_profile(&empty, Point::new(0.5, 0.5), Point::new(4.5, 0.5), 1.0),
            Err(ViewshedError::AllMissing)
        );
    }

    #[test]
    fn flat_is_visible_without_curvature() {
        let r = line_of_sight(&flat(50, 30.0, 0.0), 30.0, 30.0, false);
        assert!(r.visible);
        assert_eq!(r.max_intrusion_m, 0.0);
    }

    #[test]
    fn mid_bump_blocks() {
        let p = with_bump(11, 10.0, 5, 100.0);
        let r = line_of_sight(&p, 30.0, 30.0, false);
        assert!(!r.visible);
        assert_abs_diff_eq!(r.max_intrusion_m, 70.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.intrusion_at_km, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn curvature_bulge_on_long_flat_path() {
        assert_abs_diff_eq!(earth_bulge_m(22.5, 22.5), 29.798109, epsilon = 1e-6);
        // towers of 29 m sit below the mid-path bulge
        let p = flat(91, 45.0, 0.0);
        let blocked = line_of_sight(&p, 29.0, 29.0, true);
        assert!(!blocked.visible);
        assert_abs_diff_eq!(blocked.max_intrusion_m, 29.798109 - 29.0, epsilon = 1e-6);
        assert!(line_of_sight(&p, 30.0, 30.0, true).visible);
        assert!(line_of_sight(&p, 29.0, 29.0, false).visible);
    }

    #[test]
    fn strict_fresnel_mode_is_stricter() {
        // 5 m of clearance at mid-path, 10 km at 18 GHz needs 0.6 * 6.45 m
        let p = with_bump(11, 10.0, 5, 25.0);
        assert!(line_of_sight(&p, 30.0, 30.0, false).visible);
        let strict = LosOptions {
            curvature: false,
            fresnel_ghz: Some(18.0),
        };
        assert!(line_of_sight_with(&p, 30.0, 30.0, &strict).visible);
        let p = with_bump(11, 10.0, 5, 27.0);
        assert!(line_of_sight(&p, 30.0, 30.0, false).visible);
        assert!(!line_of_sight_with(&p, 30.0, 30.0, &strict).visible);
    }

    #[test]
    fn clusters() {
        assert!(obstruction_clusters(&flat(20, 5.0, 0.0), 30.0, 30.0, false).is_empty());

        let one = obstruction_clusters(&with_bump(21, 10.0, 10, 100.0), 30.0, 30.0, false);
        assert_eq!(one.len(), 1);
        assert_abs_diff_eq!(one[0].peak_km, 5.0, epsilon = 1e-12);

        // peaks at 5 and 9 with three clear samples between them
        let mut h = vec![0.0; 21];
        h[5] = 100.0;
        h[9] = 80.0;
        let two = obstruction_clusters(&TerrainProfile::from_heights(10.0, &h), 30.0, 30.0, false);
        assert_eq!(two.len(), 2);
        assert!(two[0].peak_intrusion_m > two[1].peak_intrusion_m);

        // a single clear sample between hits does not split the cluster
        h[9] = 0.0;
        h[7] = 80.0;
        let merged = obstruction_clusters(&TerrainProfile::from_heights(10.0, &h), 30.0, 30.0, false);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].start_km, 2.5);
        assert_eq!(merged[0].end_km, 3.5);
        assert_eq!(merged[0].peak_km, 2.5);
    }

    #[test]
    fn knife_edge_shallow_vs_sharp() {
        let m = NlosMargins::default();
        // 1 m above the sight line at the midpoint of 10 km
        let shallow = knife_edge_eligible(&with_bump(101, 10.0, 50, 31.0), 30.0, 30.0, &m, false).unwrap();
        assert!(shallow.eligible);
        assert_abs_diff_eq!(shallow.deviation_deg.unwrap(), 0.022918, epsilon = 1e-6);

        let sharp = knife_edge_eligible(&with_bump(101, 10.0, 50, 630.0), 30.0, 30.0, &m, false).unwrap();
        assert!(!sharp.eligible);
        assert_abs_diff_eq!(sharp.deviation_deg.unwrap(), 13.685547, epsilon = 1e-6);

        let mut h = vec![0.0; 101];
        h[20] = 31.0;
        h[80] = 31.0;
        let twin = knife_edge_eligible(&TerrainProfile::from_heights(10.0, &h), 30.0, 30.0, &m, false).unwrap();
        assert!(!twin.eligible);
        assert_eq!(twin.clusters, 2);

        assert_eq!(
            knife_edge_eligible(&flat(10, 5.0, 0.0), 30.0, 30.0, &m, false),
            Err(ViewshedError::ProfileVisible)
        );
    }

    #[test]
    fn deviation_is_zero_on_straight_line() {
        assert_abs_diff_eq!(deviation_angle_deg((0.0, 0.0), (5.0, 5.0), (10.0, 10.0)), 0.0, epsilon = 1e-9);
    }

    fn profile_strategy() -> impl Strategy<Value = (TerrainProfile, f64, f64)> {
        (
            prop::collection::vec(0.0f64..300.0, 64),
            1.0f64..40.0,
            0.0f64..120.0,
            0.0f64..120.0,
        )
            .prop_map(|(h, km, ha, hb)| (TerrainProfile::from_heights(km, &h), ha, hb))
    }

    proptest! {
        #[test]
        fn reversal_symmetry((p, ha, hb) in profile_strategy(), curv in any::<bool>()) {
            let fwd = line_of_sight(&p, ha, hb, curv);
            let back = line_of_sight(&p.reversed(), hb, ha, curv);
            prop_assert_eq!(fwd.visible, back.visible);
        }

        #[test]
        fn raising_towers_keeps_visibility((p, ha, hb) in profile_strategy(), dh in 0.0f64..50.0, curv in any::<bool>()) {
            if line_of_sight(&p, ha, hb, curv).visible {
                prop_assert!(line_of_sight(&p, ha + dh, hb + dh, curv).visible);
            }
        }

        #[test]
        fn flat_equal_towers_always_visible(km in 0.1f64..500.0, h in 0.1f64..100.0, g in -100.0f64..5000.0) {
            prop_assert!(line_of_sight(&flat(64, km, g), h, h, false).visible);
        }

        #[test]
        fn worst_cluster_peak_is_max_intrusion((p, ha, hb) in profile_strategy(), curv in any::<bool>()) {
            let los = line_of_sight(&p, ha, hb, curv);
            let clusters = obstruction_clusters(&p, ha, hb, curv);
            prop_assert_eq!(clusters.is_empty(), los.visible);
            if let Some(worst) = clusters.iter().map(|c| c.peak_intrusion_m).reduce(f64::max) {
                prop_assert_eq!(worst, los.max_intrusion_m);
            }
            for c in &clusters {
                prop_assert!(c.start_km <= c.peak_km && c.peak_km <= c.end_km);
                prop_assert!(c.peak_intrusion_m > 0.0);
            }
        }
    }
}
