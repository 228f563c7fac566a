//! Microwave link budget and the distance / frequency planning rules.
//!
//! All powers are in dBm, gains and losses in dB, distances in km and
//! frequencies in GHz.

use core::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("{mode} link of {distance_km} km exceeds the {max_km} km maximum")]
    Infeasible {
        mode: LinkMode,
        distance_km: f64,
        max_km: f64,
    },
    #[error("link distance {0} km is not positive")]
    NonPositiveDistance(f64),
    #[error("no clearance bucket for {0} GHz")]
    FrequencyBucket(f64),
}

/// Transmit / receive chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadioParams {
    pub power_dbm: f64,
    pub tx_gain_db: f64,
    pub tx_loss_db: f64,
    pub rx_gain_db: f64,
    pub rx_loss_db: f64,
}

impl RadioParams {
    /// 20 W transmitter, 20 dB antennas with 4 dB losses at both ends.
    pub fn reference() -> Self {
        Self {
            power_dbm: watts_to_dbm(20.0),
            tx_gain_db: 20.0,
            tx_loss_db: 4.0,
            rx_gain_db: 20.0,
            rx_loss_db: 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkGeometry {
    pub distance_km: f64,
    pub frequency_ghz: f64,
}

impl LinkGeometry {
    pub fn new(distance_km: f64, frequency_ghz: f64) -> Self {
        debug_assert!(distance_km > 0.0 && frequency_ghz > 0.0);
        Self {
            distance_km,
            frequency_ghz,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RainClass {
    Low,
    Moderate,
    High,
}

impl RainClass {
    pub fn name(&self) -> &'static str {
        match self {
            RainClass::Low => "low",
            RainClass::Moderate => "moderate",
            RainClass::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Some(RainClass::Low),
            "moderate" => Some(RainClass::Moderate),
            "high" => Some(RainClass::High),
            _ => None,
        }
    }

    /// The more restrictive of two classes.
    pub fn worst(self, other: RainClass) -> RainClass {
        self.max(other)
    }
}

impl fmt::Display for RainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkMode {
    Clos,
    Nlos,
}

impl LinkMode {
    pub fn name(&self) -> &'static str {
        match self {
            LinkMode::Clos => "clos",
            LinkMode::Nlos => "nlos",
        }
    }
}

impl fmt::Display for LinkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Allowances for a diffractive NLOS hop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NlosMargins {
    pub diffraction_loss_db: f64,
    pub planning_margin_db: f64,
    pub max_deviation_deg: f64,
}

pub const MAX_DIFFRACTION_LOSS_DB: f64 = 25.0;

impl Default for NlosMargins {
    fn default() -> Self {
        Self {
            diffraction_loss_db: MAX_DIFFRACTION_LOSS_DB,
            planning_margin_db: 10.0,
            max_deviation_deg: 3.0,
        }
    }
}

impl NlosMargins {
    pub fn is_valid(&self) -> bool {
        self.diffraction_loss_db <= MAX_DIFFRACTION_LOSS_DB
            && self.diffraction_loss_db >= 0.0
            && self.planning_margin_db >= 0.0
            && self.max_deviation_deg >= 0.0
    }

    pub fn extra_loss_db(&self) -> f64 {
        self.diffraction_loss_db + self.planning_margin_db
    }
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * libm::log10(watts * 1000.0)
}

pub fn eirp(radio: &RadioParams) -> f64 {
    radio.power_dbm + radio.tx_gain_db - radio.tx_loss_db
}

/// Free-space path loss in dB.
pub fn fspl(geom: &LinkGeometry) -> f64 {
    20.0 * libm::log10(geom.distance_km) + 20.0 * libm::log10(geom.frequency_ghz) + 32.44
}

pub fn received_power(radio: &RadioParams, geom: &LinkGeometry, extra_loss_db: f64) -> f64 {
    eirp(radio) - fspl(geom) + radio.rx_gain_db - radio.rx_loss_db - extra_loss_db
}

pub const CLOS_THRESHOLD_DBM: f64 = -55.0;

/// Inclusive at the threshold.
pub fn clos_viable(rp_dbm: f64, threshold_dbm: f64) -> bool {
    rp_dbm >= threshold_dbm
}

/// Radius of the first Fresnel zone at mid-path, metres.
pub fn fresnel_max_radius(geom: &LinkGeometry) -> f64 {
    8.66 * libm::sqrt(geom.distance_km / geom.frequency_ghz)
}

/// First Fresnel zone radius at `d1_km` from one end, metres.
pub fn fresnel_radius_at(geom: &LinkGeometry, d1_km: f64) -> f64 {
    let d = geom.distance_km;
    let d1 = d1_km.clamp(0.0, d);
    let d2 = d - d1;
    17.31 * libm::sqrt(d1 * d2 / (geom.frequency_ghz * d))
}

pub const CLOS_MAX_KM: f64 = 45.0;
pub const NLOS_MAX_KM: f64 = 15.0;

/// Carrier frequency by link length.
pub fn assign_frequency(distance_km: f64, mode: LinkMode) -> Result<f64, LinkError> {
    if !(distance_km > 0.0) {
        return Err(LinkError::NonPositiveDistance(distance_km));
    }
    let (max_km, near, mid) = match mode {
        LinkMode::Clos => (CLOS_MAX_KM, 10.0, 25.0),
        LinkMode::Nlos => (NLOS_MAX_KM, 5.0, 10.0),
    };
    if distance_km > max_km {
        return Err(LinkError::Infeasible {
            mode,
            distance_km,
            max_km,
        });
    }
    Ok(if distance_km < near {
        18.0
    } else if distance_km < mid {
        15.0
    } else {
        8.0
    })
}

/// Longest single hop permitted in a rain region.
pub fn max_link_distance(rain: RainClass, mode: LinkMode) -> f64 {
    match (mode, rain) {
        (LinkMode::Clos, RainClass::High) => 15.0,
        (LinkMode::Clos, RainClass::Moderate) => 30.0,
        (LinkMode::Clos, RainClass::Low) => 45.0,
        (LinkMode::Nlos, RainClass::High) => 5.0,
        (LinkMode::Nlos, RainClass::Moderate) => 10.0,
        (LinkMode::Nlos, RainClass::Low) => 15.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Confidence {
    P50,
    P90,
    P99,
}

impl Confidence {
    pub const ALL: [Confidence; 3] = [Confidence::P50, Confidence::P90, Confidence::P99];

    pub fn name(&self) -> &'static str {
        match self {
            Confidence::P50 => "p50",
            Confidence::P90 => "p90",
            Confidence::P99 => "p99",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p50" | "50" => Some(Confidence::P50),
            "p90" | "90" => Some(Confidence::P90),
            "p99" | "99" => Some(Confidence::P99),
            _ => None,
        }
    }

    fn column(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Distance buckets of the clearance table, half-open except the last.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceBucket {
    pub lo_km: f64,
    pub hi_km: f64,
}

/// Frequency buckets of the clearance table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyBucket {
    pub lo_ghz: f64,
    pub hi_ghz: f64,
}

pub const CLEARANCE_DISTANCE_BUCKETS: [DistanceBucket; 3] = [
    DistanceBucket { lo_km: 0.0, hi_km: 10.0 },
    DistanceBucket { lo_km: 10.0, hi_km: 25.0 },
    DistanceBucket { lo_km: 25.0, hi_km: 45.0 },
];

pub const CLEARANCE_FREQUENCY_BUCKETS: [FrequencyBucket; 3] = [
    FrequencyBucket { lo_ghz: 6.0, hi_ghz: 8.0 },
    FrequencyBucket { lo_ghz: 11.0, hi_ghz: 15.0 },
    FrequencyBucket { lo_ghz: 15.0, hi_ghz: 18.0 },
];

/// Fresnel clearance above ground in metres, indexed
/// `[distance bucket][frequency bucket][p50, p90, p99]`.
pub const FRESNEL_CLEARANCE_M: [[[f64; 3]; 3]; 3] = [
    [[6.7, 9.4, 10.4], [6.1, 7.5, 8.1], [4.7, 6.6, 6.9]],
    [[13.2, 15.7, 17.0], [10.1, 11.9, 12.6], [9.0, 10.2, 11.0]],
    [[18.7, 21.0, 22.4], [14.2, 16.1, 17.3], [12.1, 13.3, 14.3]],
];

fn distance_bucket(distance_km: f64) -> Result<usize, LinkError> {
    if !(distance_km > 0.0) {
        return Err(LinkError::NonPositiveDistance(distance_km));
    }
    if distance_km > CLOS_MAX_KM {
        return Err(LinkError::Infeasible {
            mode: LinkMode::Clos,
            distance_km,
            max_km: CLOS_MAX_KM,
        });
    }
    Ok(CLEARANCE_DISTANCE_BUCKETS
        .iter()
        .position(|b| distance_km < b.hi_km)
        .unwrap_or(CLEARANCE_DISTANCE_BUCKETS.len() - 1))
}

// The 11-15 and 15-18 buckets share 15 GHz; it belongs to the middle one,
// which is where the planner's 15 GHz band sits.
fn frequency_bucket(frequency_ghz: f64) -> Result<usize, LinkError> {
    let f = frequency_ghz;
    if (6.0..=8.0).contains(&f) {
        Ok(0)
    } else if (11.0..=15.0).contains(&f) {
        Ok(1)
    } else if f > 15.0 && f <= 18.0 {
        Ok(2)
    } else {
        Err(LinkError::FrequencyBucket(f))
    }
}

pub fn fresnel_clearance_lookup(
    distance_km: f64,
    frequency_ghz: f64,
    confidence: Confidence,
) -> Result<f64, LinkError> {
    let d = distance_bucket(distance_km)?;
    let f = frequency_bucket(frequency_ghz)?;
    Ok(FRESNEL_CLEARANCE_M[d][f][confidence.column()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn radio(p: f64, gt: f64, lt: f64) -> RadioParams {
        RadioParams {
            power_dbm: p,
            tx_gain_db: gt,
            tx_loss_db: lt,
            rx_gain_db: 0.0,
            rx_loss_db: 0.0,
        }
    }

    #[test]
    fn eirp_examples() {
        assert_abs_diff_eq!(watts_to_dbm(20.0), 43.0103, epsilon = 1e-4);
        assert_abs_diff_eq!(eirp(&RadioParams::reference()), 59.0103, epsilon = 1e-4);
        assert_eq!(eirp(&radio(0.0, 0.0, 0.0)), 0.0);
        assert_eq!(eirp(&radio(30.0, 10.0, 10.0)), 30.0);
    }

    #[test]
    fn fspl_examples() {
        assert_eq!(fspl(&LinkGeometry::new(1.0, 1.0)), 32.44);
        assert_abs_diff_eq!(fspl(&LinkGeometry::new(10.0, 18.0)), 77.545450, epsilon = 1e-6);
        assert_abs_diff_eq!(fspl(&LinkGeometry::new(45.0, 8.0)), 83.566050, epsilon = 1e-6);
    }

    #[test]
    fn received_power_examples() {
        let r = RadioParams::reference();
        let g = LinkGeometry::new(10.0, 18.0);
        assert_abs_diff_eq!(received_power(&r, &g, 0.0), -2.535150, epsilon = 1e-6);
        let m = NlosMargins::default();
        assert_eq!(m.extra_loss_db(), 35.0);
        assert_abs_diff_eq!(received_power(&r, &g, m.extra_loss_db()), -37.535150, epsilon = 1e-6);

        let flat = RadioParams {
            power_dbm: 32.44,
            tx_gain_db: 0.0,
            tx_loss_db: 0.0,
            rx_gain_db: 0.0,
            rx_loss_db: 0.0,
        };
        assert_eq!(received_power(&flat, &LinkGeometry::new(1.0, 1.0), 0.0), 0.0);
    }

    #[test]
    fn viability_threshold_inclusive() {
        assert!(clos_viable(-2.54, CLOS_THRESHOLD_DBM));
        assert!(clos_viable(-55.0, CLOS_THRESHOLD_DBM));
        assert!(!clos_viable(-60.0, CLOS_THRESHOLD_DBM));
    }

    #[test]
    fn fresnel_examples() {
        assert_eq!(fresnel_max_radius(&LinkGeometry::new(8.0, 8.0)), 8.66);
        assert_abs_diff_eq!(fresnel_max_radius(&LinkGeometry::new(10.0, 18.0)), 6.454783, epsilon = 1e-6);
        assert_abs_diff_eq!(fresnel_max_radius(&LinkGeometry::new(45.0, 8.0)), 20.538993, epsilon = 1e-6);

        let g = LinkGeometry::new(10.0, 18.0);
        assert_eq!(fresnel_radius_at(&g, 0.0), 0.0);
        assert_eq!(fresnel_radius_at(&g, 10.0), 0.0);
        assert_abs_diff_eq!(fresnel_radius_at(&g, 5.0), 6.451056, epsilon = 1e-6);
        assert_abs_diff_eq!(fresnel_radius_at(&g, 2.5), 5.586778, epsilon = 1e-6);
    }

    #[test]
    fn nlos_margins_validation() {
        assert!(NlosMargins::default().is_valid());
        let too_lossy = NlosMargins {
            diffraction_loss_db: 30.0,
            ..NlosMargins::default()
        };
        assert!(!too_lossy.is_valid());
    }

    #[test]
    fn frequency_truth_table() {
        use LinkMode::*;
        let cases = [
            (0.5, Clos, 18.0),
            (7.0, Clos, 18.0),
            (9.999, Clos, 18.0),
            (10.0, Clos, 15.0),
            (24.9, Clos, 15.0),
            (25.0, Clos, 8.0),
            (30.0, Clos, 8.0),
            (45.0, Clos, 8.0),
            (4.9, Nlos, 18.0),
            (5.0, Nlos, 15.0),
            (9.9, Nlos, 15.0),
            (10.0, Nlos, 8.0),
            (12.0, Nlos, 8.0),
            (15.0, Nlos, 8.0),
        ];
        for (d, mode, f) in cases {
            assert_eq!(assign_frequency(d, mode).unwrap(), f, "{d} km {mode}");
        }
        assert!(matches!(assign_frequency(45.1, Clos), Err(LinkError::Infeasible { .. })));
        assert!(matches!(assign_frequency(15.1, Nlos), Err(LinkError::Infeasible { .. })));
        assert!(assign_frequency(0.0, Clos).is_err());
    }

    #[test]
    fn rain_cap_truth_table() {
        use LinkMode::*;
        use RainClass::*;
        let cases = [
            (High, Clos, 15.0),
            (Moderate, Clos, 30.0),
            (Low, Clos, 45.0),
            (High, Nlos, 5.0),
            (Moderate, Nlos, 10.0),
            (Low, Nlos, 15.0),
        ];
        for (rain, mode, km) in cases {
            assert_eq!(max_link_distance(rain, mode), km);
        }
    }

    #[test]
    fn rain_worst_and_parse() {
        assert_eq!(RainClass::Low.worst(RainClass::High), RainClass::High);
        assert_eq!(RainClass::Moderate.worst(RainClass::Low), RainClass::Moderate);
        assert_eq!(RainClass::parse(" High "), Some(RainClass::High));
        assert_eq!(RainClass::parse("dry"), None);
    }

    #[test]
    fn clearance_table_cells() {
        use Confidence::*;
        assert_eq!(fresnel_clearance_lookup(8.0, 8.0, P90).unwrap(), 9.4);
        assert_eq!(fresnel_clearance_lookup(12.0, 15.0, P50).unwrap(), 10.1);
        assert_eq!(fresnel_clearance_lookup(30.0, 18.0, P99).unwrap(), 14.3);
        assert_eq!(fresnel_clearance_lookup(45.0, 8.0, P50).unwrap(), 18.7);
        assert_eq!(fresnel_clearance_lookup(10.0, 18.0, P50).unwrap(), 9.0);
        assert!(matches!(
            fresnel_clearance_lookup(5.0, 24.0, P50),
            Err(LinkError::FrequencyBucket(_))
        ));
        assert!(fresnel_clearance_lookup(5.0, 9.5, P50).is_err());
        assert!(fresnel_clearance_lookup(46.0, 8.0, P50).is_err());
    }

    proptest! {
        #[test]
        fn midpoint_radius_matches_max(d in 0.1f64..45.0, f in 1.0f64..40.0) {
            let g = LinkGeometry::new(d, f);
            let rel = (fresnel_radius_at(&g, d / 2.0) - fresnel_max_radius(&g)).abs()
                / fresnel_max_radius(&g);
            prop_assert!(rel < 1e-3);
        }

        #[test]
        fn received_power_decreasing(d in 0.1f64..44.0, f in 1.0f64..39.0, dd in 0.01f64..1.0) {
            let r = RadioParams::reference();
            let base = received_power(&r, &LinkGeometry::new(d, f), 0.0);
            prop_assert!(received_power(&r, &LinkGeometry::new(d + dd, f), 0.0) < base);
            prop_assert!(received_power(&r, &LinkGeometry::new(d, f + dd), 0.0) < base);
        }

        #[test]
        fn fresnel_radius_monotone(d in 0.1f64..44.0, f in 1.0f64..39.0, dd in 0.01f64..1.0) {
            let base = fresnel_max_radius(&LinkGeometry::new(d, f));
            prop_assert!(fresnel_max_radius(&LinkGeometry::new(d + dd, f)) > base);
            prop_assert!(fresnel_max_radius(&LinkGeometry::new(d, f + dd)) < base);
        }
    }
}
