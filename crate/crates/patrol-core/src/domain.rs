//! Core spatial and temporal types shared by the whole pipeline: grid cells,
//! officers, emergency calls, the node reward function and the two lookup
//! tables (call-type priority, arrival-time benefit multiplier), plus
//! great-circle travel time.

use thiserror::Error;

/// Mean Earth radius in meters, used by the haversine distance.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Length of one prediction/planning slot in minutes (2 hours).
pub const SLOT_MINUTES: i64 = 120;

/// Number of 2-hour slots in a day.
pub const SLOTS_PER_DAY: u8 = 12;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("officer speed must be positive, got {0} m/s")]
    NonPositiveSpeed(f64),
    #[error("bounding box is degenerate: {0}")]
    DegenerateBbox(String),
}

/// A WGS-84 coordinate pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// Identifier of a grid cell (patrol node).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifier of a police officer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OfficerId(pub u32);

impl std::fmt::Display for OfficerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Predicted or live state of a node within one 2-hour slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeState {
    Coldspot,
    Hotspot,
    Emergency,
}

impl NodeState {
    /// Crime-arrival exponent of the node reward: 0, 2 or 4.
    pub fn risk_lambda(self) -> f64 {
        match self {
            NodeState::Coldspot => 0.0,
            NodeState::Hotspot => 2.0,
            NodeState::Emergency => 4.0,
        }
    }
}

/// One grid cell with the attributes the reward function needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PatrolNode {
    pub id: NodeId,
    pub centroid: LatLon,
    pub state: NodeState,
    /// Importance `w`: crime density at this node and slot over the previous
    /// 3 days (crimes per day).
    pub importance_w: f64,
    /// Priority 1-5; always 1 for non-emergency nodes.
    pub priority_p: u8,
    /// Minutes an officer stays when visiting.
    pub stay_time_min: f64,
}

impl PatrolNode {
    /// Patrol reward of this node: `exp(w) * p * exp(lambda)`.
    pub fn benefit(&self) -> f64 {
        benefit(self.importance_w, self.priority_p, self.state.risk_lambda())
    }
}

/// Node reward `exp(w) * p * exp(lambda)`.
pub fn benefit(importance_w: f64, priority_p: u8, risk_lambda: f64) -> f64 {
    importance_w.exp() * f64::from(priority_p) * risk_lambda.exp()
}

/// Rectangular lat/lon extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BBox {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self, DomainError> {
        if !(min_lat < max_lat && min_lon < max_lon)
            || !min_lat.is_finite()
            || !min_lon.is_finite()
            || !max_lat.is_finite()
            || !max_lon.is_finite()
        {
            return Err(DomainError::DegenerateBbox(format!(
                "[{min_lat}, {min_lon}] .. [{max_lat}, {max_lon}]"
            )));
        }
        Ok(Self { min_lat, min_lon, max_lat, max_lon })
    }

    pub fn contains(&self, p: LatLon) -> bool {
        p.lat >= self.min_lat && p.lat <= self.max_lat && p.lon >= self.min_lon && p.lon <= self.max_lon
    }
}

/// The patrol area: an `rows x cols` grid of equal lat/lon cells.
#[derive(Debug, Clone)]
pub struct GridMap {
    pub bbox: BBox,
    pub rows: u32,
    pub cols: u32,
    /// `rows * cols` cells; cell `(r, c)` has id `r * cols + c`.
    pub cells: Vec<PatrolNode>,
    /// Nominal cell area in square meters, evaluated at the bbox mid-latitude.
    pub cell_area_m2: f64,
}

impl GridMap {
    pub fn n_nodes(&self) -> usize {
        self.cells.len()
    }

    pub fn centroid(&self, id: NodeId) -> LatLon {
        self.cells[id.0 as usize].centroid
    }
}

/// Working status of an officer within a shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfficerStatus {
    Idle,
    Travelling,
    Visiting,
    OffDuty,
}

/// Validated officer walking/driving speed in meters per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Speed(f64);

impl Speed {
    pub fn new(mps: f64) -> Result<Self, DomainError> {
        if mps > 0.0 && mps.is_finite() {
            Ok(Self(mps))
        } else {
            Err(DomainError::NonPositiveSpeed(mps))
        }
    }

    pub fn mps(self) -> f64 {
        self.0
    }

    /// Meters covered in one 1-minute tick.
    pub fn meters_per_minute(self) -> f64 {
        self.0 * 60.0
    }
}

/// A police officer on duty.
#[derive(Debug, Clone)]
pub struct Officer {
    pub id: OfficerId,
    pub position: LatLon,
    pub status: OfficerStatus,
    pub speed: Speed,
    /// Shift start and end as minutes from the scenario epoch.
    pub shift: (i64, i64),
    /// Fixed daily salary (rho) for the net objective.
    pub salary_rho: f64,
}

/// A live 911 call awaiting response.
#[derive(Debug, Clone, PartialEq)]
pub struct EmergencyCall {
    pub id: u32,
    pub node: NodeId,
    /// Call time in minutes from the scenario epoch.
    pub call_time_min: f64,
    pub call_type: String,
    pub priority: u8,
}

impl EmergencyCall {
    /// Builds a call; the priority is always derived from the call type.
    pub fn new(id: u32, node: NodeId, call_time_min: f64, call_type: String) -> Self {
        let priority = priority_of(&call_type);
        Self { id, node, call_time_min, call_type, priority }
    }
}

/// A (day, slot) pair identifying one 2-hour interval of the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeInterval {
    /// Day index from the scenario start date.
    pub day: u32,
    /// Slot index 0-11 within the day.
    pub slot: u8,
}

impl TimeInterval {
    pub fn new(day: u32, slot: u8) -> Self {
        debug_assert!(slot < SLOTS_PER_DAY);
        Self { day, slot }
    }

    /// Interval containing the given minute from the scenario epoch.
    pub fn of_minute(minute: i64) -> Self {
        let day = minute.div_euclid(24 * 60);
        let slot = minute.rem_euclid(24 * 60) / SLOT_MINUTES;
        Self { day: day as u32, slot: slot as u8 }
    }

    /// First minute (from the scenario epoch) covered by this interval.
    pub fn start_minute(self) -> i64 {
        i64::from(self.day) * 24 * 60 + i64::from(self.slot) * SLOT_MINUTES
    }
}

const PRIORITY_1_TYPES: &[&str] = &[
    "false alarms",
    "nauisance mischief",
    "nuisance mischief",
    "missing person",
    "missing property",
    "trespass",
    "fraud call",
    "mental health",
    "prowl",
];
const PRIORITY_2_TYPES: &[&str] = &[
    "animal complaints",
    "theft",
    "disturbances",
    "hazards",
    "shoplifting",
    "property damage",
    "suspicious circumstances",
];
const PRIORITY_3_TYPES: &[&str] = &["burglary", "liquor violations", "narcotics complaints"];
const PRIORITY_4_TYPES: &[&str] = &[
    "assaults",
    "sex offender",
    "prostitution",
    "reckless burning",
    "robbery",
    "threats",
    "harassment",
];
const PRIORITY_5_TYPES: &[&str] = &["accident", "arrest", "homicide", "person down/injury", "weapons calls"];

/// All known call types grouped by priority, lowest first.
pub const CALL_TYPE_TABLE: [&[&str]; 5] = [
    PRIORITY_1_TYPES,
    PRIORITY_2_TYPES,
    PRIORITY_3_TYPES,
    PRIORITY_4_TYPES,
    PRIORITY_5_TYPES,
];

/// Priority of a response-call type if it is listed, case-insensitive.
pub fn priority_of_known(call_type: &str) -> Option<u8> {
    let needle = call_type.trim().to_ascii_lowercase();
    for (i, types) in CALL_TYPE_TABLE.iter().enumerate() {
        if types.contains(&needle.as_str()) {
            return Some(i as u8 + 1);
        }
    }
    None
}

/// Priority 1-5 of a response-call type; unlisted types fall back to 1.
pub fn priority_of(call_type: &str) -> u8 {
    priority_of_known(call_type).unwrap_or(1)
}

/// Benefit multiplier for attending a call `delay_min` minutes after it was
/// placed, given the call priority.
///
/// Delay bands are `<15`, `[15, 30]`, `(30, 60)` and `>=60` minutes.
pub fn arrival_multiplier(delay_min: f64, priority: u8) -> f64 {
    debug_assert!((1..=5).contains(&priority));
    if delay_min < 15.0 {
        1.0
    } else if delay_min <= 30.0 {
        if priority <= 3 {
            0.8
        } else {
            0.0
        }
    } else if delay_min < 60.0 {
        if priority <= 2 {
            0.6
        } else {
            0.0
        }
    } else if priority == 1 {
        0.5
    } else {
        0.0
    }
}

/// Great-circle (haversine) distance between two points, in meters.
pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let lat_a = a.lat.to_radians();
    let lat_b = b.lat.to_radians();
    let d_lat = (b.lat - a.lat).to_radians();
    let d_lon = (b.lon - a.lon).to_radians();
    let h = (d_lat / 2.0).sin().powi(2) + lat_a.cos() * lat_b.cos() * (d_lon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Travel time between two points at the given speed, in minutes.
pub fn travel_time_min(a: LatLon, b: LatLon, speed: Speed) -> f64 {
    haversine_m(a, b) / speed.meters_per_minute()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn priority_table_rows() {
        assert_eq!(priority_of("Robbery"), 4);
        assert_eq!(priority_of("Homicide"), 5);
        assert_eq!(priority_of("Fraud call"), 1);
        assert_eq!(priority_of("THEFT"), 2);
        assert_eq!(priority_of("narcotics complaints"), 3);
        assert_eq!(priority_of("Person Down/Injury"), 5);
    }

    #[test]
    fn unknown_call_type_is_priority_one() {
        assert_eq!(priority_of_known("jaywalking"), None);
        assert_eq!(priority_of("jaywalking"), 1);
        assert_eq!(priority_of(""), 1);
    }

    #[test]
    fn benefit_examples() {
        // All-neutral coldspot.
        assert_relative_eq!(benefit(0.0, 1, 0.0), 1.0);
        // 5 * e^4, checked against a high-precision evaluation of the closed form.
        assert_relative_eq!(benefit(0.0, 5, 4.0), 272.9907501657212, max_relative = 1e-12);
        // e^3.
        assert_relative_eq!(benefit(1.0, 1, 2.0), 20.085536923187668, max_relative = 1e-12);
    }

    #[test]
    fn benefit_monotone_in_each_argument() {
        let mut w = 0.1f64;
        for _ in 0..20 {
            assert!(benefit(w + 0.3, 2, 2.0) > benefit(w, 2, 2.0));
            assert!(benefit(w, 3, 2.0) > benefit(w, 2, 2.0));
            assert!(benefit(w, 2, 4.0) > benefit(w, 2, 2.0));
            w += 0.17;
        }
    }

    #[test]
    fn arrival_multiplier_paper_cells() {
        assert_eq!(arrival_multiplier(10.0, 5), 1.0);
        assert_eq!(arrival_multiplier(45.0, 2), 0.6);
        assert_eq!(arrival_multiplier(70.0, 1), 0.5);
        assert_eq!(arrival_multiplier(20.0, 4), 0.0);
    }

    #[test]
    fn arrival_multiplier_boundaries() {
        assert_eq!(arrival_multiplier(14.999, 5), 1.0);
        assert_eq!(arrival_multiplier(15.0, 3), 0.8);
        assert_eq!(arrival_multiplier(30.0, 3), 0.8);
        assert_eq!(arrival_multiplier(30.001, 3), 0.0);
        assert_eq!(arrival_multiplier(30.001, 2), 0.6);
        assert_eq!(arrival_multiplier(59.999, 2), 0.6);
        assert_eq!(arrival_multiplier(60.0, 2), 0.0);
        assert_eq!(arrival_multiplier(60.0, 1), 0.5);
    }

    #[test]
    fn arrival_multiplier_monotone() {
        let delays = [0.0, 10.0, 15.0, 20.0, 30.0, 31.0, 45.0, 59.0, 60.0, 120.0];
        for p in 1..=5u8 {
            for w in delays.windows(2) {
                assert!(arrival_multiplier(w[1], p) <= arrival_multiplier(w[0], p));
            }
        }
        for d in delays {
            for p in 1..5u8 {
                assert!(arrival_multiplier(d, p + 1) <= arrival_multiplier(d, p));
            }
        }
    }

    #[test]
    fn travel_time_zero_for_identical_points() {
        let p = LatLon::new(47.6, -122.3);
        let s = Speed::new(1.2).unwrap();
        assert_eq!(travel_time_min(p, p, s), 0.0);
    }

    #[test]
    fn travel_time_720m_at_walking_speed() {
        // Two points 720 m apart along a meridian: d_lat = 720 / R radians.
        let d_lat_deg = (720.0 / EARTH_RADIUS_M).to_degrees();
        let a = LatLon::new(47.6, -122.3);
        let b = LatLon::new(47.6 + d_lat_deg, -122.3);
        let s = Speed::new(1.2).unwrap();
        assert_relative_eq!(haversine_m(a, b), 720.0, max_relative = 1e-9);
        assert_relative_eq!(travel_time_min(a, b, s), 10.0, max_relative = 1e-9);
    }

    #[test]
    fn travel_time_symmetry_and_triangle() {
        let s = Speed::new(1.2).unwrap();
        let pts = [
            LatLon::new(47.60, -122.35),
            LatLon::new(47.61, -122.30),
            LatLon::new(47.58, -122.32),
            LatLon::new(47.63, -122.28),
        ];
        for &a in &pts {
            for &b in &pts {
                let ab = travel_time_min(a, b, s);
                let ba = travel_time_min(b, a, s);
                assert_relative_eq!(ab, ba, max_relative = 1e-9);
                for &c in &pts {
                    let ac = travel_time_min(a, c, s);
                    let cb = travel_time_min(c, b, s);
                    assert!(ab <= ac + cb + 1e-9 * ab.max(1.0));
                }
            }
        }
    }

    #[test]
    fn speed_rejects_non_positive() {
        assert!(Speed::new(0.0).is_err());
        assert!(Speed::new(-1.0).is_err());
        assert!(Speed::new(f64::NAN).is_err());
    }

    #[test]
    fn interval_of_minute() {
        assert_eq!(TimeInterval::of_minute(0), TimeInterval::new(0, 0));
        assert_eq!(TimeInterval::of_minute(119), TimeInterval::new(0, 0));
        assert_eq!(TimeInterval::of_minute(120), TimeInterval::new(0, 1));
        assert_eq!(TimeInterval::of_minute(24 * 60), TimeInterval::new(1, 0));
        assert_eq!(TimeInterval::of_minute(24 * 60 + 8 * 60), TimeInterval::new(1, 4));
        assert_eq!(TimeInterval::new(1, 4).start_minute(), 24 * 60 + 8 * 60);
    }

    #[test]
    fn emergency_call_priority_follows_type() {
        let c = EmergencyCall::new(0, NodeId(3), 100.0, "Robbery".into());
        assert_eq!(c.priority, 4);
        let c = EmergencyCall::new(1, NodeId(3), 100.0, "something odd".into());
        assert_eq!(c.priority, 1);
    }
}
