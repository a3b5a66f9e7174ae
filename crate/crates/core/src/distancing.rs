//! Person counting, distance measurement between people, distancing
//! violations and the control room's recall/start rule.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fleet::DroneId;

pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Kilometres per degree in the flat latitude/longitude formula.
pub const KM_PER_DEGREE: f64 = 111.32;
pub const DEFAULT_VIOLATION_THRESHOLD: f64 = 1.0;
pub const DEFAULT_LOWER_UTILIZATION: f64 = 0.2;
pub const DEFAULT_UPPER_UTILIZATION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistancingError {
    #[error("latitude {lat} / longitude {lon} out of range")]
    InvalidGeoPoint { lat: f64, lon: f64 },
    #[error("person {0} lacks the observation this method needs")]
    MissingObservation(usize),
    #[error("method {method:?} cannot measure person {person}'s location")]
    IncompatibleLocation { method: DistanceMethod, person: usize },
    #[error("thresholds must satisfy 0 <= lower < upper <= 1, got ({lower}, {upper})")]
    InvalidThresholds { lower: f64, upper: f64 },
    #[error("violation threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("camera parameters must all be positive")]
    BadCamera,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    /// degrees
    pub lat: f64,
    /// degrees
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, DistancingError> {
        if !((-90.0..=90.0).contains(&lat) && lon > -180.0 && lon <= 180.0) {
            return Err(DistancingError::InvalidGeoPoint { lat, lon });
        }
        Ok(GeoPoint { lat, lon })
    }

    fn unit_vector(&self) -> [f64; 3] {
        let (phi, lam) = (self.lat.to_radians(), self.lon.to_radians());
        [phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]
    }
}

/// Where a person was measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Location {
    Geo(GeoPoint),
    /// ground coordinates in metres
    Planar { x: f64, y: f64 },
    /// image coordinates in pixels
    Pixel { u: f64, v: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QueuePersonId {
    pub index: u32,
    pub queue: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueuePerson {
    pub id: QueuePersonId,
    pub location: Location,
    /// real body length in metres
    pub apparent_length: Option<f64>,
    /// camera-to-person distance in metres
    pub range: Option<f64>,
    /// pixels the person spans in the image
    pub pixel_extent: Option<f64>,
}

impl QueuePerson {
    pub fn at(index: u32, queue: u32, location: Location) -> Self {
        QueuePerson {
            id: QueuePersonId { index, queue },
            location,
            apparent_length: None,
            range: None,
            pixel_extent: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub sensor_width: f64,
    pub focal_length: f64,
    pub image_width_px: f64,
    pub altitude: f64,
    /// radians subtended by one pixel
    pub pixel_angular_size: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            sensor_width: 13.2,
            focal_length: 8.8,
            image_width_px: 5472.0,
            altitude: 100.0,
            pixel_angular_size: 13.2 / 8.8 / 5472.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), DistancingError> {
        let all = [self.sensor_width, self.focal_length, self.image_width_px, self.altitude, self.pixel_angular_size];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(DistancingError::BadCamera)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DistanceMethod {
    TunnelChord,
    FlatLatLon,
    GroundSampleDistance,
    PixelRatio,
}

/// Straight-line distance through the sphere, in the units of `r`.
pub fn tunnel_distance(p1: GeoPoint, p2: GeoPoint, r: f64) -> f64 {
    let a = p1.unit_vector();
    let b = p2.unit_vector();
    let (dx, dy, dz) = (b[0] - a[0], b[1] - a[1], b[2] - a[2]);
    (dx * dx + dy * dy + dz * dz).sqrt() * r
}

/// How much the chord falls short of the arc for distance `d` when `d ≪ r`.
pub fn tunnel_error_bound(d: f64, r: f64) -> f64 {
    d * (d / r).powi(2) / 24.0
}

/// Degrees treated as a flat grid of 111.32 km per degree. There is no
/// cosine-of-latitude correction, so east–west distances are overstated
/// away from the equator.
pub fn flat_latlon_distance(p1: GeoPoint, p2: GeoPoint) -> f64 {
    KM_PER_DEGREE * (p2.lat - p1.lat).hypot(p2.lon - p1.lon)
}

/// Ground size of one pixel in centimetres, and the image footprint width
/// in metres.
pub fn ground_sample_distance(cam: &CameraModel) -> (f64, f64) {
    let gsd = cam.sensor_width * cam.altitude * 100.0 / (cam.focal_length * cam.image_width_px);
    (gsd, gsd * cam.image_width_px / 100.0)
}

fn range_from_image(p: &QueuePerson, idx: usize, cam: &CameraModel) -> Result<f64, DistancingError> {
    let length = p.apparent_length.ok_or(DistancingError::MissingObservation(idx))?;
    let extent = p.pixel_extent.ok_or(DistancingError::MissingObservation(idx))?;
    let angle = extent * cam.pixel_angular_size;
    if !(length > 0.0 && angle > 0.0) {
        return Err(DistancingError::MissingObservation(idx));
    }
    Ok(length / angle)
}

/// Difference between the two persons' camera ranges, each recovered from
/// body length over angular size.
pub fn pixel_ratio_distance(a: &QueuePerson, b: &QueuePerson, cam: &CameraModel) -> Result<f64, DistancingError> {
    let ra = range_from_image(a, 0, cam)?;
    let rb = range_from_image(b, 1, cam)?;
    Ok((ra - rb).abs())
}

/// Distance in metres between two people under one method.
pub fn measure_distance(
    a: &QueuePerson,
    b: &QueuePerson,
    method: DistanceMethod,
    cam: &CameraModel,
) -> Result<f64, DistancingError> {
    measure_indexed((0, a), (1, b), method, cam)
}

fn measure_indexed(
    (ia, a): (usize, &QueuePerson),
    (ib, b): (usize, &QueuePerson),
    method: DistanceMethod,
    cam: &CameraModel,
) -> Result<f64, DistancingError> {
    let geo = |idx: usize, p: &QueuePerson| match p.location {
        Location::Geo(g) => Ok(g),
        _ => Err(DistancingError::IncompatibleLocation { method, person: idx }),
    };
    match method {
        DistanceMethod::TunnelChord => Ok(tunnel_distance(geo(ia, a)?, geo(ib, b)?, EARTH_RADIUS_KM) * 1000.0),
        DistanceMethod::FlatLatLon => Ok(flat_latlon_distance(geo(ia, a)?, geo(ib, b)?) * 1000.0),
        DistanceMethod::GroundSampleDistance => {
            let (pa, pb) = (ground_point(ia, a, cam, method)?, ground_point(ib, b, cam, method)?);
            Ok((pa.0 - pb.0).hypot(pa.1 - pb.1))
        }
        DistanceMethod::PixelRatio => {
            let ra = range_from_image(a, ia, cam)?;
            let rb = range_from_image(b, ib, cam)?;
            Ok((ra - rb).abs())
        }
    }
}

/// Ground position in metres; image positions are scaled by the GSD.
fn ground_point(idx: usize, p: &QueuePerson, cam: &CameraModel, method: DistanceMethod) -> Result<(f64, f64), DistancingError> {
    match p.location {
        Location::Planar { x, y } => Ok((x, y)),
        Location::Pixel { u, v } => {
            let metres_per_px = ground_sample_distance(cam).0 / 100.0;
            Ok((u * metres_per_px, v * metres_per_px))
        }
        Location::Geo(_) => Err(DistancingError::IncompatibleLocation { method, person: idx }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectionMode {
    /// Consecutive people of each queue.
    Queue,
    /// Every pair.
    Scatter,
}

/// Two people closer than the threshold; indices into the input slice,
/// `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Every pair closer than `threshold` metres.
///
/// Queue mode orders each queue by person index and checks neighbours.
/// Scatter mode checks all pairs, bucketing ground positions into cells of
/// the threshold size and sorting image ranges, so only nearby candidates
/// are measured.
pub fn detect_violations(
    persons: &[QueuePerson],
    method: DistanceMethod,
    threshold: f64,
    mode: DetectionMode,
    cam: &CameraModel,
) -> Result<Vec<Violation>, DistancingError> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(DistancingError::BadThreshold(threshold));
    }
    let candidates = match mode {
        DetectionMode::Queue => queue_neighbours(persons),
        DetectionMode::Scatter => scatter_candidates(persons, method, threshold, cam)?,
    };
    let mut out = Vec::new();
    for (i, j) in candidates {
        let d = measure_indexed((i, &persons[i]), (j, &persons[j]), method, cam)?;
        if d < threshold {
            out.push(Violation { a: i, b: j, distance: d });
        }
    }
    out.sort_by_key(|v| (v.a, v.b));
    Ok(out)
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

fn queue_neighbours(persons: &[QueuePerson]) -> Vec<(usize, usize)> {
    let mut queues: BTreeMap<u32, Vec<(u32, usize)>> = BTreeMap::new();
    for (i, p) in persons.iter().enumerate() {
        queues.entry(p.id.queue).or_default().push((p.id.index, i));
    }
    let mut out = Vec::new();
    for members in queues.values_mut() {
        members.sort();
        for w in members.windows(2) {
            out.push(ordered(w[0].1, w[1].1));
        }
    }
    out
}

fn scatter_candidates(
    persons: &[QueuePerson],
    method: DistanceMethod,
    threshold: f64,
    cam: &CameraModel,
) -> Result<Vec<(usize, usize)>, DistancingError> {
    let n = persons.len();
    match method {
        DistanceMethod::GroundSampleDistance => {
            let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
            for (i, p) in persons.iter().enumerate() {
                let (x, y) = ground_point(i, p, cam, method)?;
                let key = ((x / threshold).floor() as i64, (y / threshold).floor() as i64);
                cells.entry(key).or_default().push(i);
            }
            let mut out = BTreeSet::new();
            for (&(cx, cy), members) in &cells {
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        let Some(others) = cells.get(&(cx + dx, cy + dy)) else { continue };
                        for &i in members {
                            for &j in others {
                                if i < j {
                                    out.insert((i, j));
                                }
                            }
                        }
                    }
                }
            }
            Ok(out.into_iter().collect())
        }
        DistanceMethod::PixelRatio => {
            let mut ranges = Vec::with_capacity(n);
            for (i, p) in persons.iter().enumerate() {
                ranges.push((range_from_image(p, i, cam)?, i));
            }
            ranges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut out = Vec::new();
            for s in 0..n {
                for t in s + 1..n {
                    if ranges[t].0 - ranges[s].0 > threshold {
                        break;
                    }
                    out.push(ordered(ranges[s].1, ranges[t].1));
                }
            }
            Ok(out)
        }
        DistanceMethod::TunnelChord | DistanceMethod::FlatLatLon => {
            Ok((0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect())
        }
    }
}

/// Everyone who must be told to spread out.
pub fn intimations(violations: &[Violation]) -> BTreeSet<usize> {
    violations.iter().flat_map(|v| [v.a, v.b]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

/// Something the drone's sensors picked up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub object: u32,
    pub direction: Direction,
    /// metres, when a ranging sensor returned one
    pub range: Option<f64>,
    /// pixels spanned in the image
    pub pixel_extent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanPattern {
    Facing(Direction),
    /// Rotate the sensors through all four directions and merge.
    AllDirections,
}

/// People in the sensed area.
///
/// With ranging sensors each distinct object that returned a range counts.
/// Without them an object counts when its estimated length (angular size
/// times range, the camera altitude standing in for a missing range)
/// exceeds `length_threshold`.
pub fn count_persons(
    detections: &[Detection],
    sensors_available: bool,
    cam: &CameraModel,
    length_threshold: f64,
    pattern: ScanPattern,
) -> usize {
    let seen = |d: &&Detection| match pattern {
        ScanPattern::Facing(dir) => d.direction == dir,
        ScanPattern::AllDirections => true,
    };
    let objects: BTreeSet<u32> = detections
        .iter()
        .filter(seen)
        .filter(|d| {
            if sensors_available {
                d.range.is_some()
            } else {
                let r = d.range.unwrap_or(cam.altitude);
                d.pixel_extent.is_some_and(|px| px * cam.pixel_angular_size * r > length_threshold)
            }
        })
        .map(|d| d.object)
        .collect();
    objects.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Directive {
    Recall,
    StartOps,
    NoAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRoomReport {
    pub directives: Vec<(DroneId, Directive)>,
    /// people to warn again about standing violations
    pub intimations: BTreeSet<usize>,
}

/// One directive per drone from its utilisation: recall at or above
/// `upper`, start operations below `lower`, otherwise leave it be.
pub fn control_room_notification(
    readings: &[(DroneId, f64)],
    lower: f64,
    upper: f64,
    violations: &[Violation],
) -> Result<ControlRoomReport, DistancingError> {
    if !(0.0 <= lower && lower < upper && upper <= 1.0) {
        return Err(DistancingError::InvalidThresholds { lower, upper });
    }
    let directives = readings
        .iter()
        .map(|&(d, u)| {
            let directive = if u >= upper {
                Directive::Recall
            } else if u < lower {
                Directive::StartOps
            } else {
                Directive::NoAction
            };
            (d, directive)
        })
        .collect();
    Ok(ControlRoomReport { directives, intimations: intimations(violations) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn planar(i: u32, x: f64, y: f64) -> QueuePerson {
        QueuePerson::at(i, 0, Location::Planar { x, y })
    }

    #[test]
    fn geo_validation() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.0).is_err());
        assert!(GeoPoint::new(0.0, 180.0).is_ok());
    }

    #[test]
    fn tunnel_examples() {
        let o = geo(0.0, 0.0);
        assert_eq!(tunnel_distance(o, o, EARTH_RADIUS_KM), 0.0);
        assert!((tunnel_distance(o, geo(0.0, 90.0), EARTH_RADIUS_KM) - 9009.95).abs() < 0.01);
        assert!((tunnel_distance(o, geo(0.0, 1.0), EARTH_RADIUS_KM) - 111.19).abs() < 0.005);
        assert_eq!(tunnel_error_bound(0.0, EARTH_RADIUS_KM), 0.0);
        assert!((tunnel_error_bound(111.19, EARTH_RADIUS_KM) - 0.00141).abs() < 5e-6);
        assert!((tunnel_error_bound(1000.0, EARTH_RADIUS_KM) - 1.0265).abs() < 1e-4);
    }

    #[test]
    fn flat_examples() {
        let o = geo(0.0, 0.0);
        assert_eq!(flat_latlon_distance(o, o), 0.0);
        assert!((flat_latlon_distance(o, geo(1.0, 0.0)) - 111.32).abs() < 1e-12);
        assert!((flat_latlon_distance(o, geo(3.0, 4.0)) - 556.6).abs() < 1e-9);
    }

    #[test]
    fn gsd_examples() {
        let cam = CameraModel::default();
        let (gsd, footprint) = ground_sample_distance(&cam);
        assert!((gsd - 2.741).abs() < 5e-4);
        assert!((footprint - 150.0).abs() < 1e-9);
        let high = CameraModel { altitude: 200.0, ..cam };
        assert!((ground_sample_distance(&high).0 - 2.0 * gsd).abs() < 1e-12);
        let wide = CameraModel { focal_length: 4.4, ..cam };
        assert!((ground_sample_distance(&wide).0 - 2.0 * gsd).abs() < 1e-12);
    }

    fn imaged(i: u32, length: f64, extent: f64) -> QueuePerson {
        QueuePerson {
            apparent_length: Some(length),
            pixel_extent: Some(extent),
            ..QueuePerson::at(i, 0, Location::Pixel { u: 0.0, v: 0.0 })
        }
    }

    #[test]
    fn pixel_ratio_examples() {
        let cam = CameraModel { pixel_angular_size: 0.001, ..CameraModel::default() };
        let a = imaged(0, 1.7, 170.0);
        assert_eq!(pixel_ratio_distance(&a, &a, &cam), Ok(0.0));
        // 1.7 m over 0.17 rad is 10 m; over 0.141667 rad it is 12 m
        let b = imaged(1, 1.7, 1700.0 / 12.0);
        let d = pixel_ratio_distance(&a, &b, &cam).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        assert_eq!(pixel_ratio_distance(&b, &a, &cam).unwrap(), d);
        let bare = QueuePerson::at(2, 0, Location::Pixel { u: 0.0, v: 0.0 });
        assert_eq!(pixel_ratio_distance(&a, &bare, &cam), Err(DistancingError::MissingObservation(1)));
    }

    #[test]
    fn queue_examples() {
        let cam = CameraModel::default();
        let at_threshold: Vec<_> = (0..4).map(|i| planar(i, i as f64, 0.0)).collect();
        assert!(detect_violations(&at_threshold, DistanceMethod::GroundSampleDistance, 1.0, DetectionMode::Queue, &cam)
            .unwrap()
            .is_empty());
        let q: Vec<_> = [0.0, 0.8, 2.0, 2.9].iter().enumerate().map(|(i, &x)| planar(i as u32, x, 0.0)).collect();
        let v = detect_violations(&q, DistanceMethod::GroundSampleDistance, 1.0, DetectionMode::Queue, &cam).unwrap();
        assert_eq!(v.iter().map(|v| (v.a, v.b)).collect::<Vec<_>>(), vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn scatter_close_trio() {
        let cam = CameraModel::default();
        let trio = [planar(0, 0.0, 0.0), planar(1, 0.3, 0.1), planar(2, 0.1, 0.4)];
        let v = detect_violations(&trio, DistanceMethod::GroundSampleDistance, 1.0, DetectionMode::Scatter, &cam).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(intimations(&v), BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn incompatible_location_reported() {
        let cam = CameraModel::default();
        let mixed = [planar(0, 0.0, 0.0), QueuePerson::at(1, 0, Location::Geo(geo(0.0, 0.0)))];
        assert!(matches!(
            detect_violations(&mixed, DistanceMethod::TunnelChord, 1.0, DetectionMode::Scatter, &cam),
            Err(DistancingError::IncompatibleLocation { .. })
        ));
        assert!(detect_violations(&mixed, DistanceMethod::TunnelChord, 0.0, DetectionMode::Scatter, &cam).is_err());
    }

    #[test]
    fn counting() {
        let cam = CameraModel { pixel_angular_size: 0.001, altitude: 10.0, ..CameraModel::default() };
        assert_eq!(count_persons(&[], true, &cam, 1.0, ScanPattern::AllDirections), 0);
        let ranged: Vec<_> = (0..5)
            .map(|i| Detection { object: i, direction: Direction::North, range: Some(3.0 + i as f64), pixel_extent: None })
            .collect();
        assert_eq!(count_persons(&ranged, true, &cam, 1.0, ScanPattern::Facing(Direction::North)), 5);
        // lengths 1.7, 1.6 and 0.4 m at 10 m range
        let imaged: Vec<_> = [170.0, 160.0, 40.0]
            .iter()
            .enumerate()
            .map(|(i, &px)| Detection { object: i as u32, direction: Direction::East, range: Some(10.0), pixel_extent: Some(px) })
            .collect();
        assert_eq!(count_persons(&imaged, false, &cam, 1.0, ScanPattern::AllDirections), 2);
        assert_eq!(count_persons(&imaged, false, &cam, 1.0, ScanPattern::Facing(Direction::North)), 0);
        // the same person seen from two sides counts once
        let twice = [
            Detection { object: 1, direction: Direction::North, range: Some(2.0), pixel_extent: None },
            Detection { object: 1, direction: Direction::South, range: Some(2.5), pixel_extent: None },
        ];
        assert_eq!(count_persons(&twice, true, &cam, 1.0, ScanPattern::AllDirections), 1);
    }

    #[test]
    fn control_room_examples() {
        let r = control_room_notification(&[(DroneId(0), 0.9)], 0.2, 0.8, &[]).unwrap();
        assert_eq!(r.directives, vec![(DroneId(0), Directive::Recall)]);
        let r = control_room_notification(&[(DroneId(0), 0.1)], 0.2, 0.8, &[]).unwrap();
        assert_eq!(r.directives, vec![(DroneId(0), Directive::StartOps)]);
        let r = control_room_notification(&[(DroneId(0), 0.5)], 0.2, 0.8, &[]).unwrap();
        assert_eq!(r.directives, vec![(DroneId(0), Directive::NoAction)]);
        assert!(control_room_notification(&[], 0.8, 0.2, &[]).is_err());
        let v = [Violation { a: 2, b: 5, distance: 0.5 }];
        assert_eq!(control_room_notification(&[], 0.2, 0.8, &v).unwrap().intimations, BTreeSet::from([2, 5]));
    }
}
