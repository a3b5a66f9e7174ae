//! Slow, obviously-correct reference implementations the fast paths are
//! checked against.

use std::collections::BTreeMap;

use crate::distancing::{measure_distance, CameraModel, DistanceMethod, DistancingError, GeoPoint, QueuePerson, Violation};
use crate::transfer::{Cell, OccupancyLedger};
use crate::fleet::DroneId;

pub use crate::zone_grid::diagonal_enumeration_oracle;

/// Central angle between two points in radians, by the haversine formula.
pub fn central_angle(p1: GeoPoint, p2: GeoPoint) -> f64 {
    let (phi1, phi2) = (p1.lat.to_radians(), p2.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlam = (p2.lon - p1.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlam / 2.0).sin().powi(2);
    2.0 * h.sqrt().min(1.0).asin()
}

/// Great-circle distance along the surface, in the units of `r`.
pub fn haversine(p1: GeoPoint, p2: GeoPoint, r: f64) -> f64 {
    r * central_angle(p1, p2)
}

/// Chord length from the central angle, `2R·sin(σ/2)`.
pub fn chord(p1: GeoPoint, p2: GeoPoint, r: f64) -> f64 {
    2.0 * r * (central_angle(p1, p2) / 2.0).sin()
}

/// Every pair measured, no pruning.
pub fn brute_force_violations(
    persons: &[QueuePerson],
    method: DistanceMethod,
    threshold: f64,
    cam: &CameraModel,
) -> Result<Vec<Violation>, DistancingError> {
    let mut out = Vec::new();
    for a in 0..persons.len() {
        for b in a + 1..persons.len() {
            let distance = measure_distance(&persons[a], &persons[b], method, cam)?;
            if distance < threshold {
                out.push(Violation { a, b, distance });
            }
        }
    }
    Ok(out)
}

/// Rebuilds occupancy from the ledger's drone list and reports the first
/// cell holding two drones or drone listed twice.
pub fn occupancy_conflict(ledger: &OccupancyLedger) -> Option<String> {
    let mut cells: BTreeMap<Cell, DroneId> = BTreeMap::new();
    let mut seen: BTreeMap<DroneId, Cell> = BTreeMap::new();
    for (d, c) in ledger.iter() {
        if let Some(other) = cells.insert(c, d) {
            return Some(format!("{c} holds {other} and {d}"));
        }
        if let Some(prev) = seen.insert(d, c) {
            return Some(format!("{d} is in {prev} and {c}"));
        }
        if ledger.occupant(c) != Some(d) || ledger.cell_of(d) != Some(c) {
            return Some(format!("ledger lookups disagree for {d} in {c}"));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distancing::EARTH_RADIUS_KM;

    #[test]
    fn one_degree_on_the_equator() {
        let (a, b) = (GeoPoint { lat: 0.0, lon: 0.0 }, GeoPoint { lat: 0.0, lon: 1.0 });
        assert!((haversine(a, b, EARTH_RADIUS_KM) - 111.195).abs() < 1e-3);
        assert!((chord(a, b, EARTH_RADIUS_KM) - 111.194).abs() < 1e-3);
    }

    #[test]
    fn antipodes() {
        let (a, b) = (GeoPoint { lat: 0.0, lon: 0.0 }, GeoPoint { lat: 0.0, lon: 180.0 });
        assert!((chord(a, b, 1.0) - 2.0).abs() < 1e-12);
        assert!((haversine(a, b, 1.0) - std::f64::consts::PI).abs() < 1e-12);
    }
}
