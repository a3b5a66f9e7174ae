//! Drones, their operating state machine and battery/tank accounting.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::zone_grid::{drone_zone_value, zone_at_ordinal, zone_center, GridSpec, Position, ZoneId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DroneId(pub u32);

impl fmt::Display for DroneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DroneState {
    Idle,
    Scanning,
    Sanitizing,
    Transferring,
    WaitingInTransferArea,
    Refilling,
    Recalled,
}

impl DroneState {
    pub const ALL: [DroneState; 7] = [
        DroneState::Idle,
        DroneState::Scanning,
        DroneState::Sanitizing,
        DroneState::Transferring,
        DroneState::WaitingInTransferArea,
        DroneState::Refilling,
        DroneState::Recalled,
    ];

    /// States that count towards utilisation.
    pub fn is_active(self) -> bool {
        matches!(self, DroneState::Scanning | DroneState::Sanitizing | DroneState::Transferring)
    }

    /// Counted by the drones-in-use statistic: everything except grounded
    /// idle drones and drones that were called back.
    pub fn is_in_use(self) -> bool {
        !matches!(self, DroneState::Idle | DroneState::Recalled)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DroneState::Idle => "Idle",
            DroneState::Scanning => "Scanning",
            DroneState::Sanitizing => "Sanitizing",
            DroneState::Transferring => "Transferring",
            DroneState::WaitingInTransferArea => "WaitingInTransferArea",
            DroneState::Refilling => "Refilling",
            DroneState::Recalled => "Recalled",
        }
    }
}

impl fmt::Display for DroneState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fleet-wide defaults. Endurance and tank figures follow the hexacopter
/// sanitising drone: 35-40 min of thermal-only flight, 12-15 min while
/// spraying, and a 5 L tank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetConfig {
    /// metres per second
    pub speed: f64,
    /// seconds of flight on a full battery without spraying
    pub flight_time_scan: f64,
    /// seconds of flight on a full battery while spraying
    pub flight_time_spray: f64,
    /// litres
    pub tank_capacity: f64,
    /// litres per minute
    pub spray_rate: f64,
    /// battery fraction at which the drone must head for the depot
    pub battery_floor: f64,
    /// litres left at which a spraying drone must refill
    pub tank_floor: f64,
    /// minutes
    pub recharge_time: f64,
    /// minutes
    pub refill_time: f64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        FleetConfig {
            speed: 5.0,
            flight_time_scan: 35.0 * 60.0,
            flight_time_spray: 12.5 * 60.0,
            tank_capacity: 5.0,
            spray_rate: 0.4,
            battery_floor: 0.1,
            tank_floor: 0.0,
            recharge_time: 40.0,
            refill_time: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FleetError {
    #[error("fleet needs at least one drone")]
    EmptyFleet,
    #[error("{count} drones do not fit one per zone on a layer of {zones} zones")]
    TooManyDrones { count: usize, zones: usize },
    #[error("operational layer {layer} does not exist")]
    NoSuchLayer { layer: usize },
    #[error("invalid fleet config: {0}")]
    BadConfig(&'static str),
}

impl FleetConfig {
    pub fn validate(&self) -> Result<(), FleetError> {
        let positive = [
            (self.speed, "speed must be positive"),
            (self.flight_time_scan, "flight_time_scan must be positive"),
            (self.flight_time_spray, "flight_time_spray must be positive"),
            (self.tank_capacity, "tank_capacity must be positive"),
            (self.spray_rate, "spray_rate must be positive"),
            (self.recharge_time, "recharge_time must be positive"),
            (self.refill_time, "refill_time must be positive"),
        ];
        for (v, msg) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(FleetError::BadConfig(msg));
            }
        }
        if !(0.0..1.0).contains(&self.battery_floor) {
            return Err(FleetError::BadConfig("battery_floor must lie in [0, 1)"));
        }
        if !(0.0..self.tank_capacity).contains(&self.tank_floor) {
            return Err(FleetError::BadConfig("tank_floor must lie in [0, tank_capacity)"));
        }
        Ok(())
    }
}

/// Piecewise-constant record of a drone's state over time (seconds).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StateTimeline {
    spans: Vec<(f64, DroneState)>,
}

impl StateTimeline {
    pub fn starting(t: f64, state: DroneState) -> Self {
        StateTimeline { spans: vec![(t, state)] }
    }

    pub fn record(&mut self, t: f64, state: DroneState) {
        match self.spans.last_mut() {
            Some(last) if last.1 == state => {}
            Some(last) if last.0 == t => last.1 = state,
            _ => self.spans.push((t, state)),
        }
    }

    pub fn state_at(&self, t: f64) -> DroneState {
        self.spans
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .map_or(DroneState::Idle, |(_, s)| *s)
    }

    /// Seconds spent in active states inside `[from, to)`. Time before the
    /// first record counts as idle.
    pub fn active_time(&self, from: f64, to: f64) -> f64 {
        let mut total = 0.0;
        for (i, &(start, state)) in self.spans.iter().enumerate() {
            if !state.is_active() {
                continue;
            }
            let end = self.spans.get(i + 1).map_or(f64::INFINITY, |s| s.0);
            let lo = start.max(from);
            let hi = end.min(to);
            if hi > lo {
                total += hi - lo;
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drone {
    pub id: DroneId,
    pub position: Position,
    pub state: DroneState,
    /// fraction of a full charge
    pub battery: f64,
    /// litres
    pub tank: f64,
    pub speed: f64,
    /// seconds of flight left at the current drain rate
    pub flight_budget: f64,
    pub utilization: f64,
    pub waypoint: Option<Position>,
    pub depot: Position,
    /// seconds since the drone was created
    pub clock: f64,
    pub timeline: StateTimeline,
}

impl Drone {
    pub fn new(id: DroneId, position: Position, depot: Position, cfg: &FleetConfig) -> Self {
        Drone {
            id,
            position,
            state: DroneState::Idle,
            battery: 1.0,
            tank: cfg.tank_capacity,
            speed: cfg.speed,
            flight_budget: cfg.flight_time_scan,
            utilization: 0.0,
            waypoint: None,
            depot,
            clock: 0.0,
            timeline: StateTimeline::starting(0.0, DroneState::Idle),
        }
    }

    pub fn set_state(&mut self, state: DroneState) {
        self.state = state;
        self.timeline.record(self.clock, state);
    }

    pub fn is_airborne(&self) -> bool {
        match self.state {
            DroneState::Idle => false,
            DroneState::Refilling | DroneState::Recalled => self.position.distance(&self.depot) > 0.0,
            _ => true,
        }
    }

    fn drain_seconds(&self, cfg: &FleetConfig) -> f64 {
        if self.state == DroneState::Sanitizing {
            cfg.flight_time_spray
        } else {
            cfg.flight_time_scan
        }
    }

    /// Advances kinematics and consumables by `dt` seconds.
    pub fn advance(&mut self, dt: f64, cfg: &FleetConfig) {
        debug_assert!(dt > 0.0);
        let airborne = self.is_airborne();
        if airborne {
            if let Some(wp) = self.waypoint {
                let remaining = self.position.distance(&wp);
                let step = self.speed * dt;
                if remaining <= step {
                    self.position = Position::new(wp.x, wp.y, self.position.layer);
                } else {
                    let f = step / remaining;
                    self.position.x += (wp.x - self.position.x) * f;
                    self.position.y += (wp.y - self.position.y) * f;
                }
            }
            self.battery = (self.battery - dt / self.drain_seconds(cfg)).max(0.0);
            if self.state == DroneState::Sanitizing {
                self.tank = (self.tank - cfg.spray_rate * dt / 60.0).max(0.0);
            }
        }
        self.clock += dt;
        self.flight_budget = self.battery * self.drain_seconds(cfg);

        let battery_low = self.battery <= cfg.battery_floor;
        let tank_low = self.state == DroneState::Sanitizing && self.tank <= cfg.tank_floor;
        if airborne
            && (battery_low || tank_low)
            && !matches!(self.state, DroneState::Refilling | DroneState::Recalled)
        {
            self.waypoint = Some(self.depot);
            self.set_state(DroneState::Refilling);
        }
    }

    /// Restores battery and tank; only valid while refilling.
    pub fn replenish(&mut self, cfg: &FleetConfig) {
        debug_assert_eq!(self.state, DroneState::Refilling);
        self.battery = 1.0;
        self.tank = cfg.tank_capacity;
        self.flight_budget = cfg.flight_time_scan;
    }
}

pub fn advance_drone(d: &Drone, dt: f64, cfg: &FleetConfig) -> Drone {
    let mut next = d.clone();
    next.advance(dt, cfg);
    next
}

/// Fraction of the trailing `window` seconds the drone spent in an active
/// state.
pub fn measure_utilization(d: &Drone, window: f64) -> f64 {
    if window.is_nan() || window <= 0.0 {
        return 0.0;
    }
    let busy = d.timeline.active_time(d.clock - window, d.clock);
    (busy / window).clamp(0.0, 1.0)
}

/// Places `count` drones one per zone of `layer`, in zone-ordinal order.
/// The depot sits at the grid origin corner.
pub fn create_fleet(
    count: usize,
    grid: &GridSpec,
    layer: usize,
    cfg: &FleetConfig,
) -> Result<Vec<Drone>, FleetError> {
    if count == 0 {
        return Err(FleetError::EmptyFleet);
    }
    if layer >= grid.layers {
        return Err(FleetError::NoSuchLayer { layer });
    }
    let zones = grid.zones_per_layer();
    if count > zones {
        return Err(FleetError::TooManyDrones { count, zones });
    }
    let depot = Position::new(0.0, 0.0, layer);
    Ok((0..count)
        .map(|i| {
            let (row, col) = zone_at_ordinal(i, grid.n).expect("ordinal below n²");
            let zone = ZoneId::new(row, col, layer);
            debug_assert_eq!(drone_zone_value(row, col, grid.n), Ok(i));
            Drone::new(DroneId(i as u32), zone_center(zone, grid), depot, cfg)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zone_grid::zone_of_position;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(3, 100.0, 1).unwrap()
    }

    #[test]
    fn fleet_creation() {
        let cfg = FleetConfig::default();
        let fleet = create_fleet(9, &grid(), 0, &cfg).unwrap();
        assert_eq!(fleet.len(), 9);
        let mut zones: Vec<_> = fleet
            .iter()
            .map(|d| zone_of_position(d.position, &grid()).unwrap())
            .collect();
        assert!(fleet.iter().all(|d| d.state == DroneState::Idle && d.battery == 1.0));
        zones.sort();
        zones.dedup();
        assert_eq!(zones.len(), 9);

        let one = create_fleet(1, &grid(), 0, &cfg).unwrap();
        assert_eq!(zone_of_position(one[0].position, &grid()), Ok(ZoneId::new(0, 0, 0)));

        assert_eq!(
            create_fleet(10, &grid(), 0, &cfg),
            Err(FleetError::TooManyDrones { count: 10, zones: 9 })
        );
        assert_eq!(create_fleet(0, &grid(), 0, &cfg), Err(FleetError::EmptyFleet));
    }

    #[test]
    fn idle_drone_stays_put() {
        let cfg = FleetConfig::default();
        let d = create_fleet(1, &grid(), 0, &cfg).unwrap().remove(0);
        let next = advance_drone(&d, 60.0, &cfg);
        assert_eq!(next.position, d.position);
        assert_eq!(next.flight_budget, d.flight_budget);
        assert_eq!(next.battery, 1.0);
    }

    #[test]
    fn spraying_uses_tank() {
        let cfg = FleetConfig::default();
        let mut d = create_fleet(1, &grid(), 0, &cfg).unwrap().remove(0);
        d.set_state(DroneState::Sanitizing);
        let next = advance_drone(&d, 60.0, &cfg);
        assert!((d.tank - next.tank - 0.4).abs() < 1e-12);
        // a 5 L tank lasts 12.5 minutes at 0.4 L/min
        assert!((cfg.tank_capacity / cfg.spray_rate - 12.5).abs() < 1e-12);
    }

    #[test]
    fn low_battery_forces_refill() {
        let cfg = FleetConfig::default();
        let mut d = create_fleet(1, &grid(), 0, &cfg).unwrap().remove(0);
        d.set_state(DroneState::Scanning);
        d.battery = cfg.battery_floor + 1e-4;
        d.waypoint = Some(Position::new(250.0, 250.0, 0));
        d.advance(1.0, &cfg);
        assert_eq!(d.state, DroneState::Refilling);
        assert_eq!(d.waypoint, Some(d.depot));
    }

    #[test]
    fn utilization_accounting() {
        let cfg = FleetConfig::default();
        let mut d = create_fleet(1, &grid(), 0, &cfg).unwrap().remove(0);
        for _ in 0..60 {
            d.advance(60.0, &cfg);
        }
        assert_eq!(measure_utilization(&d, 3600.0), 0.0);

        let mut d = create_fleet(1, &grid(), 0, &cfg).unwrap().remove(0);
        d.set_state(DroneState::Scanning);
        for _ in 0..48 {
            d.advance(60.0, &cfg);
            d.battery = 1.0;
        }
        d.set_state(DroneState::Idle);
        for _ in 0..12 {
            d.advance(60.0, &cfg);
        }
        assert!((measure_utilization(&d, 3600.0) - 0.8).abs() < 1e-12);

        let mut d = create_fleet(1, &grid(), 0, &cfg).unwrap().remove(0);
        for i in 0..60 {
            d.set_state(if i % 2 == 0 { DroneState::Scanning } else { DroneState::Idle });
            d.advance(60.0, &cfg);
            d.battery = 1.0;
        }
        assert!((measure_utilization(&d, 3600.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn timeline_lookup() {
        let mut t = StateTimeline::starting(0.0, DroneState::Idle);
        t.record(10.0, DroneState::Scanning);
        t.record(10.0, DroneState::Sanitizing);
        t.record(20.0, DroneState::Refilling);
        assert_eq!(t.state_at(5.0), DroneState::Idle);
        assert_eq!(t.state_at(10.0), DroneState::Sanitizing);
        assert_eq!(t.state_at(25.0), DroneState::Refilling);
        assert_eq!(t.active_time(0.0, 30.0), 10.0);
    }

    proptest! {
        #[test]
        fn kinematics_respect_speed_and_consumables(
            dts in prop::collection::vec(0.1f64..30.0, 1..60),
            tx in 0.0f64..300.0, ty in 0.0f64..300.0,
            spray in any::<bool>(),
        ) {
            let cfg = FleetConfig::default();
            let mut d = create_fleet(1, &grid(), 0, &cfg).unwrap().remove(0);
            d.set_state(if spray { DroneState::Sanitizing } else { DroneState::Scanning });
            d.waypoint = Some(Position::new(tx, ty, 0));
            let mut busy = 0.0;
            let mut total = 0.0;
            for dt in dts {
                let before = d.clone();
                if before.state.is_active() { busy += dt; }
                total += dt;
                d.advance(dt, &cfg);
                prop_assert!(before.position.distance(&d.position) <= d.speed * dt + 1e-9);
                if d.state != DroneState::Refilling {
                    prop_assert!(d.battery <= before.battery);
                    prop_assert!(d.tank <= before.tank);
                }
                prop_assert!((0.0..=1.0).contains(&d.battery));
                prop_assert!(d.tank >= 0.0);
            }
            let u = measure_utilization(&d, total);
            prop_assert!((0.0..=1.0).contains(&u));
            prop_assert!((u * total - busy).abs() < 1e-6);
        }
    }
}
