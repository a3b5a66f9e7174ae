//! Per-zone scan cycles, fever detection, density accounting and edge-side
//! aggregation of zone statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fleet::{Drone, DroneId, DroneState};
use crate::metrics::{throughput, LinkSample};
use crate::zone_grid::{drone_zone_value, zone_of_position, GridSpec, ZoneId};

pub const DEFAULT_NORMAL_TEMPERATURE: f64 = 37.0;
pub const FEVER_MARGIN: f64 = 2.0;
pub const DEFAULT_TREND_RISES: usize = 2;
pub const SENSOR_MIN: f64 = 25.0;
pub const SENSOR_MAX: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PersonId(pub u32);

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetworkId(pub u32);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZoneOpsError {
    #[error("drone {drone} is not in zone {zone}")]
    DroneAbsent { drone: DroneId, zone: ZoneId },
    #[error("drone {0} is not scanning")]
    NotScanning(DroneId),
    #[error("need {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("temperature {0} °C outside the sensor window [25, 45]")]
    SensorRange(f64),
    #[error("window [{0}, {1}) is empty")]
    EmptyWindow(u64, u64),
    #[error("statistics come from more than one network")]
    MixedNetworks,
    #[error("statistics cover different windows")]
    MixedWindows,
    #[error("nothing to aggregate")]
    NoStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SensorSource {
    Thermal,
    Wearable,
}

/// A person on the ground as seen by the scanning drone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Person {
    pub id: PersonId,
    pub zone: ZoneId,
    /// body temperature, °C
    pub temperature: f64,
    pub source: SensorSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonObservation {
    pub person: PersonId,
    pub zone: ZoneId,
    pub timestamp: u64,
    pub temperature: f64,
    pub source: SensorSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Alarm,
    Sanitize,
    Medicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneAction {
    pub person: PersonId,
    pub kind: ActionKind,
}

/// When the next scan of a zone is due.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanClock {
    /// current scan interval δ, ticks
    pub interval: u64,
    pub next_due: u64,
    /// Double δ after every cycle instead of advancing by a fixed δ.
    pub doubling: bool,
}

impl ScanClock {
    pub fn new(interval: u64, doubling: bool) -> Self {
        ScanClock { interval: interval.max(1), next_due: 0, doubling }
    }

    pub fn advance(&mut self) {
        if self.doubling {
            self.interval = self.interval.saturating_mul(2);
        }
        self.next_due = self.next_due.saturating_add(self.interval);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub normal_temperature: f64,
    pub trend_rises: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { normal_temperature: DEFAULT_NORMAL_TEMPERATURE, trend_rises: DEFAULT_TREND_RISES }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub observations: Vec<PersonObservation>,
    pub actions: Vec<ZoneAction>,
}

/// Temperature series per person, kept across scan cycles.
pub type TemperatureHistory = BTreeMap<PersonId, Vec<(u64, f64)>>;

/// One scan of `zone` by `drone` at the clock's due tick.
///
/// Every person in the zone with a reading inside the sensor window is
/// observed. A person whose temperature keeps rising is sanitised around and
/// medicated; a reading 2 °C or more above normal raises an alarm. The clock
/// advances whether or not anyone was there.
pub fn scan_cycle(
    zone: ZoneId,
    drone: &Drone,
    persons: &[Person],
    clock: &mut ScanClock,
    history: &mut TemperatureHistory,
    cfg: &ScanConfig,
    g: &GridSpec,
) -> Result<ScanOutcome, ZoneOpsError> {
    if zone_of_position(drone.position, g).ok() != Some(zone) {
        return Err(ZoneOpsError::DroneAbsent { drone: drone.id, zone });
    }
    if drone.state != DroneState::Scanning {
        return Err(ZoneOpsError::NotScanning(drone.id));
    }
    let now = clock.next_due;
    let mut out = ScanOutcome::default();
    for p in persons.iter().filter(|p| p.zone == zone) {
        let Ok(alarm) = fever_alarm(p.temperature, cfg.normal_temperature) else {
            continue;
        };
        out.observations.push(PersonObservation {
            person: p.id,
            zone,
            timestamp: now,
            temperature: p.temperature,
            source: p.source,
        });
        let series = history.entry(p.id).or_default();
        series.push((now, p.temperature));
        if fever_trend(series, cfg.trend_rises).unwrap_or(false) {
            out.actions.push(ZoneAction { person: p.id, kind: ActionKind::Sanitize });
            out.actions.push(ZoneAction { person: p.id, kind: ActionKind::Medicate });
        }
        if alarm {
            out.actions.push(ZoneAction { person: p.id, kind: ActionKind::Alarm });
        }
    }
    clock.advance();
    Ok(out)
}

/// True when each of the last `k` successive differences is positive.
pub fn fever_trend(series: &[(u64, f64)], k: usize) -> Result<bool, ZoneOpsError> {
    if series.len() < k + 1 {
        return Err(ZoneOpsError::InsufficientData { needed: k + 1, got: series.len() });
    }
    let tail = &series[series.len() - (k + 1)..];
    Ok(tail.windows(2).all(|w| w[1].1 > w[0].1))
}

pub fn fever_alarm(t: f64, normal: f64) -> Result<bool, ZoneOpsError> {
    if !(SENSOR_MIN..=SENSOR_MAX).contains(&t) {
        return Err(ZoneOpsError::SensorRange(t));
    }
    Ok(t >= normal + FEVER_MARGIN)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QosVector {
    /// seconds
    pub mean_signal_time: f64,
    /// bits per second
    pub throughput: f64,
    pub coverage_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExperienceCounters {
    pub persons_scanned: u64,
    pub fever_alarms: u64,
    pub sanitizations: u64,
    pub medications: u64,
}

impl std::ops::Add for ExperienceCounters {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        ExperienceCounters {
            persons_scanned: self.persons_scanned + o.persons_scanned,
            fever_alarms: self.fever_alarms + o.fever_alarms,
            sanitizations: self.sanitizations + o.sanitizations,
            medications: self.medications + o.medications,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneStats {
    pub zone: ZoneId,
    pub network: NetworkId,
    pub qos: QosVector,
    pub experience: ExperienceCounters,
    /// `[start, end)` in ticks
    pub window: (u64, u64),
}

/// Zone-level facts written by the simulation, from which statistics are
/// recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OpsRecord {
    /// A drone scanned this zone.
    Visit { tick: u64, zone: ZoneId, drone: DroneId },
    Scanned { tick: u64, zone: ZoneId, person: PersonId },
    Alarm { tick: u64, zone: ZoneId, person: PersonId },
    Sanitized { tick: u64, zone: ZoneId },
    Medicated { tick: u64, zone: ZoneId, person: PersonId },
    /// Time to get a signal through to the drone, seconds.
    Signal { tick: u64, zone: ZoneId, seconds: f64 },
    Link { tick: u64, zone: ZoneId, sample: LinkSample },
}

impl OpsRecord {
    pub fn tick(&self) -> u64 {
        match *self {
            OpsRecord::Visit { tick, .. }
            | OpsRecord::Scanned { tick, .. }
            | OpsRecord::Alarm { tick, .. }
            | OpsRecord::Sanitized { tick, .. }
            | OpsRecord::Medicated { tick, .. }
            | OpsRecord::Signal { tick, .. }
            | OpsRecord::Link { tick, .. } => tick,
        }
    }

    pub fn zone(&self) -> ZoneId {
        match *self {
            OpsRecord::Visit { zone, .. }
            | OpsRecord::Scanned { zone, .. }
            | OpsRecord::Alarm { zone, .. }
            | OpsRecord::Sanitized { zone, .. }
            | OpsRecord::Medicated { zone, .. }
            | OpsRecord::Signal { zone, .. }
            | OpsRecord::Link { zone, .. } => zone,
        }
    }
}

/// Statistics of one zone over `[window.0, window.1)`.
///
/// Coverage is the share of the layer's zones visited during the window by
/// the drones that scanned this zone.
pub fn compute_zone_stats(
    zone: ZoneId,
    network: NetworkId,
    window: (u64, u64),
    log: &[OpsRecord],
    g: &GridSpec,
) -> Result<ZoneStats, ZoneOpsError> {
    if window.0 >= window.1 {
        return Err(ZoneOpsError::EmptyWindow(window.0, window.1));
    }
    let inside = |r: &&OpsRecord| (window.0..window.1).contains(&r.tick());
    let mut exp = ExperienceCounters::default();
    let mut signal = (0.0, 0u64);
    let mut rate = (0.0, 0u64);
    let mut drones = BTreeSet::new();
    for r in log.iter().filter(inside).filter(|r| r.zone() == zone) {
        match *r {
            OpsRecord::Visit { drone, .. } => {
                drones.insert(drone);
            }
            OpsRecord::Scanned { .. } => exp.persons_scanned += 1,
            OpsRecord::Alarm { .. } => exp.fever_alarms += 1,
            OpsRecord::Sanitized { .. } => exp.sanitizations += 1,
            OpsRecord::Medicated { .. } => exp.medications += 1,
            OpsRecord::Signal { seconds, .. } => {
                signal.0 += seconds;
                signal.1 += 1;
            }
            OpsRecord::Link { sample, .. } => {
                rate.0 += throughput(&sample);
                rate.1 += 1;
            }
        }
    }
    let visited: BTreeSet<ZoneId> = log
        .iter()
        .filter(inside)
        .filter_map(|r| match *r {
            OpsRecord::Visit { zone: z, drone, .. } if drones.contains(&drone) && z.layer == zone.layer => Some(z),
            _ => None,
        })
        .collect();
    let mean = |(sum, count): (f64, u64)| if count == 0 { 0.0 } else { sum / count as f64 };
    Ok(ZoneStats {
        zone,
        network,
        qos: QosVector {
            mean_signal_time: mean(signal),
            throughput: mean(rate),
            coverage_fraction: visited.len() as f64 / g.zones_per_layer() as f64,
        },
        experience: exp,
        window,
    })
}

/// What the edge node of one network sees: averaged quality, summed
/// counters, and the untouched per-zone inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub network: NetworkId,
    pub window: (u64, u64),
    pub qos: QosVector,
    pub experience: ExperienceCounters,
    pub zones: Vec<ZoneStats>,
}

pub fn edge_aggregate(stats: &[ZoneStats]) -> Result<NetworkSummary, ZoneOpsError> {
    let first = stats.first().ok_or(ZoneOpsError::NoStats)?;
    if stats.iter().any(|s| s.network != first.network) {
        return Err(ZoneOpsError::MixedNetworks);
    }
    if stats.iter().any(|s| s.window != first.window) {
        return Err(ZoneOpsError::MixedWindows);
    }
    // running mean: identical inputs give back exactly the shared value
    let mean = |f: fn(&QosVector) -> f64| {
        stats.iter().enumerate().fold(0.0, |m, (i, s)| m + (f(&s.qos) - m) / (i + 1) as f64)
    };
    Ok(NetworkSummary {
        network: first.network,
        window: first.window,
        qos: QosVector {
            mean_signal_time: mean(|q| q.mean_signal_time),
            throughput: mean(|q| q.throughput),
            coverage_fraction: mean(|q| q.coverage_fraction),
        },
        experience: stats.iter().fold(ExperienceCounters::default(), |acc, s| acc + s.experience),
        zones: stats.to_vec(),
    })
}

/// A person seen in a zone at a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceSample {
    pub tick: u64,
    pub zone: ZoneId,
}

/// Person-presence counts per zone of one layer, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityMap {
    pub n: usize,
    pub layer: usize,
    pub counts: Vec<u64>,
}

impl DensityMap {
    pub fn zeros(n: usize, layer: usize) -> Self {
        DensityMap { n, layer, counts: vec![0; n * n] }
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.n + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &DensityMap) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Counts presence samples on `layer` with tick in `[window.0, window.1)`.
pub fn density_map(samples: &[PresenceSample], window: (u64, u64), n: usize, layer: usize) -> DensityMap {
    let mut dm = DensityMap::zeros(n, layer);
    for s in samples {
        if (window.0..window.1).contains(&s.tick) && s.zone.layer == layer && s.zone.row < n && s.zone.col < n {
            dm.counts[s.zone.row * n + s.zone.col] += 1;
        }
    }
    dm
}

/// Zones busiest first; ties in zone ordinal order.
pub fn sanitization_priority(dm: &DensityMap) -> Vec<ZoneId> {
    let mut zones: Vec<(u64, usize, ZoneId)> = (0..dm.n * dm.n)
        .map(|i| {
            let (row, col) = (i / dm.n, i % dm.n);
            let ordinal = drone_zone_value(row, col, dm.n).expect("inside map");
            (dm.counts[i], ordinal, ZoneId::new(row, col, dm.layer))
        })
        .collect();
    zones.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    zones.into_iter().map(|(_, _, z)| z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{create_fleet, FleetConfig};
    use crate::zone_grid::zone_center;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridSpec {
        GridSpec::new(3, 10.0, 1).unwrap()
    }

    fn scanning_drone_in(z: ZoneId) -> Drone {
        let g = grid();
        let mut d = create_fleet(1, &g, 0, &FleetConfig::default()).unwrap().remove(0);
        d.position = zone_center(z, &g);
        d.set_state(DroneState::Scanning);
        d
    }

    fn person(id: u32, zone: ZoneId, t: f64) -> Person {
        Person { id: PersonId(id), zone, temperature: t, source: SensorSource::Thermal }
    }

    #[test]
    fn steady_afebrile_zone() {
        let z = ZoneId::new(1, 1, 0);
        let d = scanning_drone_in(z);
        let people: Vec<_> = (0..3).map(|i| person(i, z, 36.6)).collect();
        let mut clock = ScanClock::new(60, false);
        let mut hist = TemperatureHistory::new();
        for _ in 0..3 {
            let out = scan_cycle(z, &d, &people, &mut clock, &mut hist, &ScanConfig::default(), &grid()).unwrap();
            assert_eq!(out.observations.len(), 3);
            assert!(out.actions.is_empty());
        }
        assert_eq!(clock.next_due, 180);
    }

    #[test]
    fn rising_temperature_triggers_care() {
        let z = ZoneId::new(0, 2, 0);
        let d = scanning_drone_in(z);
        let mut clock = ScanClock::new(60, false);
        let mut hist = TemperatureHistory::new();
        let mut last = ScanOutcome::default();
        for t in [37.0, 37.8, 38.5] {
            last = scan_cycle(z, &d, &[person(4, z, t)], &mut clock, &mut hist, &ScanConfig::default(), &grid()).unwrap();
        }
        assert!(last.actions.contains(&ZoneAction { person: PersonId(4), kind: ActionKind::Sanitize }));
        assert!(last.actions.contains(&ZoneAction { person: PersonId(4), kind: ActionKind::Medicate }));
        assert!(!last.actions.iter().any(|a| a.kind == ActionKind::Alarm));
    }

    #[test]
    fn empty_zone_still_advances() {
        let z = ZoneId::new(0, 0, 0);
        let d = scanning_drone_in(z);
        let mut clock = ScanClock::new(30, false);
        let mut hist = TemperatureHistory::new();
        let out = scan_cycle(z, &d, &[], &mut clock, &mut hist, &ScanConfig::default(), &grid()).unwrap();
        assert_eq!(out, ScanOutcome::default());
        assert_eq!(clock.next_due, 30);

        let mut doubling = ScanClock::new(30, true);
        doubling.advance();
        doubling.advance();
        assert_eq!((doubling.interval, doubling.next_due), (120, 180));
    }

    #[test]
    fn absent_drone_rejected() {
        let d = scanning_drone_in(ZoneId::new(0, 0, 0));
        let mut clock = ScanClock::new(30, false);
        let err = scan_cycle(
            ZoneId::new(2, 2, 0),
            &d,
            &[],
            &mut clock,
            &mut TemperatureHistory::new(),
            &ScanConfig::default(),
            &grid(),
        );
        assert!(matches!(err, Err(ZoneOpsError::DroneAbsent { .. })));
    }

    #[test]
    fn trend_and_alarm_examples() {
        let s = |v: &[f64]| v.iter().enumerate().map(|(i, &t)| (i as u64, t)).collect::<Vec<_>>();
        assert_eq!(fever_trend(&s(&[37.0, 37.8, 38.5]), 2), Ok(true));
        assert_eq!(fever_trend(&s(&[36.5, 36.6, 36.4]), 2), Ok(false));
        assert_eq!(
            fever_trend(&s(&[37.0]), 2),
            Err(ZoneOpsError::InsufficientData { needed: 3, got: 1 })
        );
        assert_eq!(fever_alarm(39.2, 37.0), Ok(true));
        assert_eq!(fever_alarm(38.9, 37.0), Ok(false));
        assert_eq!(fever_alarm(37.0, 37.0), Ok(false));
        assert_eq!(fever_alarm(46.0, 37.0), Err(ZoneOpsError::SensorRange(46.0)));
    }

    fn zstats(zone: ZoneId, tp: f64, c: (u64, u64, u64, u64)) -> ZoneStats {
        ZoneStats {
            zone,
            network: NetworkId(1),
            qos: QosVector { mean_signal_time: 4.0, throughput: tp, coverage_fraction: 0.5 },
            experience: ExperienceCounters { persons_scanned: c.0, fever_alarms: c.1, sanitizations: c.2, medications: c.3 },
            window: (0, 600),
        }
    }

    #[test]
    fn zone_stats_from_log() {
        let g = grid();
        let z = ZoneId::new(1, 1, 0);
        assert_eq!(
            compute_zone_stats(z, NetworkId(0), (5, 5), &[], &g),
            Err(ZoneOpsError::EmptyWindow(5, 5))
        );
        let empty = compute_zone_stats(z, NetworkId(0), (0, 100), &[], &g).unwrap();
        assert_eq!(empty.experience, ExperienceCounters::default());
        assert_eq!(empty.qos.coverage_fraction, 0.0);

        let mut log = Vec::new();
        for i in 0..10 {
            log.push(OpsRecord::Scanned { tick: i, zone: z, person: PersonId(i as u32) });
        }
        log.push(OpsRecord::Alarm { tick: 3, zone: z, person: PersonId(3) });
        log.push(OpsRecord::Alarm { tick: 4, zone: z, person: PersonId(4) });
        log.push(OpsRecord::Sanitized { tick: 5, zone: z });
        // the drone scanning this zone also visited five others
        let d = DroneId(7);
        for (i, zz) in g.zones_in_layer(0).take(6).enumerate() {
            log.push(OpsRecord::Visit { tick: 20 + i as u64, zone: zz, drone: d });
        }
        log.push(OpsRecord::Visit { tick: 30, zone: z, drone: d });
        // outside the window
        log.push(OpsRecord::Scanned { tick: 200, zone: z, person: PersonId(99) });
        let s = compute_zone_stats(z, NetworkId(0), (0, 100), &log, &g).unwrap();
        assert_eq!(
            s.experience,
            ExperienceCounters { persons_scanned: 10, fever_alarms: 2, sanitizations: 1, medications: 0 }
        );
        assert!((s.qos.coverage_fraction - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(compute_zone_stats(z, NetworkId(0), (0, 100), &log, &g).unwrap(), s);
    }

    #[test]
    fn aggregation_examples() {
        let a = zstats(ZoneId::new(0, 0, 0), 40e6, (10, 2, 1, 0));
        let b = zstats(ZoneId::new(0, 1, 0), 60e6, (5, 1, 0, 1));
        let one = edge_aggregate(std::slice::from_ref(&a)).unwrap();
        assert_eq!(one.qos, a.qos);
        assert_eq!(one.experience, a.experience);
        let two = edge_aggregate(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(two.qos.throughput, 50e6);
        assert_eq!(
            two.experience,
            ExperienceCounters { persons_scanned: 15, fever_alarms: 3, sanitizations: 1, medications: 1 }
        );
        assert_eq!(two.zones.len(), 2);
        let mut other = b.clone();
        other.network = NetworkId(2);
        assert_eq!(edge_aggregate(&[a.clone(), other]), Err(ZoneOpsError::MixedNetworks));
        let mut later = b;
        later.window = (600, 1200);
        assert_eq!(edge_aggregate(&[a, later]), Err(ZoneOpsError::MixedWindows));
        assert_eq!(edge_aggregate(&[]), Err(ZoneOpsError::NoStats));
    }

    #[test]
    fn density_examples() {
        let n = 3;
        assert_eq!(density_map(&[], (0, 100), n, 0).total(), 0);
        let parked: Vec<_> = (0..10).map(|t| PresenceSample { tick: t, zone: ZoneId::new(1, 1, 0) }).collect();
        let dm = density_map(&parked, (0, 100), n, 0);
        assert_eq!(dm.get(1, 1), 10);
        assert_eq!(dm.total(), 10);

        // a long uniform random walk spreads evenly
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut r, mut c) = (1usize, 1usize);
        let mut walk = Vec::new();
        for t in 0..100_000u64 {
            match rng.gen_range(0..4) {
                0 if r > 0 => r -= 1,
                1 if r + 1 < n => r += 1,
                2 if c > 0 => c -= 1,
                3 if c + 1 < n => c += 1,
                _ => {}
            }
            walk.push(PresenceSample { tick: t, zone: ZoneId::new(r, c, 0) });
        }
        let dm = density_map(&walk, (0, 100_000), n, 0);
        let max = *dm.counts.iter().max().unwrap() as f64;
        let min = *dm.counts.iter().min().unwrap() as f64;
        assert!(max / min < 1.1, "ratio {}", max / min);
    }

    #[test]
    fn priority_order() {
        let zero = DensityMap::zeros(2, 0);
        assert_eq!(
            sanitization_priority(&zero),
            vec![ZoneId::new(0, 0, 0), ZoneId::new(0, 1, 0), ZoneId::new(1, 0, 0), ZoneId::new(1, 1, 0)]
        );
        let dm = DensityMap { n: 2, layer: 0, counts: vec![5, 9, 1, 0] };
        let order = sanitization_priority(&dm);
        assert_eq!(&order[..3], &[ZoneId::new(0, 1, 0), ZoneId::new(0, 0, 0), ZoneId::new(1, 0, 0)]);
        assert_eq!(sanitization_priority(&DensityMap::zeros(1, 0)), vec![ZoneId::new(0, 0, 0)]);
    }

    proptest! {
        #[test]
        fn alarm_monotone(t in 25.0f64..45.0, dt in 0.0f64..20.0, normal in 35.0f64..38.0) {
            let t2 = (t + dt).min(45.0);
            if fever_alarm(t, normal).unwrap() {
                prop_assert!(fever_alarm(t2, normal).unwrap());
            }
        }

        #[test]
        fn trend_shift_invariant(v in prop::collection::vec(30.0f64..40.0, 3..10), shift in -3.0f64..3.0, k in 1usize..3) {
            let a: Vec<_> = v.iter().enumerate().map(|(i, &t)| (i as u64, t)).collect();
            let b: Vec<_> = v.iter().enumerate().map(|(i, &t)| (i as u64, t + shift)).collect();
            // a constant shift can flip a difference only when it is within rounding of zero
            let diffs_clear = v.windows(2).all(|w| (w[1] - w[0]).abs() > 1e-9);
            if diffs_clear {
                prop_assert_eq!(fever_trend(&a, k), fever_trend(&b, k));
            }
        }

        #[test]
        fn identical_stats_aggregate_exactly(tp in 0.0f64..1e8, st in 0.0f64..10.0, cov in 0.0f64..=1.0, k in 1usize..20, c in (0u64..100, 0u64..10, 0u64..10, 0u64..10)) {
            let mut s = zstats(ZoneId::new(0, 0, 0), tp, c);
            s.qos.mean_signal_time = st;
            s.qos.coverage_fraction = cov;
            let all = vec![s.clone(); k];
            let sum = edge_aggregate(&all).unwrap();
            prop_assert_eq!(sum.qos, s.qos);
            let k = k as u64;
            prop_assert_eq!(sum.experience, ExperienceCounters {
                persons_scanned: c.0 * k, fever_alarms: c.1 * k, sanitizations: c.2 * k, medications: c.3 * k,
            });
        }

        #[test]
        fn density_conserves_over_partitions(ticks in prop::collection::vec((0u64..1000, 0usize..4, 0usize..4), 0..300), cut in 0u64..1000) {
            let samples: Vec<_> = ticks.iter().map(|&(t, r, c)| PresenceSample { tick: t, zone: ZoneId::new(r, c, 0) }).collect();
            let whole = density_map(&samples, (0, 1000), 4, 0);
            let mut parts = density_map(&samples, (0, cut), 4, 0);
            parts.merge(&density_map(&samples, (cut, 1000), 4, 0));
            prop_assert_eq!(whole.total(), samples.len() as u64);
            prop_assert_eq!(parts, whole);
        }
    }
}
