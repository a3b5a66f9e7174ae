//! Link throughput, signal-time sampling, coverage makespan and fleet
//! utilisation statistics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fleet::{DroneId, DroneState};

/// Payload bytes per packet.
pub const PACKET_BYTES: f64 = 256.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("invalid link sample: {0}")]
    BadSample(&'static str),
    #[error("triangular model needs min <= mode <= max, got ({0}, {1}, {2})")]
    BadTriangle(f64, f64, f64),
    #[error("invalid coverage model: {0}")]
    BadCoverage(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub packets_success: u64,
    /// bit error ratio
    pub ber: f64,
    /// seconds
    pub transmission_time: f64,
}

impl LinkSample {
    pub fn new(packets_success: u64, ber: f64, transmission_time: f64) -> Result<Self, MetricsError> {
        if !(0.0..=1.0).contains(&ber) {
            return Err(MetricsError::BadSample("ber must lie in [0, 1]"));
        }
        if !(transmission_time.is_finite() && transmission_time > 0.0) {
            return Err(MetricsError::BadSample("transmission time must be positive"));
        }
        Ok(LinkSample { packets_success, ber, transmission_time })
    }
}

/// Bits per second delivered: `256 · 8 · N · (1 − BER) / T`.
pub fn throughput(s: &LinkSample) -> f64 {
    PACKET_BYTES * 8.0 * s.packets_success as f64 * (1.0 - s.ber) / s.transmission_time
}

/// Triangular distribution of the time needed to get a signal to a drone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalTimeModel {
    pub min: f64,
    pub mode: f64,
    pub max: f64,
}

impl Default for SignalTimeModel {
    /// Support 0–10 s with the mode placed so the mean is 4.1 s.
    fn default() -> Self {
        SignalTimeModel { min: 0.0, mode: 2.3, max: 10.0 }
    }
}

impl SignalTimeModel {
    pub fn new(min: f64, mode: f64, max: f64) -> Result<Self, MetricsError> {
        let m = SignalTimeModel { min, mode, max };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let ok = [self.min, self.mode, self.max].iter().all(|v| v.is_finite())
            && self.min <= self.mode
            && self.mode <= self.max;
        if ok {
            Ok(())
        } else {
            Err(MetricsError::BadTriangle(self.min, self.mode, self.max))
        }
    }

    pub fn mean(&self) -> f64 {
        (self.min + self.mode + self.max) / 3.0
    }

    pub fn std_dev(&self) -> f64 {
        let (a, c, b) = (self.min, self.mode, self.max);
        ((a * a + b * b + c * c - a * b - a * c - b * c) / 18.0).sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (a, c, b) = (self.min, self.mode, self.max);
        if x <= a {
            0.0
        } else if x >= b {
            1.0
        } else if x <= c {
            (x - a) * (x - a) / ((b - a) * (c - a))
        } else {
            1.0 - (b - x) * (b - x) / ((b - a) * (b - c))
        }
    }

    /// Inverse CDF at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let (a, c, b) = (self.min, self.mode, self.max);
        if b == a {
            return a;
        }
        let split = (c - a) / (b - a);
        if u < split {
            a + (u * (b - a) * (c - a)).sqrt()
        } else {
            b - ((1.0 - u) * (b - a) * (b - c)).sqrt()
        }
    }
}

pub fn sample_signal_time<R: Rng + ?Sized>(m: &SignalTimeModel, rng: &mut R) -> f64 {
    m.quantile(rng.gen::<f64>())
}

/// Drones sweeping a route in sorties, served at depots between sorties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverageModel {
    /// route kilometres sprayed per minute of spraying
    pub per_drone_rate: f64,
    /// minutes
    pub refill_time: f64,
    /// minutes
    pub recharge_time: f64,
    /// service bays per depot
    pub depot_servers: usize,
    /// drones sharing one depot; more drones open more depots
    pub drones_per_depot: usize,
    /// minutes of spraying per sortie
    pub sortie_time: f64,
}

impl Default for CoverageModel {
    fn default() -> Self {
        CoverageModel {
            // 5 m/s
            per_drone_rate: 0.3,
            refill_time: 5.0,
            recharge_time: 40.0,
            depot_servers: 6,
            drones_per_depot: 10,
            sortie_time: 12.5,
        }
    }
}

impl CoverageModel {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.per_drone_rate) {
            return Err(MetricsError::BadCoverage("per_drone_rate must be positive"));
        }
        if !pos(self.refill_time) || !pos(self.recharge_time) {
            return Err(MetricsError::BadCoverage("service times must be positive"));
        }
        if !pos(self.sortie_time) {
            return Err(MetricsError::BadCoverage("sortie_time must be positive"));
        }
        if self.depot_servers == 0 || self.drones_per_depot == 0 {
            return Err(MetricsError::BadCoverage("depots need at least one bay and one drone"));
        }
        Ok(())
    }

    pub fn service_time(&self) -> f64 {
        self.recharge_time + self.refill_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Return {
    at: f64,
    drone: usize,
}

impl Eq for Return {}

impl Ord for Return {
    // reversed for a min-heap on (time, drone)
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.total_cmp(&self.at).then(other.drone.cmp(&self.drone))
    }
}

impl PartialOrd for Return {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minutes until `total` route kilometres are sprayed by `drones` drones.
///
/// Every drone starts full and claims up to one sortie of the remaining
/// route. Back at its depot it waits for a free bay, is recharged and
/// refilled, and claims the next sortie. Depots are opened one per
/// `drones_per_depot` drones. The makespan is when the last sortie ends.
pub fn coverage_time(total: f64, drones: usize, cm: &CoverageModel) -> f64 {
    if total.is_nan() || total <= 0.0 || drones == 0 {
        return 0.0;
    }
    let mut remaining = total / cm.per_drone_rate;
    let eps = 1e-9 * remaining.max(1.0);
    let depots = drones.div_ceil(cm.drones_per_depot);
    let mut bays: Vec<Vec<f64>> = vec![vec![0.0; cm.depot_servers]; depots];
    let mut queue = BinaryHeap::new();
    let mut makespan: f64 = 0.0;
    let claim = |remaining: &mut f64| {
        let c = cm.sortie_time.min(*remaining);
        *remaining -= c;
        if *remaining < eps {
            *remaining = 0.0;
        }
        c
    };
    for drone in 0..drones {
        if remaining <= 0.0 {
            break;
        }
        let c = claim(&mut remaining);
        makespan = makespan.max(c);
        queue.push(Return { at: c, drone });
    }
    while let Some(Return { at, drone }) = queue.pop() {
        if remaining <= 0.0 {
            continue;
        }
        let depot = &mut bays[drone / cm.drones_per_depot];
        let bay = depot
            .iter_mut()
            .min_by(|a, b| a.total_cmp(b))
            .expect("depot has bays");
        let start = at.max(*bay);
        let ready = start + cm.service_time();
        *bay = ready;
        let c = claim(&mut remaining);
        makespan = makespan.max(ready + c);
        queue.push(Return { at: ready + c, drone });
    }
    makespan
}

/// Finds the spray rate for which `drones` drones need `target` minutes for
/// `total` kilometres, keeping the rest of `base`.
pub fn calibrate_rate(total: f64, drones: usize, target: f64, base: &CoverageModel) -> CoverageModel {
    let at = |rate: f64| coverage_time(total, drones, &CoverageModel { per_drone_rate: rate, ..*base });
    let (mut lo, mut hi) = (1e-9_f64, 1e9_f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick whichever bracket lands nearer the target
    let rate = if (at(lo) - target).abs() <= (at(hi) - target).abs() { lo } else { hi };
    CoverageModel { per_drone_rate: rate, ..*base }
}

/// A drone's state from `tick` onwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRecord {
    pub tick: u64,
    pub drone: DroneId,
    pub state: DroneState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilizationWindow {
    pub start: u64,
    pub end: u64,
    /// drone-ticks spent active
    pub busy: u64,
    /// dispatches starting in this window
    pub dispatches: u64,
    /// dispatches since the start of the log; a re-used drone counts again
    pub cumulative_dispatches: u64,
    pub mean_utilization: f64,
    pub max_utilization: f64,
}

fn timelines(records: &[StateRecord]) -> BTreeMap<DroneId, Vec<(u64, DroneState)>> {
    let mut out: BTreeMap<DroneId, Vec<(u64, DroneState)>> = BTreeMap::new();
    for r in records {
        out.entry(r.drone).or_default().push((r.tick, r.state));
    }
    out
}

/// Per-window fleet statistics over `[0, horizon)`, windows of `window`
/// ticks. The last window may be shorter.
pub fn utilization_series(records: &[StateRecord], window: u64, horizon: u64) -> Vec<UtilizationWindow> {
    let window = window.max(1);
    let lines = timelines(records);
    let fleet = lines.len().max(1) as f64;
    let mut out = Vec::new();
    let mut cumulative = 0;
    let mut start = 0;
    while start < horizon {
        let end = (start + window).min(horizon);
        let span = (end - start) as f64;
        let mut busy = 0;
        let mut dispatches = 0;
        let mut max_u: f64 = 0.0;
        for line in lines.values() {
            let mut drone_busy = 0;
            let mut prev = DroneState::Idle;
            for (i, &(t, s)) in line.iter().enumerate() {
                let next_t = line.get(i + 1).map_or(u64::MAX, |x| x.0);
                if s.is_active() {
                    let lo = t.max(start);
                    let hi = next_t.min(end);
                    if hi > lo {
                        drone_busy += hi - lo;
                    }
                }
                if s.is_in_use() && !prev.is_in_use() && (start..end).contains(&t) {
                    dispatches += 1;
                }
                prev = s;
            }
            busy += drone_busy;
            max_u = max_u.max(drone_busy as f64 / span);
        }
        cumulative += dispatches;
        out.push(UtilizationWindow {
            start,
            end,
            busy,
            dispatches,
            cumulative_dispatches: cumulative,
            mean_utilization: busy as f64 / (span * fleet),
            max_utilization: max_u,
        });
        start = end;
    }
    out
}

/// Drones neither idle nor recalled at tick `t`.
pub fn drones_in_use(records: &[StateRecord], t: u64) -> usize {
    timelines(records)
        .values()
        .filter(|line| {
            line.iter().take_while(|(tick, _)| *tick <= t).last().is_some_and(|(_, s)| s.is_in_use())
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(&LinkSample::new(500, 1.0, 0.2).unwrap()), 0.0);
        let v = throughput(&LinkSample::new(1000, 0.01, 0.05).unwrap());
        assert!((v - 40_550_400.0).abs() / 40_550_400.0 < 1e-12);
        assert_eq!(v.round(), 40_550_400.0);
        assert!(LinkSample::new(1, 1.5, 1.0).is_err());
        assert!(LinkSample::new(1, 0.5, 0.0).is_err());
    }

    fn exact(n: u64, ber: Ratio<i128>, t: Ratio<i128>) -> Ratio<i128> {
        Ratio::from_integer(256 * 8 * n as i128) * (Ratio::from_integer(1) - ber) / t
    }

    #[test]
    fn throughput_matches_rational_arithmetic() {
        // dyadic inputs are exact in binary floating point
        let cases = [(1000u64, (1, 4), (1, 2)), (7, (3, 8), (1, 16)), (123_456, (0, 1), (5, 4)), (1, (1, 1), (1, 1))];
        for (n, (bn, bd), (tn, td)) in cases {
            let ber = Ratio::new(bn, bd);
            let t = Ratio::new(tn, td);
            let s = LinkSample::new(n, bn as f64 / bd as f64, tn as f64 / td as f64).unwrap();
            let want = exact(n, ber, t);
            assert_eq!(throughput(&s), *want.numer() as f64 / *want.denom() as f64);
        }
        let want = exact(1000, Ratio::new(1, 100), Ratio::new(5, 100));
        assert_eq!(want, Ratio::from_integer(40_550_400));
    }

    proptest! {
        #[test]
        fn throughput_scaling(n in 0u64..1_000_000, ber in 0.0f64..=1.0, t in 0.001f64..10.0) {
            let base = throughput(&LinkSample::new(n, ber, t).unwrap());
            let doubled_n = throughput(&LinkSample::new(2 * n, ber, t).unwrap());
            let halved_t = throughput(&LinkSample::new(n, ber, t / 2.0).unwrap());
            prop_assert!((doubled_n - 2.0 * base).abs() <= 1e-9 * base.max(1.0));
            prop_assert!((halved_t - 2.0 * base).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn quantile_inverts_cdf(a in -5.0f64..5.0, w1 in 0.0f64..5.0, w2 in 0.0f64..5.0, u in 0.0f64..1.0) {
            let m = SignalTimeModel::new(a, a + w1, a + w1 + w2).unwrap();
            let x = m.quantile(u);
            prop_assert!(x >= m.min && x <= m.max);
            if m.max > m.min {
                prop_assert!((m.cdf(x) - u).abs() < 1e-9);
            }
        }

        #[test]
        fn coverage_monotone(total in 1.0f64..2000.0, k in 1usize..40, extra in 1usize..20) {
            let cm = CoverageModel { per_drone_rate: 0.1, ..CoverageModel::default() };
            let few = coverage_time(total, k, &cm);
            let more = coverage_time(total, k + extra, &cm);
            prop_assert!(more <= few + 1e-9, "{} drones {} > {} drones {}", k + extra, more, k, few);
            let longer = coverage_time(total * 1.5, k, &cm);
            prop_assert!(longer >= few - 1e-9);
        }
    }

    #[test]
    fn signal_model_examples() {
        let point = SignalTimeModel::new(3.0, 3.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| sample_signal_time(&point, &mut rng) == 3.0));
        let m = SignalTimeModel::default();
        assert!((m.mean() - 4.1).abs() < 1e-12);
        // the widest triangle on [0, 10] has std 10/sqrt(18) ≈ 2.36, below 3.7
        assert!(m.std_dev() < 2.4);
        assert!(SignalTimeModel::new(1.0, 0.5, 2.0).is_err());
        let draws: Vec<f64> = (0..10_000).map(|_| sample_signal_time(&m, &mut rng)).collect();
        assert!(draws.iter().all(|&x| (0.0..10.0).contains(&x)));
    }

    #[test]
    fn single_drone_without_refills() {
        let cm = CoverageModel { per_drone_rate: 2.0, ..CoverageModel::default() };
        assert!((coverage_time(20.0, 1, &cm) - 10.0).abs() < 1e-12);
        // two sorties: 12.5 min, 45 min of service, 2.5 min more
        assert!((coverage_time(30.0, 1, &cm) - 60.0).abs() < 1e-9);
    }

    #[test]
    fn calibration_hits_target() {
        let cm = calibrate_rate(1200.0, 3, 18_900.0, &CoverageModel::default());
        let t = coverage_time(1200.0, 3, &cm);
        assert!((t - 18_900.0).abs() < cm.service_time() + cm.sortie_time, "{t}");
    }

    fn rec(tick: u64, d: u32, state: DroneState) -> StateRecord {
        StateRecord { tick, drone: DroneId(d), state }
    }

    #[test]
    fn utilization_windows() {
        assert_eq!(utilization_series(&[], 60, 120)[0].cumulative_dispatches, 0);
        let idle = [rec(0, 0, DroneState::Idle), rec(0, 1, DroneState::Idle)];
        let w = utilization_series(&idle, 60, 120);
        assert!(w.iter().all(|x| x.mean_utilization == 0.0 && x.cumulative_dispatches == 0));

        let mut log = vec![rec(0, 0, DroneState::Idle)];
        for k in 0..3 {
            log.push(rec(10 + 100 * k, 0, DroneState::Scanning));
            log.push(rec(40 + 100 * k, 0, DroneState::Idle));
        }
        let w = utilization_series(&log, 100, 300);
        assert_eq!(w.last().unwrap().cumulative_dispatches, 3);
        assert!(w.iter().all(|x| (x.mean_utilization - 0.3).abs() < 1e-12));
        assert_eq!(w.iter().map(|x| x.busy).sum::<u64>(), 90);
    }

    #[test]
    fn in_use_counts() {
        let idle: Vec<_> = (0..5).map(|d| rec(0, d, DroneState::Idle)).collect();
        assert_eq!(drones_in_use(&idle, 10), 0);
        let mut log = Vec::new();
        let states = [
            DroneState::Scanning,
            DroneState::Sanitizing,
            DroneState::Transferring,
            DroneState::WaitingInTransferArea,
            DroneState::Refilling,
            DroneState::Scanning,
            DroneState::Sanitizing,
            DroneState::Idle,
            DroneState::Recalled,
        ];
        for (d, s) in states.iter().enumerate() {
            log.push(rec(0, d as u32, DroneState::Idle));
            log.push(rec(5, d as u32, *s));
        }
        assert_eq!(drones_in_use(&log, 5), 7);
        assert_eq!(drones_in_use(&log, 4), 0);
    }

    proptest! {
        #[test]
        fn windows_tile_busy_time(changes in prop::collection::vec((0u64..1000, 0u32..4, 0usize..7), 1..80), w in 1u64..300) {
            let mut log: Vec<_> = changes.iter().map(|&(t, d, s)| rec(t, d, DroneState::ALL[s])).collect();
            log.sort_by_key(|r| (r.tick, r.drone));
            log.dedup_by_key(|r| (r.tick, r.drone));
            let total: u64 = utilization_series(&log, 1000, 1000)[0].busy;
            let tiled: u64 = utilization_series(&log, w, 1000).iter().map(|x| x.busy).sum();
            prop_assert_eq!(total, tiled);
        }
    }
}
