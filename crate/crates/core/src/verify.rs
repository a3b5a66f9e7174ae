//! Oracle suites run by `swarmzones verify`.
//!
//! Each suite takes the function under test as an argument where a broken
//! implementation is worth simulating, so tests can hand in known-bad
//! mutants and watch the suite catch them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distancing::{
    detect_violations, measure_distance, pixel_ratio_distance, tunnel_distance, tunnel_error_bound, CameraModel,
    DetectionMode, DistanceMethod, GeoPoint, Location, QueuePerson, EARTH_RADIUS_KM,
};
use crate::fleet::DroneId;
use crate::oracles::{brute_force_violations, chord, diagonal_enumeration_oracle, haversine, occupancy_conflict};
use crate::transfer::{
    Cell, ParallelSweep, RequestId, RequestStatus, RowAssignment, Strategy, SwapRequest, TransferEngine, TransferError,
    ZigzagPipeline,
};
use crate::zone_grid::{drone_zone_value, neighbors_of, GridSpec, ZoneId};

pub const BIJECTION_MAX_N: usize = 40;
pub const DISTANCE_PAIRS: usize = 1000;
pub const VIOLATION_CONFIGS: usize = 1000;
pub const COLLISION_STEPS: u64 = 100_000;
/// Allowed relative gap between the vector chord and `2R·sin(σ/2)`.
pub const CHORD_REL_TOL: f64 = 1e-12;
/// Allowed `|haversine − chord|` as a multiple of the cubic error term.
pub const ARC_GAP_FACTOR: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: u64,
    /// first counterexample found
    pub failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            None => write!(f, "{}: {} cases, ok", self.name, self.cases),
            Some(c) => write!(f, "{}: {} cases, FAILED: {c}", self.name, self.cases),
        }
    }
}

fn report(name: &'static str, cases: u64, failure: Option<String>) -> SuiteReport {
    SuiteReport { name, cases, failure }
}

pub type ZoneValueFn = dyn Fn(usize, usize, usize) -> Option<usize> + Sync;
pub type PairDistanceFn = dyn Fn(&QueuePerson, &QueuePerson, &CameraModel) -> Option<f64> + Sync;

pub fn zone_value(a: usize, b: usize, n: usize) -> Option<usize> {
    drone_zone_value(a, b, n).ok()
}

pub fn pixel_ratio(a: &QueuePerson, b: &QueuePerson, cam: &CameraModel) -> Option<f64> {
    pixel_ratio_distance(a, b, cam).ok()
}

/// Every cell of every grid up to `max_n` gets a distinct ordinal below
/// n², equal to its position in the brute-force diagonal enumeration.
pub fn bijection_suite(value: &ZoneValueFn, max_n: usize) -> SuiteReport {
    let mut cases = 0;
    for n in 1..=max_n {
        let mut owner: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for a in 0..n {
            for b in 0..n {
                cases += 1;
                let Some(v) = value(a, b, n) else {
                    return report("bijection", cases, Some(format!("n={n}: no ordinal for ({a},{b})")));
                };
                if v >= n * n {
                    return report("bijection", cases, Some(format!("n={n}: ordinal {v} of ({a},{b}) is out of range")));
                }
                if let Some(prev) = owner.insert(v, (a, b)) {
                    return report(
                        "bijection",
                        cases,
                        Some(format!("n={n}: duplicate ordinal {v} for {prev:?} and ({a},{b})")),
                    );
                }
            }
        }
        for (k, &(a, b)) in diagonal_enumeration_oracle(n).iter().enumerate() {
            if owner.get(&k) != Some(&(a, b)) {
                return report(
                    "bijection",
                    cases,
                    Some(format!("n={n}: ordinal {k} belongs to ({a},{b}) but was given to {:?}", owner.get(&k))),
                );
            }
        }
    }
    report("bijection", cases, None)
}

fn random_geo(rng: &mut impl Rng) -> GeoPoint {
    // uniform on the sphere
    let z: f64 = rng.gen_range(-1.0..1.0);
    GeoPoint { lat: z.asin().to_degrees(), lon: rng.gen_range(-180.0..180.0) }
}

/// A point `km` kilometres from `p` along a random bearing.
fn geo_at_distance(p: GeoPoint, km: f64, rng: &mut impl Rng) -> GeoPoint {
    let delta = km / EARTH_RADIUS_KM;
    let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (phi1, lam1) = (p.lat.to_radians(), p.lon.to_radians());
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
    let lam2 = lam1 + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    GeoPoint { lat: phi2.to_degrees(), lon: lam2.to_degrees() }
}

fn imaged_person(i: u32, rng: &mut impl Rng) -> QueuePerson {
    let mut p = QueuePerson::at(i, 0, Location::Pixel { u: rng.gen_range(0.0..5472.0), v: rng.gen_range(0.0..3648.0) });
    p.apparent_length = Some(rng.gen_range(1.4..2.0));
    p.pixel_extent = Some(rng.gen_range(20.0..400.0));
    p
}

/// Chord against `2R·sin(σ/2)`, the arc–chord gap against its cubic
/// bound, and symmetry and sign of every pairwise method.
pub fn distance_suite(pixel_ratio: &PairDistanceFn, pairs: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam = CameraModel::default();
    let r = EARTH_RADIUS_KM;
    let mut cases = 0;
    for _ in 0..pairs {
        cases += 1;
        let (a, b) = (random_geo(&mut rng), random_geo(&mut rng));
        let (t, c) = (tunnel_distance(a, b, r), chord(a, b, r));
        if (t - c).abs() > CHORD_REL_TOL * c.max(f64::MIN_POSITIVE) {
            return report("distance", cases, Some(format!("chord {a:?}-{b:?}: tunnel {t} vs oracle {c}")));
        }

        let near = geo_at_distance(a, rng.gen_range(10.0..1000.0), &mut rng);
        let (arc, t) = (haversine(a, near, r), tunnel_distance(a, near, r));
        if (arc - t).abs() > ARC_GAP_FACTOR * tunnel_error_bound(arc, r) {
            return report(
                "distance",
                cases,
                Some(format!("arc gap {a:?}-{near:?}: |{arc} - {t}| exceeds {}", ARC_GAP_FACTOR * tunnel_error_bound(arc, r))),
            );
        }

        let (pa, pb) = (imaged_person(0, &mut rng), imaged_person(1, &mut rng));
        let planar = |rng: &mut ChaCha8Rng| QueuePerson::at(0, 0, Location::Planar { x: rng.gen_range(-50.0..50.0), y: rng.gen_range(-50.0..50.0) });
        let (qa, qb) = (planar(&mut rng), planar(&mut rng));
        let (ga, gb) = (QueuePerson::at(0, 0, Location::Geo(a)), QueuePerson::at(1, 0, Location::Geo(near)));
        let mut checks: Vec<(&str, Option<f64>, Option<f64>)> = vec![("pixel ratio", pixel_ratio(&pa, &pb, &cam), pixel_ratio(&pb, &pa, &cam))];
        for (label, m, x, y) in [
            ("ground sample", DistanceMethod::GroundSampleDistance, &qa, &qb),
            ("ground sample (image)", DistanceMethod::GroundSampleDistance, &pa, &pb),
            ("tunnel", DistanceMethod::TunnelChord, &ga, &gb),
            ("flat", DistanceMethod::FlatLatLon, &ga, &gb),
        ] {
            checks.push((label, measure_distance(x, y, m, &cam).ok(), measure_distance(y, x, m, &cam).ok()));
        }
        for (label, ab, ba) in checks {
            match (ab, ba) {
                (Some(ab), Some(ba)) if ab == ba && ab >= 0.0 => {}
                _ => {
                    return report("distance", cases, Some(format!("{label} symmetry: d(a,b)={ab:?}, d(b,a)={ba:?}")));
                }
            }
        }
    }
    report("distance", cases, None)
}

/// A random crowd for one method, packed tightly enough that violations
/// are common.
pub fn random_crowd(method: DistanceMethod, count: usize, queues: u32, rng: &mut impl Rng) -> Vec<QueuePerson> {
    let span = rng.gen_range(2.0..30.0);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let q = rng.gen_range(0..queues.max(1));
        let mut p = match method {
            DistanceMethod::TunnelChord | DistanceMethod::FlatLatLon => {
                let deg = span / 111_320.0;
                Location::Geo(GeoPoint { lat: rng.gen_range(0.0..deg), lon: rng.gen_range(0.0..deg) })
            }
            DistanceMethod::GroundSampleDistance if rng.gen_bool(0.5) => {
                Location::Planar { x: rng.gen_range(0.0..span), y: rng.gen_range(0.0..span) }
            }
            _ => Location::Pixel { u: rng.gen_range(0.0..span * 50.0), v: rng.gen_range(0.0..span * 50.0) },
        };
        if method == DistanceMethod::PixelRatio {
            p = Location::Pixel { u: 0.0, v: 0.0 };
        }
        let mut person = QueuePerson::at(i as u32, q, p);
        if method == DistanceMethod::PixelRatio {
            person.apparent_length = Some(rng.gen_range(1.5..1.9));
            person.pixel_extent = Some(rng.gen_range(30.0..60.0));
        }
        out.push(person);
    }
    out
}

/// Scatter mode equals the all-pairs oracle; queue mode finds a subset.
pub fn violation_suite(configs: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam = CameraModel::default();
    let methods = [
        DistanceMethod::TunnelChord,
        DistanceMethod::FlatLatLon,
        DistanceMethod::GroundSampleDistance,
        DistanceMethod::PixelRatio,
    ];
    let mut cases = 0;
    for k in 0..configs {
        cases += 1;
        let method = methods[k % methods.len()];
        let count = rng.gen_range(0..=200);
        let queues = rng.gen_range(1..=4);
        let persons = random_crowd(method, count, queues, &mut rng);
        let threshold = rng.gen_range(0.3..2.5);
        let fail = |what: String| report("violations", cases, Some(format!("config {k} ({method:?}, {count} people): {what}")));
        let scatter = match detect_violations(&persons, method, threshold, DetectionMode::Scatter, &cam) {
            Ok(v) => v,
            Err(e) => return fail(format!("scatter failed: {e}")),
        };
        let oracle = brute_force_violations(&persons, method, threshold, &cam).expect("crowd is measurable");
        if scatter != oracle {
            let s: BTreeSet<(usize, usize)> = scatter.iter().map(|v| (v.a, v.b)).collect();
            let o: BTreeSet<(usize, usize)> = oracle.iter().map(|v| (v.a, v.b)).collect();
            let missing = o.difference(&s).next();
            let extra = s.difference(&o).next();
            return fail(format!("scatter differs from oracle: missing {missing:?}, extra {extra:?}"));
        }
        let queue = match detect_violations(&persons, method, threshold, DetectionMode::Queue, &cam) {
            Ok(v) => v,
            Err(e) => return fail(format!("queue failed: {e}")),
        };
        let all: BTreeSet<(usize, usize)> = scatter.iter().map(|v| (v.a, v.b)).collect();
        if let Some(v) = queue.iter().find(|v| !all.contains(&(v.a, v.b))) {
            return fail(format!("queue pair ({}, {}) missing from scatter", v.a, v.b));
        }
    }
    report("violations", cases, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Episode {
    Fixed(usize),
    Layered(usize),
    Both,
    Zigzag(usize),
    Parallel(usize),
}

struct Fuzz<'a> {
    rng: &'a mut ChaCha8Rng,
    engine: TransferEngine,
    next_drone: u32,
    issued: BTreeMap<RequestId, u64>,
}

impl Fuzz<'_> {
    fn fresh(&mut self) -> DroneId {
        self.next_drone += 1;
        DroneId(self.next_drone)
    }

    fn populate(&mut self, layer: usize) {
        let g = *self.engine.grid();
        let density = self.rng.gen_range(0.2..1.0);
        for z in g.zones_in_layer(layer).collect::<Vec<_>>() {
            if self.rng.gen_bool(density) {
                let d = self.fresh();
                self.engine.place(d, Cell::Zone(z)).expect("empty zone");
            }
        }
    }

    fn requests(&mut self, layer: usize, strategy: Strategy) {
        let g = *self.engine.grid();
        let drones: Vec<(DroneId, ZoneId)> = self
            .engine
            .ledger()
            .iter()
            .filter_map(|(d, c)| match c {
                Cell::Zone(z) if z.layer == layer => Some((d, z)),
                _ => None,
            })
            .collect();
        for _ in 0..self.rng.gen_range(0..=3) {
            let Some(&(d, from)) = drones.choose(self.rng) else { return };
            let to = if strategy == Strategy::FixedArea {
                let near: Vec<ZoneId> = neighbors_of(from, &g).into_iter().filter(|z| z.layer == layer).collect();
                match near.choose(self.rng) {
                    Some(z) => *z,
                    None => continue,
                }
            } else {
                ZoneId::new(self.rng.gen_range(0..g.n), self.rng.gen_range(0..g.n), layer)
            };
            let Ok(req) = SwapRequest::new(d, from, to, strategy, self.engine.tick()) else { continue };
            if let Ok(id) = self.engine.submit(req) {
                self.issued.insert(id, self.engine.tick());
            }
        }
        // drones leave and join now and then
        if self.rng.gen_bool(0.05) {
            if let Some(&(d, _)) = drones.choose(self.rng) {
                let _ = self.engine.direct_step(d, None);
            }
        }
        if self.rng.gen_bool(0.05) {
            let z = ZoneId::new(self.rng.gen_range(0..g.n), self.rng.gen_range(0..g.n), layer);
            let c = Cell::Zone(z);
            if self.engine.ledger().is_free(c) && !self.engine.is_reserved(c) {
                let d = self.fresh();
                let _ = self.engine.direct_step(d, Some(c));
            }
        }
    }

    fn audit(&mut self) -> Option<String> {
        if let Err(e) = self.engine.check() {
            return Some(format!("ledger check: {e}"));
        }
        if let Some(c) = occupancy_conflict(self.engine.ledger()) {
            return Some(c);
        }
        let now = self.engine.tick();
        let timeout = self.engine.timeout();
        let mut stale = None;
        self.issued.retain(|&id, &mut at| match self.engine.status(id) {
            Some(RequestStatus::Pending) => {
                if now - at > timeout {
                    stale = Some(format!("request {} pending for {} ticks past a timeout of {timeout}", id.0, now - at));
                }
                true
            }
            Some(s) => !s.is_final(),
            None => false,
        });
        stale
    }
}

/// Random swap, sweep and layered traffic on random grids; the ledger is
/// audited after every tick.
pub fn collision_suite(steps: u64, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    while done < steps {
        let n = rng.gen_range(2..=10);
        let layers = rng.gen_range(1..=3);
        let g = GridSpec::new(n, 10.0, layers).expect("valid grid");
        let mut kinds = vec![Episode::Fixed(rng.gen_range(0..layers)), Episode::Zigzag(rng.gen_range(0..layers))];
        kinds.push(Episode::Parallel(rng.gen_range(0..layers)));
        if layers >= 2 {
            kinds.push(Episode::Layered(rng.gen_range(1..layers)));
        }
        if layers == 3 {
            kinds.push(Episode::Both);
        }
        let kind = *kinds.choose(&mut rng).expect("non-empty");
        let timeout = rng.gen_range(2..=12);
        let len = rng.gen_range(50..=400).min(steps - done);
        let mut f = Fuzz { rng: &mut rng, engine: TransferEngine::new(g, timeout), next_drone: 0, issued: BTreeMap::new() };
        let mut pipe = None;
        let mut waves: Vec<ParallelSweep> = Vec::new();
        match kind {
            Episode::Fixed(l) | Episode::Layered(l) => f.populate(l),
            Episode::Both => {
                f.populate(0);
                f.populate(2);
            }
            Episode::Zigzag(l) => pipe = Some(ZigzagPipeline::new(l)),
            Episode::Parallel(_) => {}
        }
        for _ in 0..len {
            let result: Result<(), TransferError> = (|| {
                match kind {
                    Episode::Fixed(l) => f.requests(l, Strategy::FixedArea),
                    Episode::Layered(l) => f.requests(l, Strategy::MultiLayer),
                    Episode::Both => {
                        f.requests(0, Strategy::FixedArea);
                        f.requests(2, Strategy::MultiLayer);
                    }
                    Episode::Zigzag(_) => {
                        let p = pipe.as_mut().expect("zigzag episode");
                        if f.rng.gen_bool(0.7) {
                            let entering = f.rng.gen_bool(0.6).then(|| f.fresh());
                            match p.advance(&mut f.engine, entering) {
                                Ok(_) | Err(TransferError::CellUnavailable(_)) => {}
                                Err(e) => return Err(e),
                            }
                        }
                    }
                    Episode::Parallel(l) => {
                        waves.sort_by_key(|w| std::cmp::Reverse(w.column()));
                        if f.rng.gen_bool(0.7) {
                            for w in waves.iter_mut() {
                                w.advance(&mut f.engine)?;
                            }
                            waves.retain(|w| w.column().is_some());
                        }
                        let col0_free = waves.iter().all(|w| w.column() != Some(0));
                        if col0_free && f.rng.gen_bool(0.5) {
                            let mut rows: Vec<usize> = (0..n).collect();
                            rows.shuffle(f.rng);
                            rows.truncate(f.rng.gen_range(1..=n));
                            let base: Vec<RowAssignment> =
                                rows.into_iter().map(|row| RowAssignment { row, drone: f.fresh() }).collect();
                            let mut w = ParallelSweep::new(l, base, &g)?;
                            for _ in 0..f.rng.gen_range(0..n) {
                                w.bump_stagger();
                            }
                            w.advance(&mut f.engine)?;
                            waves.push(w);
                        }
                    }
                }
                Ok(())
            })();
            if let Err(e) = result {
                return report("collision", done, Some(format!("{kind:?} on n={n}, layers={layers}: {e}")));
            }
            f.engine.step();
            done += 1;
            if let Some(c) = f.audit() {
                return report("collision", done, Some(format!("{kind:?} on n={n}, layers={layers}, tick {}: {c}", f.engine.tick())));
            }
        }
    }
    report("collision", done, None)
}

/// All four suites with the shipped implementations, at most `threads`
/// at a time. Reports come back in a fixed order.
pub fn verify_all(threads: usize, seed: u64) -> Vec<SuiteReport> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool");
    pool.install(|| {
        (0..4)
            .into_par_iter()
            .map(|k| match k {
                0 => bijection_suite(&zone_value, BIJECTION_MAX_N),
                1 => distance_suite(&pixel_ratio, DISTANCE_PAIRS, seed),
                2 => violation_suite(VIOLATION_CONFIGS, seed),
                _ => collision_suite(COLLISION_STEPS, seed),
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bijection_passes_and_catches_the_reflection_mutant() {
        assert!(bijection_suite(&zone_value, 12).passed());
        // reflecting with n(n-1) instead of n²-1 collides ordinals
        let mutant = |a: usize, b: usize, n: usize| -> Option<usize> {
            if a >= n || b >= n {
                return None;
            }
            if a + b >= n {
                let m = drone_zone_value(n - 1 - a, n - 1 - b, n).ok()?;
                return (n * (n - 1)).checked_sub(m);
            }
            drone_zone_value(a, b, n).ok()
        };
        let r = bijection_suite(&mutant, 12);
        let msg = r.failure.expect("mutant caught");
        assert!(msg.contains("duplicate ordinal") || msg.contains("out of range") || msg.contains("no ordinal"), "{msg}");
    }

    #[test]
    fn distance_suite_catches_signed_pixel_ratio() {
        assert!(distance_suite(&pixel_ratio, 200, 3).passed());
        let signed = |a: &QueuePerson, b: &QueuePerson, cam: &CameraModel| -> Option<f64> {
            let range = |p: &QueuePerson| Some(p.apparent_length? / (p.pixel_extent? * cam.pixel_angular_size));
            Some(range(a)? - range(b)?)
        };
        let msg = distance_suite(&signed, 200, 3).failure.expect("mutant caught");
        assert!(msg.contains("pixel ratio symmetry"), "{msg}");
    }

    #[test]
    fn violation_suite_small() {
        let r = violation_suite(80, 5);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn collision_suite_small() {
        let r = collision_suite(3000, 9);
        assert!(r.passed(), "{r}");
        assert_eq!(r.cases, 3000);
    }
}
