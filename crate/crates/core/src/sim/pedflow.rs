//! Pedestrian pipeline of the distancing case: source, gates, walk, spaced
//! waiting line checked by drones, medicine service, sink.
//!
//! People arrive as a Poisson stream per monitored line. The gates let a
//! fixed number through per minute; passing the gate is the distancing
//! check. After walking to the waiting line each person keeps some gap to
//! the one in front. The monitoring drones sweep the line in rounds: a
//! round covers everyone waiting when it starts and takes `check_round`
//! drone-seconds shared among the drones. Anyone closer than
//! `wait_spacing` to the person ahead goes back to the end of the line;
//! the rest move on to the service units. Served people leave at the sink.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::rng::RngStreams;
use super::{Entity, EventKind, EventLog};
use crate::distancing::{detect_violations, CameraModel, DetectionMode, DistanceMethod, Location, QueuePerson};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedFlowSpec {
    /// persons per minute per monitored line
    pub arrival_rate: f64,
    /// persons per minute through the gates
    pub gate_capacity: f64,
    /// walking time from gate to line, ticks, uniform in `[min, max]`
    pub walk_time_min: u64,
    pub walk_time_max: u64,
    /// metres
    pub wait_spacing: f64,
    /// chance a person joins the line closer than `wait_spacing`
    pub violation_probability: f64,
    /// drone-seconds to check the whole waiting line once
    pub check_round: u64,
    pub service_units: usize,
    /// ticks per person
    pub service_time: u64,
    /// ticks; upper bound on `service_time`
    pub service_time_max: u64,
}

impl Default for PedFlowSpec {
    fn default() -> Self {
        PedFlowSpec {
            arrival_rate: 20.0,
            gate_capacity: 327.0,
            walk_time_min: 60,
            walk_time_max: 240,
            wait_spacing: 1.0,
            violation_probability: 0.1,
            check_round: 2400,
            service_units: 10,
            service_time: 1,
            service_time_max: 120,
        }
    }
}

/// Spacing errors found in a spec, as `(field, message)`.
pub fn spec_errors(s: &PedFlowSpec) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    let mut need = |ok: bool, field: &'static str, msg: &str| {
        if !ok {
            out.push((field, msg.to_string()));
        }
    };
    need(s.arrival_rate.is_finite() && s.arrival_rate >= 0.0, "arrival_rate", "must be a non-negative number");
    need(s.gate_capacity.is_finite() && s.gate_capacity > 0.0, "gate_capacity", "must be positive");
    need(s.walk_time_min <= s.walk_time_max, "walk_time_max", "must be at least walk_time_min");
    need(s.wait_spacing.is_finite() && s.wait_spacing > 0.0, "wait_spacing", "must be positive");
    need(
        (0.0..=1.0).contains(&s.violation_probability),
        "violation_probability",
        "must lie in [0, 1]",
    );
    need(s.check_round > 0, "check_round", "must be positive");
    need(s.service_units >= 1, "service_units", "needs at least one unit");
    need(s.service_time > 0, "service_time", "must be positive");
    need(s.service_time <= s.service_time_max, "service_time", "exceeds service_time_max");
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PedCounters {
    pub arrivals: u64,
    /// let through the gates, i.e. checked
    pub checked: u64,
    pub requeued: u64,
    pub served: u64,
    pub sinks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Waiter {
    id: u32,
    /// metres to the person in front
    gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Round {
    ends: u64,
    members: Vec<Waiter>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedFlowState {
    pub tick: u64,
    pub counters: PedCounters,
    /// arrival clock in units of mean inter-arrival times
    elapsed: f64,
    next_arrival: f64,
    gate_tokens: f64,
    crowd: VecDeque<u32>,
    walking: BTreeMap<(u64, u32), ()>,
    waiting: VecDeque<Waiter>,
    round: Option<Round>,
    verified: VecDeque<u32>,
    units: Vec<Option<(u32, u64)>>,
}

/// The three random streams the pipeline draws from.
#[derive(Debug, Clone)]
pub struct PedRngs {
    pub arrivals: ChaCha8Rng,
    pub walk: ChaCha8Rng,
    pub spacing: ChaCha8Rng,
}

impl PedRngs {
    pub fn from_streams(s: &RngStreams) -> Self {
        PedRngs { arrivals: s.stream("ped.arrivals"), walk: s.stream("ped.walk"), spacing: s.stream("ped.spacing") }
    }
}

impl PedFlowState {
    pub fn new(spec: &PedFlowSpec, rngs: &mut PedRngs) -> Self {
        PedFlowState {
            tick: 0,
            counters: PedCounters::default(),
            elapsed: 0.0,
            next_arrival: rngs.arrivals.sample(Exp1),
            gate_tokens: 0.0,
            crowd: VecDeque::new(),
            walking: BTreeMap::new(),
            waiting: VecDeque::new(),
            round: None,
            verified: VecDeque::new(),
            units: vec![None; spec.service_units],
        }
    }

    /// People between the source and the sink.
    pub fn in_system(&self) -> u64 {
        let round = self.round.as_ref().map_or(0, |r| r.members.len());
        let serving = self.units.iter().filter(|u| u.is_some()).count();
        (self.crowd.len() + self.walking.len() + self.waiting.len() + round + self.verified.len() + serving) as u64
    }

    pub fn queue_length(&self) -> usize {
        self.waiting.len() + self.round.as_ref().map_or(0, |r| r.members.len()) + self.verified.len()
    }
}

fn draw_gap(spec: &PedFlowSpec, rng: &mut ChaCha8Rng) -> f64 {
    let s = spec.wait_spacing;
    if rng.gen_bool(spec.violation_probability) {
        rng.gen_range(0.2 * s..s)
    } else {
        rng.gen_range(s..2.0 * s)
    }
}

fn emit(log: &mut Option<&mut EventLog>, tick: u64, person: u32, kind: EventKind) {
    if let Some(log) = log.as_deref_mut() {
        log.push(tick, Entity::Person(person), kind);
    }
}

/// Rear members of every too-close pair in a round, by position in the
/// line.
fn round_violators(spec: &PedFlowSpec, members: &[Waiter]) -> Vec<bool> {
    let mut x = 0.0;
    let line: Vec<QueuePerson> = members
        .iter()
        .enumerate()
        .map(|(i, w)| {
            if i > 0 {
                x += w.gap;
            }
            QueuePerson::at(i as u32, 0, Location::Planar { x, y: 0.0 })
        })
        .collect();
    let mut flagged = vec![false; members.len()];
    let pairs = detect_violations(
        &line,
        DistanceMethod::GroundSampleDistance,
        spec.wait_spacing,
        DetectionMode::Queue,
        &CameraModel::default(),
    )
    .expect("planar line with positive spacing");
    for v in pairs {
        flagged[v.b] = true;
    }
    flagged
}

/// One tick of the pipeline with `drones` monitoring drones.
pub fn ped_flow_step(
    spec: &PedFlowSpec,
    drones: usize,
    state: &mut PedFlowState,
    rngs: &mut PedRngs,
    mut log: Option<&mut EventLog>,
) {
    let t = state.tick;

    // service completions free their units first
    for unit in state.units.iter_mut() {
        if let Some((id, done)) = *unit {
            if done <= t {
                *unit = None;
                state.counters.served += 1;
                state.counters.sinks += 1;
                emit(&mut log, t, id, EventKind::PedSink { served: true });
            }
        }
    }

    // pedSource
    let lines = drones.max(1) as f64;
    state.elapsed += spec.arrival_rate * lines / 60.0;
    while spec.arrival_rate > 0.0 && state.next_arrival <= state.elapsed {
        let id = state.counters.arrivals as u32;
        state.counters.arrivals += 1;
        state.crowd.push_back(id);
        emit(&mut log, t, id, EventKind::PedArrive);
        state.next_arrival += rngs.arrivals.sample::<f64, _>(Exp1);
    }

    // gates
    let per_tick = spec.gate_capacity / 60.0;
    // an idle gate banks at most one tick's worth plus one person
    state.gate_tokens = (state.gate_tokens + per_tick).min(per_tick + 1.0);
    while state.gate_tokens >= 1.0 {
        let Some(id) = state.crowd.pop_front() else { break };
        state.gate_tokens -= 1.0;
        state.counters.checked += 1;
        emit(&mut log, t, id, EventKind::PedAdmit);
        let walk = rngs.walk.gen_range(spec.walk_time_min..=spec.walk_time_max);
        state.walking.insert((t + walk, id), ());
    }

    // walkers reaching the line
    while let Some((&(due, id), _)) = state.walking.first_key_value() {
        if due > t {
            break;
        }
        state.walking.pop_first();
        let gap = draw_gap(spec, &mut rngs.spacing);
        state.waiting.push_back(Waiter { id, gap });
        emit(&mut log, t, id, EventKind::PedJoinQueue);
    }

    // drone check rounds
    if state.round.as_ref().is_some_and(|r| r.ends <= t) {
        let round = state.round.take().expect("checked above");
        let flagged = round_violators(spec, &round.members);
        for (w, bad) in round.members.into_iter().zip(flagged) {
            if bad {
                state.counters.requeued += 1;
                emit(&mut log, t, w.id, EventKind::PedRequeue);
                let gap = draw_gap(spec, &mut rngs.spacing);
                state.waiting.push_back(Waiter { id: w.id, gap });
            } else {
                state.verified.push_back(w.id);
            }
        }
    }
    if state.round.is_none() && !state.waiting.is_empty() && drones > 0 {
        let length = spec.check_round.div_ceil(drones as u64);
        state.round = Some(Round { ends: t + length, members: state.waiting.drain(..).collect() });
    }

    // pedService
    for (u, unit) in state.units.iter_mut().enumerate() {
        if unit.is_none() {
            if let Some(id) = state.verified.pop_front() {
                *unit = Some((id, t + spec.service_time));
                emit(&mut log, t, id, EventKind::PedServiceStart { unit: u });
            }
        }
    }

    state.tick += 1;
}

/// Runs the pipeline alone for `duration` ticks. Returns the final state
/// and the per-tick `(checked, served)` series.
pub fn simulate_ped_flow(
    spec: &PedFlowSpec,
    drones: usize,
    duration: u64,
    seed: u64,
    mut log: Option<&mut EventLog>,
) -> (PedFlowState, Vec<(u64, u64)>) {
    let mut rngs = PedRngs::from_streams(&RngStreams::new(seed));
    let mut state = PedFlowState::new(spec, &mut rngs);
    let mut series = Vec::with_capacity(duration as usize);
    for _ in 0..duration {
        ped_flow_step(spec, drones, &mut state, &mut rngs, log.as_deref_mut());
        series.push((state.counters.checked, state.counters.served));
    }
    (state, series)
}

/// People who reached the sink after being served. The unit count and time
/// bound are checked against the service starts in the log: a service
/// start on a unit beyond `units`, or a completion later than
/// `service_time_max` after its start, is not counted.
pub fn medicine_service_count(log: &[super::SimEvent], units: usize, service_time_max: u64) -> u64 {
    let mut started: BTreeMap<u32, u64> = BTreeMap::new();
    let mut served = 0;
    for e in log {
        let Entity::Person(p) = e.entity else { continue };
        match e.kind {
            EventKind::PedServiceStart { unit } if unit < units => {
                started.insert(p, e.tick);
            }
            EventKind::PedSink { served: true } if started.remove(&p).is_some_and(|s| e.tick - s <= service_time_max) => {
                served += 1;
            }
            _ => {}
        }
    }
    served
}

/// Arrival rate per line at which `drones` drones check `target` people in
/// `duration` ticks. The arrival draws are shared across rates, so the
/// checked count rises monotonically with the rate and bisection applies.
pub fn calibrate_arrival_rate(spec: &PedFlowSpec, drones: usize, duration: u64, seed: u64, target: u64) -> f64 {
    let checked = |rate: f64| {
        let s = PedFlowSpec { arrival_rate: rate, ..spec.clone() };
        simulate_ped_flow(&s, drones, duration, seed, None).0.counters.checked
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while checked(hi) < target && hi < 1e6 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if checked(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
