//! Fleet operations on the zone grid.
//!
//! Each drone belongs to one operating area (a layer with a movement
//! strategy). Drones start seated in their area where it has room, the rest
//! wait at the depot. Every tick:
//!
//! 1. the control room, every `control.interval` ticks, reads each drone's
//!    trailing utilisation and either recalls it, clears it to start, or
//!    leaves it alone; cleared idle drones are dispatched while their area
//!    can take them
//! 2. drones short of battery or sanitiser leave zone-holding areas
//! 3. staged drones enter and the area strategy moves its drones
//! 4. the transfer engine advances swap requests and commits the moves
//! 5. drones in zones scan or spray, link bursts are sampled, people move
//! 6. the depot serves returned drones, then every drone's kinematics and
//!    consumables advance by one second
//!
//! All moves go through the transfer engine's occupancy ledger, which is
//! checked after every tick.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rng::RngStreams;
use super::scenario::{AreaSpec, Mission, Scenario};
use super::{Entity, EventKind, EventLog};
use crate::distancing::{
    control_room_notification, detect_violations, intimations, DetectionMode, DistanceMethod, Directive, GeoPoint,
    Location, QueuePerson, KM_PER_DEGREE,
};
use crate::fleet::{measure_utilization, Drone, DroneId, DroneState, FleetConfig};
use crate::metrics::{sample_signal_time, LinkSample, StateRecord};
use crate::transfer::{
    Cell, ParallelSweep, RequestStatus, RowAssignment, Strategy, SwapRequest, TransferEngine, TransferError,
    Transition, ZigzagPipeline,
};
use crate::zone_grid::{drone_zone_value, zone_at_ordinal, zone_center, zone_of_position, GridSpec, Position, ZoneId};
use crate::zone_ops::{
    scan_cycle, ActionKind, OpsRecord, Person, PersonId, PresenceSample, ScanClock, ScanConfig, SensorSource,
    TemperatureHistory,
};

/// Seconds of slack kept on top of the flight home.
const RESERVE_SECONDS: f64 = 30.0;
/// Warming rate of a feverish person, °C per hour, up to `FEVER_CEILING`.
const FEVER_RISE_PER_HOUR: f64 = 1.0;
const FEVER_CEILING: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Idle at the depot, serviced.
    Ready,
    /// Flying from the depot or an area exit to the area entry.
    Outbound,
    /// Waiting at the entry to be let in.
    Hover,
    /// In a zone of the area.
    Working,
    /// Flying home.
    Inbound,
    /// At the depot waiting for a bay.
    Queued,
    Servicing { done: u64 },
}

#[derive(Debug, Clone)]
struct Unit {
    area: usize,
    phase: Phase,
    /// zone a staged drone will enter
    target: Option<ZoneId>,
    zone_since: u64,
    recall: bool,
}

#[derive(Debug, Clone)]
enum AreaKind {
    Zigzag(ZigzagPipeline),
    Parallel { waves: Vec<ParallelSweep>, started: usize },
    Holding,
}

#[derive(Debug, Clone)]
struct Area {
    layer: usize,
    strategy: Strategy,
    kind: AreaKind,
    next_move: u64,
}

#[derive(Debug, Clone)]
struct Walker {
    row: usize,
    col: usize,
    /// metres, absolute
    x: f64,
    y: f64,
    base: f64,
    fever_onset: Option<u64>,
}

/// What the operations produced besides the event log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OpsOutput {
    pub states: Vec<StateRecord>,
    pub records: Vec<OpsRecord>,
    pub presence: Vec<PresenceSample>,
    /// operating layer of each area, indexed by network id
    pub area_layers: Vec<usize>,
}

pub struct Ops {
    g: GridSpec,
    cfg: FleetConfig,
    s: Scenario,
    engine: TransferEngine,
    drones: Vec<Drone>,
    units: Vec<Unit>,
    areas: Vec<Area>,
    in_bays: usize,
    depot_queue: VecDeque<usize>,
    walkers: Vec<Walker>,
    clocks: BTreeMap<ZoneId, ScanClock>,
    history: TemperatureHistory,
    rng_swaps: ChaCha8Rng,
    rng_link: ChaCha8Rng,
    rng_persons: ChaCha8Rng,
    pub out: OpsOutput,
}

fn id(i: usize) -> DroneId {
    DroneId(i as u32)
}

impl Ops {
    pub fn new(s: &Scenario, streams: &RngStreams, log: &mut EventLog) -> Result<Ops, TransferError> {
        let g = s.grid;
        let cfg = s.fleet.config.clone();
        let engine = TransferEngine::new(g, s.ops.timeout);
        let specs: Vec<AreaSpec> = s.plan.areas(s.fleet.drones);
        let mut rng_persons = streams.stream("ops.persons");
        let walkers = (0..s.population.persons)
            .map(|_| {
                let (row, col) = (rng_persons.gen_range(0..g.n), rng_persons.gen_range(0..g.n));
                let fever = rng_persons.gen_bool(s.population.fever_fraction);
                Walker {
                    row,
                    col,
                    x: (col as f64 + rng_persons.gen::<f64>()) * g.tau,
                    y: (row as f64 + rng_persons.gen::<f64>()) * g.tau,
                    base: rng_persons.gen_range(36.2..37.0),
                    fever_onset: fever.then(|| rng_persons.gen_range(0..s.duration.max(1))),
                }
            })
            .collect();
        let mut ops = Ops {
            g,
            cfg,
            s: s.clone(),
            engine,
            drones: Vec::new(),
            units: Vec::new(),
            areas: Vec::new(),
            in_bays: 0,
            depot_queue: VecDeque::new(),
            walkers,
            clocks: BTreeMap::new(),
            history: TemperatureHistory::new(),
            rng_swaps: streams.stream("ops.swaps"),
            rng_link: streams.stream("ops.link"),
            rng_persons,
            out: OpsOutput::default(),
        };
        for (a, spec) in specs.iter().enumerate() {
            ops.out.area_layers.push(spec.layer);
            let kind = match spec.strategy {
                Strategy::Zigzag => AreaKind::Zigzag(ZigzagPipeline::new(spec.layer)),
                Strategy::Parallel => AreaKind::Parallel { waves: Vec::new(), started: 0 },
                _ => AreaKind::Holding,
            };
            ops.areas.push(Area { layer: spec.layer, strategy: spec.strategy, kind, next_move: 0 });
            for z in g.zones_in_layer(spec.layer) {
                ops.clocks.insert(z, ScanClock::new(s.population.scan_interval, s.population.doubling));
            }
            let first = ops.drones.len();
            for k in 0..spec.drones {
                let i = first + k;
                let depot = Position::new(0.0, 0.0, spec.layer);
                ops.drones.push(Drone::new(id(i), depot, depot, &ops.cfg));
                ops.units.push(Unit { area: a, phase: Phase::Ready, target: None, zone_since: 0, recall: false });
                ops.out.states.push(StateRecord { tick: 0, drone: id(i), state: DroneState::Idle });
            }
            ops.seat_area(a, first..first + spec.drones, log)?;
        }
        Ok(ops)
    }

    fn work_state(&self) -> DroneState {
        match self.s.ops.mission {
            Mission::Scan => DroneState::Scanning,
            Mission::Spray => DroneState::Sanitizing,
        }
    }

    fn set_state(&mut self, i: usize, state: DroneState, t: u64, log: &mut EventLog) {
        if self.drones[i].state == state {
            return;
        }
        self.drones[i].set_state(state);
        self.out.states.push(StateRecord { tick: t, drone: id(i), state });
        log.push(t, Entity::Drone(id(i)), EventKind::State { state });
    }

    /// Places the area's drones in zones before the first tick.
    fn seat_area(&mut self, a: usize, drones: std::ops::Range<usize>, log: &mut EventLog) -> Result<(), TransferError> {
        let n = self.g.n;
        let layer = self.areas[a].layer;
        let mut seated = Vec::new();
        match &mut self.areas[a].kind {
            AreaKind::Zigzag(pipe) => {
                for (ordinal, i) in drones.clone().enumerate().take(n * n) {
                    pipe.seat(&mut self.engine, ordinal, id(i))?;
                    seated.push(i);
                }
            }
            AreaKind::Parallel { waves, started } => {
                let ids: Vec<usize> = drones.clone().collect();
                for (w, chunk) in ids.chunks(n).enumerate().take(n) {
                    let base = chunk.iter().enumerate().map(|(r, &i)| RowAssignment { row: r, drone: id(i) }).collect();
                    let mut sweep = ParallelSweep::new(layer, base, &self.g)?;
                    sweep.seat(&mut self.engine, n - 1 - w)?;
                    waves.push(sweep);
                    seated.extend_from_slice(chunk);
                    *started += 1;
                }
            }
            AreaKind::Holding => {
                for (ordinal, i) in drones.clone().enumerate().take(n * n) {
                    let (row, col) = zone_at_ordinal(ordinal, n).expect("ordinal inside grid");
                    self.engine.place(id(i), Cell::Zone(ZoneId::new(row, col, layer)))?;
                    seated.push(i);
                }
            }
        }
        for i in seated {
            if let Some(Cell::Zone(z)) = self.engine.ledger().cell_of(id(i)) {
                self.drones[i].position = zone_center(z, &self.g);
            }
            self.units[i].phase = Phase::Working;
            let st = self.work_state();
            self.set_state(i, st, 0, log);
        }
        Ok(())
    }

    fn depot(&self, i: usize) -> Position {
        self.drones[i].depot
    }

    fn work_drain(&self) -> f64 {
        match self.s.ops.mission {
            Mission::Scan => 1.0 / self.cfg.flight_time_scan,
            Mission::Spray => 1.0 / self.cfg.flight_time_spray,
        }
    }

    /// Whether drone `i` at `from` can work `secs` more seconds and still
    /// make it home.
    fn can_work(&self, i: usize, secs: f64, from: Position) -> bool {
        let d = &self.drones[i];
        let home = from.distance(&d.depot) / d.speed + RESERVE_SECONDS;
        let needed = secs * self.work_drain() + home / self.cfg.flight_time_scan;
        let battery_ok = d.battery - self.cfg.battery_floor >= needed;
        let tank_ok = match self.s.ops.mission {
            Mission::Scan => true,
            Mission::Spray => d.tank - self.cfg.tank_floor >= self.cfg.spray_rate * secs / 60.0,
        };
        battery_ok && tank_ok
    }

    fn pass_seconds(&self, a: usize) -> f64 {
        let n = self.g.n as f64;
        let per_zone = self.s.ops.dwell as f64;
        match self.areas[a].kind {
            AreaKind::Zigzag(_) => n * n * per_zone,
            AreaKind::Parallel { .. } => n * per_zone,
            AreaKind::Holding => self.s.ops.swap_interval as f64,
        }
    }

    fn entry_zone(&self, a: usize) -> ZoneId {
        ZoneId::new(0, 0, self.areas[a].layer)
    }

    fn staged(&self, a: usize) -> Vec<usize> {
        (0..self.units.len())
            .filter(|&i| self.units[i].area == a && matches!(self.units[i].phase, Phase::Outbound | Phase::Hover))
            .collect()
    }

    fn zone_taken(&self, z: ZoneId) -> bool {
        let c = Cell::Zone(z);
        !self.engine.ledger().is_free(c) || self.engine.is_reserved(c)
    }

    /// Lowest-ordinal zone of a holding area that is free and not promised
    /// to a staged drone.
    fn free_zone(&self, a: usize) -> Option<ZoneId> {
        let n = self.g.n;
        let layer = self.areas[a].layer;
        let promised: BTreeSet<ZoneId> = self.units.iter().filter_map(|u| u.target).collect();
        (0..n * n)
            .map(|o| zone_at_ordinal(o, n).expect("ordinal inside grid"))
            .map(|(r, c)| ZoneId::new(r, c, layer))
            .find(|z| !self.zone_taken(*z) && !promised.contains(z))
    }

    fn has_room(&self, a: usize) -> bool {
        let staged = self.staged(a).len();
        // enough staged drones to fill every entry slot until the next
        // control reading
        let slots = (self.s.control.interval / self.s.ops.dwell).max(1) as usize;
        match self.areas[a].kind {
            AreaKind::Zigzag(_) => staged < slots,
            AreaKind::Parallel { .. } => staged < self.g.n * slots,
            AreaKind::Holding => self.free_zone(a).is_some(),
        }
    }

    fn send_out(&mut self, i: usize, t: u64, log: &mut EventLog) {
        let a = self.units[i].area;
        let target = match self.areas[a].kind {
            AreaKind::Holding => self.free_zone(a),
            _ => Some(self.entry_zone(a)),
        };
        let Some(target) = target else { return };
        self.units[i].target = matches!(self.areas[a].kind, AreaKind::Holding).then_some(target);
        self.units[i].phase = Phase::Outbound;
        self.drones[i].waypoint = Some(zone_center(target, &self.g));
        self.set_state(i, DroneState::Transferring, t, log);
    }

    fn send_home(&mut self, i: usize, t: u64, log: &mut EventLog) {
        self.units[i].phase = Phase::Inbound;
        self.units[i].target = None;
        self.drones[i].waypoint = Some(self.depot(i));
        let state = if self.units[i].recall { DroneState::Recalled } else { DroneState::Refilling };
        self.units[i].recall = false;
        self.set_state(i, state, t, log);
    }

    /// After finishing a pass: go round again if there is budget, else home.
    fn after_pass(&mut self, i: usize, t: u64, log: &mut EventLog) {
        let a = self.units[i].area;
        let entry = zone_center(self.entry_zone(a), &self.g);
        let from = self.drones[i].position;
        let legs = from.distance(&entry) / self.drones[i].speed;
        if !self.units[i].recall && self.can_work(i, self.pass_seconds(a) + legs, entry) {
            self.units[i].phase = Phase::Outbound;
            self.drones[i].waypoint = Some(entry);
            self.set_state(i, DroneState::Transferring, t, log);
        } else {
            self.send_home(i, t, log);
        }
    }

    fn leave_grid(&mut self, i: usize, t: u64, log: &mut EventLog) -> bool {
        match self.engine.direct_step(id(i), None) {
            Ok(_) => {
                self.send_home(i, t, log);
                true
            }
            Err(_) => false,
        }
    }

    fn control(&mut self, t: u64, log: &mut EventLog) {
        let c = &self.s.control;
        if !t.is_multiple_of(c.interval) || self.drones.is_empty() {
            return;
        }
        let window = c.window as f64;
        let readings: Vec<(DroneId, f64)> =
            self.drones.iter().map(|d| (d.id, measure_utilization(d, window))).collect();
        let report = control_room_notification(&readings, c.lower, c.upper, &[]).expect("validated thresholds");
        for (d, directive) in report.directives {
            let i = d.0 as usize;
            match (directive, self.units[i].phase) {
                (Directive::StartOps, Phase::Ready) => {
                    if self.has_room(self.units[i].area) {
                        log.push(t, Entity::Drone(d), EventKind::Directive { directive });
                        self.send_out(i, t, log);
                    }
                }
                (Directive::Recall, Phase::Outbound | Phase::Hover | Phase::Working) if !self.units[i].recall => {
                    log.push(t, Entity::Drone(d), EventKind::Directive { directive });
                    self.units[i].recall = true;
                    if self.units[i].phase != Phase::Working {
                        self.send_home(i, t, log);
                    }
                }
                _ => {}
            }
        }
    }

    fn departures(&mut self, t: u64, log: &mut EventLog) {
        for i in 0..self.drones.len() {
            if self.units[i].phase != Phase::Working || self.engine.is_busy(id(i)) {
                continue;
            }
            let a = self.units[i].area;
            if !matches!(self.areas[a].kind, AreaKind::Holding) {
                continue;
            }
            let pos = self.drones[i].position;
            let tired = !self.can_work(i, 60.0, pos) || self.drones[i].state == DroneState::Refilling;
            if tired || self.units[i].recall {
                self.leave_grid(i, t, log);
            }
        }
    }

    fn hover_check(&mut self, t: u64, log: &mut EventLog) {
        // staged drones that can no longer afford a pass go home
        for i in 0..self.drones.len() {
            if self.units[i].phase != Phase::Hover {
                continue;
            }
            let a = self.units[i].area;
            let pos = self.drones[i].position;
            if !self.can_work(i, self.pass_seconds(a), pos) {
                self.send_home(i, t, log);
            }
        }
    }

    fn entries_and_moves(&mut self, t: u64, log: &mut EventLog) -> Result<(), TransferError> {
        for a in 0..self.areas.len() {
            match self.areas[a].kind {
                AreaKind::Holding => self.holding_step(a, t, log)?,
                _ if t >= self.areas[a].next_move => {
                    self.areas[a].next_move = t + self.s.ops.dwell;
                    self.sweep_step(a, t, log)?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn hovering(&self, a: usize) -> Vec<usize> {
        let mut v: Vec<usize> =
            (0..self.units.len()).filter(|&i| self.units[i].area == a && self.units[i].phase == Phase::Hover).collect();
        v.sort_by_key(|&i| (self.units[i].zone_since, i));
        v
    }

    fn sweep_step(&mut self, a: usize, t: u64, log: &mut EventLog) -> Result<(), TransferError> {
        let n = self.g.n;
        let layer = self.areas[a].layer;
        let hovering = self.hovering(a);
        let mut exited = Vec::new();
        let mut entered = Vec::new();
        let engine = &mut self.engine;
        match &mut self.areas[a].kind {
            AreaKind::Zigzag(pipe) => {
                let entering = hovering.first().copied();
                let entry_free = {
                    // the front of the pipeline moves first, so the entry is
                    // free after the advance unless a drone sits at ordinal 0
                    // with nowhere to go (a one-zone grid)
                    n > 1 || pipe.is_empty()
                };
                let (_, out) = pipe.advance(engine, entering.filter(|_| entry_free).map(id))?;
                exited.extend(out.into_iter().map(|d| d.0 as usize));
                if entry_free {
                    entered.extend(entering);
                }
            }
            AreaKind::Parallel { waves, started } => {
                waves.sort_by_key(|w| std::cmp::Reverse(w.column()));
                for w in waves.iter_mut() {
                    let leaving: Vec<usize> = if w.column() == Some(n - 1) {
                        w.assignments().iter().map(|r| r.drone.0 as usize).collect()
                    } else {
                        Vec::new()
                    };
                    w.advance(engine)?;
                    exited.extend(leaving);
                }
                waves.retain(|w| w.column().is_some());
                let col0_free = waves.iter().all(|w| w.column() != Some(0));
                if col0_free && !hovering.is_empty() {
                    let k = hovering.len().min(n);
                    let base: Vec<RowAssignment> =
                        hovering[..k].iter().enumerate().map(|(r, &i)| RowAssignment { row: r, drone: id(i) }).collect();
                    let mut w = ParallelSweep::new(layer, base, &self.g)?;
                    for _ in 0..(*started % k) {
                        w.bump_stagger();
                    }
                    w.advance(engine)?;
                    *started += 1;
                    waves.push(w);
                    entered.extend_from_slice(&hovering[..k]);
                }
            }
            AreaKind::Holding => unreachable!("holding areas move through requests"),
        }
        for i in entered {
            self.units[i].phase = Phase::Working;
            self.units[i].zone_since = t;
            self.drones[i].waypoint = None;
            let st = self.work_state();
            self.set_state(i, st, t, log);
        }
        for i in exited {
            self.after_pass(i, t, log);
        }
        Ok(())
    }

    fn holding_step(&mut self, a: usize, t: u64, log: &mut EventLog) -> Result<(), TransferError> {
        for i in self.hovering(a) {
            let target = match self.units[i].target {
                Some(z) if !self.zone_taken(z) => Some(z),
                _ => {
                    self.units[i].target = None;
                    self.free_zone(a)
                }
            };
            let Some(z) = target else { continue };
            if self.engine.direct_step(id(i), Some(Cell::Zone(z))).is_ok() {
                self.units[i].phase = Phase::Working;
                self.units[i].target = None;
                self.units[i].zone_since = t;
                self.drones[i].waypoint = None;
                let st = self.work_state();
                self.set_state(i, st, t, log);
            } else {
                self.units[i].target = Some(z);
            }
        }
        if t < self.areas[a].next_move {
            return Ok(());
        }
        self.areas[a].next_move = t + self.s.ops.swap_interval;
        let layer = self.areas[a].layer;
        let mut candidates: Vec<(usize, ZoneId)> = (0..self.drones.len())
            .filter(|&i| self.units[i].area == a && self.units[i].phase == Phase::Working && !self.units[i].recall)
            .filter(|&i| !self.engine.is_busy(id(i)))
            .filter_map(|i| match self.engine.ledger().cell_of(id(i)) {
                Some(Cell::Zone(z)) => Some((i, z)),
                _ => None,
            })
            .collect();
        candidates.sort();
        let Some(&(i, from)) = candidates.choose(&mut self.rng_swaps) else { return Ok(()) };
        let strategy = self.areas[a].strategy;
        let to = if strategy == Strategy::MultiLayer && self.rng_swaps.gen_bool(0.5) {
            let (r, c) = (self.rng_swaps.gen_range(0..self.g.n), self.rng_swaps.gen_range(0..self.g.n));
            ZoneId::new(r, c, layer)
        } else {
            let near: Vec<ZoneId> = crate::zone_grid::neighbors_of(from, &self.g)
                .into_iter()
                .filter(|z| z.layer == layer)
                .collect();
            match near.choose(&mut self.rng_swaps) {
                Some(z) => *z,
                None => return Ok(()),
            }
        };
        if to == from {
            return Ok(());
        }
        if let Ok(req) = SwapRequest::new(id(i), from, to, strategy, t) {
            if let Ok(rid) = self.engine.submit(req) {
                log.push(t, Entity::Drone(id(i)), EventKind::Request { request: rid, status: RequestStatus::Pending });
            }
        }
        Ok(())
    }

    fn cell_position(&self, c: Cell) -> Position {
        match c {
            Cell::Zone(z) => zone_center(z, &self.g),
            Cell::Lane(ta) => zone_center(ta.entry, &self.g),
        }
    }

    fn commit(&mut self, t: u64, log: &mut EventLog) {
        let report = self.engine.step();
        for Transition { drone, from, to, link, .. } in report.transitions {
            log.push(t, Entity::Drone(drone), EventKind::Move { from, to, link });
            let i = drone.0 as usize;
            if let Some(c) = to {
                self.drones[i].position = self.cell_position(c);
                if let Cell::Zone(z) = c {
                    self.units[i].zone_since = t;
                    self.out.records.push(OpsRecord::Visit { tick: t, zone: z, drone });
                }
            }
        }
        for ch in report.changes {
            log.push(t, Entity::Drone(ch.requester), EventKind::Request { request: ch.request, status: ch.status });
        }
        self.engine.check().expect("occupancy ledger stays consistent");
        // drones inside a request fly as transfers
        for i in 0..self.drones.len() {
            if self.units[i].phase != Phase::Working {
                continue;
            }
            let busy = self.engine.is_busy(id(i));
            let st = if busy { DroneState::Transferring } else { self.work_state() };
            if self.drones[i].state != DroneState::Refilling {
                self.set_state(i, st, t, log);
            }
        }
    }

    fn work(&mut self, t: u64, log: &mut EventLog) {
        let dwell = self.s.ops.dwell;
        let scan_cfg = ScanConfig::default();
        for i in 0..self.drones.len() {
            if self.units[i].phase != Phase::Working || self.engine.is_busy(id(i)) {
                continue;
            }
            let Some(Cell::Zone(z)) = self.engine.ledger().cell_of(id(i)) else { continue };
            match self.drones[i].state {
                DroneState::Sanitizing => {
                    if (t - self.units[i].zone_since + 1).is_multiple_of(dwell) {
                        self.out.records.push(OpsRecord::Sanitized { tick: t, zone: z });
                        log.push(t, Entity::Zone(z), EventKind::Sanitized { zone: z });
                    }
                }
                DroneState::Scanning => {
                    let clock = self.clocks.get_mut(&z).expect("clock per zone");
                    if clock.next_due > t {
                        continue;
                    }
                    clock.next_due = t;
                    let persons: Vec<Person> = self
                        .walkers
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| (w.row, w.col) == (z.row, z.col))
                        .map(|(p, w)| Person {
                            id: PersonId(p as u32),
                            zone: z,
                            temperature: temperature(w, t),
                            source: SensorSource::Thermal,
                        })
                        .collect();
                    let Ok(outcome) = scan_cycle(z, &self.drones[i], &persons, clock, &mut self.history, &scan_cfg, &self.g)
                    else {
                        continue;
                    };
                    log.push(t, Entity::Zone(z), EventKind::Scan { zone: z, persons: outcome.observations.len() });
                    for o in &outcome.observations {
                        self.out.records.push(OpsRecord::Scanned { tick: t, zone: z, person: o.person });
                    }
                    let mut sanitized = false;
                    for act in &outcome.actions {
                        match act.kind {
                            ActionKind::Alarm => {
                                self.out.records.push(OpsRecord::Alarm { tick: t, zone: z, person: act.person });
                                log.push(t, Entity::Zone(z), EventKind::Alarm { zone: z, person: act.person.0 });
                            }
                            ActionKind::Medicate => {
                                self.out.records.push(OpsRecord::Medicated { tick: t, zone: z, person: act.person })
                            }
                            ActionKind::Sanitize if !sanitized => {
                                sanitized = true;
                                self.out.records.push(OpsRecord::Sanitized { tick: t, zone: z });
                                log.push(t, Entity::Zone(z), EventKind::Sanitized { zone: z });
                            }
                            ActionKind::Sanitize => {}
                        }
                    }
                    let flagged = self.distancing_check(z);
                    if flagged > 0 {
                        log.push(t, Entity::Zone(z), EventKind::Intimation { zone: z, persons: flagged });
                    }
                }
                _ => {}
            }
        }
    }

    /// People in `z` standing closer than the distancing threshold.
    fn distancing_check(&self, z: ZoneId) -> usize {
        let d = &self.s.distancing;
        let people: Vec<QueuePerson> = self
            .walkers
            .iter()
            .enumerate()
            .filter(|(_, w)| (w.row, w.col) == (z.row, z.col))
            .map(|(p, w)| {
                let location = match d.method {
                    DistanceMethod::TunnelChord | DistanceMethod::FlatLatLon => {
                        let deg = 1.0 / (KM_PER_DEGREE * 1000.0);
                        Location::Geo(GeoPoint { lat: w.y * deg, lon: w.x * deg })
                    }
                    _ => Location::Planar { x: w.x, y: w.y },
                };
                QueuePerson::at(p as u32, 0, location)
            })
            .collect();
        detect_violations(&people, d.method, d.threshold, DetectionMode::Scatter, &d.camera)
            .map(|v| intimations(&v).len())
            .unwrap_or(0)
    }

    fn link_samples(&mut self, t: u64) {
        let l = &self.s.link;
        if !t.is_multiple_of(l.burst) {
            return;
        }
        for i in 0..self.drones.len() {
            let d = &self.drones[i];
            if !d.is_airborne() {
                continue;
            }
            let zone = zone_of_position(d.position, &self.g).unwrap_or(ZoneId::new(0, 0, d.position.layer));
            let signal = sample_signal_time(&l.signal, &mut self.rng_link);
            let ber = self.rng_link.gen_range(0.0..=l.ber_max);
            let packets = (l.packet_rate * l.burst as f64).round() as u64;
            let sample = LinkSample::new(packets, ber, l.burst as f64 + signal).expect("valid link parameters");
            self.out.records.push(OpsRecord::Signal { tick: t, zone, seconds: signal });
            self.out.records.push(OpsRecord::Link { tick: t, zone, sample });
        }
    }

    fn people(&mut self, t: u64) {
        let p = &self.s.population;
        let n = self.g.n;
        if t.is_multiple_of(p.presence_interval) {
            for w in &self.walkers {
                self.out.presence.push(PresenceSample { tick: t, zone: ZoneId::new(w.row, w.col, 0) });
            }
        }
        if t > 0 && t.is_multiple_of(p.move_interval) {
            let tau = self.g.tau;
            for w in self.walkers.iter_mut() {
                let (dr, dc) = [(0i64, 0i64), (1, 0), (-1, 0), (0, 1), (0, -1)][self.rng_persons.gen_range(0..5)];
                let r = w.row as i64 + dr;
                let c = w.col as i64 + dc;
                if (0..n as i64).contains(&r) && (0..n as i64).contains(&c) {
                    w.row = r as usize;
                    w.col = c as usize;
                }
                w.x = (w.col as f64 + self.rng_persons.gen::<f64>()) * tau;
                w.y = (w.row as f64 + self.rng_persons.gen::<f64>()) * tau;
            }
        }
    }

    fn depot_service(&mut self, t: u64, log: &mut EventLog) {
        for i in 0..self.drones.len() {
            if let Phase::Servicing { done } = self.units[i].phase {
                if done <= t {
                    self.drones[i].replenish(&self.cfg);
                    self.in_bays -= 1;
                    self.units[i].phase = Phase::Ready;
                    self.drones[i].waypoint = None;
                    self.set_state(i, DroneState::Idle, t, log);
                }
            }
        }
        let minutes = match self.s.ops.mission {
            Mission::Scan => self.cfg.recharge_time,
            Mission::Spray => self.cfg.recharge_time + self.cfg.refill_time,
        };
        let service = (minutes * 60.0).round() as u64;
        while self.in_bays < self.s.fleet.depot_bays {
            let Some(i) = self.depot_queue.pop_front() else { break };
            self.in_bays += 1;
            self.units[i].phase = Phase::Servicing { done: t + service };
            self.set_state(i, DroneState::Refilling, t, log);
        }
    }

    fn fly(&mut self, t: u64, log: &mut EventLog) {
        for i in 0..self.drones.len() {
            let before = self.drones[i].state;
            self.drones[i].advance(1.0, &self.cfg);
            let after = self.drones[i].state;
            if after != before {
                // battery or tank ran out mid-flight
                self.out.states.push(StateRecord { tick: t + 1, drone: id(i), state: after });
                log.push(t + 1, Entity::Drone(id(i)), EventKind::State { state: after });
                if matches!(self.units[i].phase, Phase::Outbound | Phase::Hover) {
                    self.units[i].phase = Phase::Inbound;
                    self.units[i].target = None;
                }
            }
            let arrived = self.drones[i].waypoint.is_some_and(|w| self.drones[i].position.distance(&w) == 0.0);
            match self.units[i].phase {
                Phase::Outbound if arrived => {
                    self.units[i].phase = Phase::Hover;
                    self.units[i].zone_since = t + 1;
                    self.drones[i].set_state(DroneState::WaitingInTransferArea);
                    self.out.states.push(StateRecord { tick: t + 1, drone: id(i), state: DroneState::WaitingInTransferArea });
                    log.push(t + 1, Entity::Drone(id(i)), EventKind::State { state: DroneState::WaitingInTransferArea });
                }
                Phase::Inbound if arrived => {
                    self.units[i].phase = Phase::Queued;
                    self.depot_queue.push_back(i);
                }
                _ => {}
            }
        }
    }

    /// One tick of operations.
    pub fn step(&mut self, t: u64, log: &mut EventLog) -> Result<(), TransferError> {
        self.control(t, log);
        self.departures(t, log);
        self.hover_check(t, log);
        self.entries_and_moves(t, log)?;
        self.commit(t, log);
        self.work(t, log);
        self.link_samples(t);
        self.people(t);
        self.depot_service(t, log);
        self.fly(t, log);
        Ok(())
    }

    pub fn drones(&self) -> &[Drone] {
        &self.drones
    }

    pub fn phases(&self) -> impl Iterator<Item = Phase> + '_ {
        self.units.iter().map(|u| u.phase)
    }

    pub fn engine(&self) -> &TransferEngine {
        &self.engine
    }

    /// Zone ordinal order of a zone, for sorting exports.
    pub fn ordinal(&self, z: ZoneId) -> usize {
        drone_zone_value(z.row, z.col, self.g.n).expect("zone inside grid")
    }
}

fn temperature(w: &Walker, t: u64) -> f64 {
    match w.fever_onset {
        Some(onset) if t >= onset => {
            let rise = (FEVER_RISE_PER_HOUR * (t - onset) as f64 / 3600.0).min(FEVER_CEILING);
            w.base + rise
        }
        _ => w.base,
    }
}
