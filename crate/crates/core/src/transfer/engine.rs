use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ledger::{Cell, OccupancyLedger, Transition};
use super::{RequestId, RequestStatus, Strategy, SwapRequest, TransferError};
use crate::fleet::DroneId;
use crate::zone_grid::{drone_zone_value, GridSpec, TransferArea, ZoneId};

/// Ticks a request may wait without progress before it is aborted.
pub const DEFAULT_TIMEOUT: u64 = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub request: RequestId,
    pub requester: DroneId,
    pub status: RequestStatus,
}

/// Everything that happened during one tick.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub tick: u64,
    pub transitions: Vec<Transition>,
    pub changes: Vec<StatusChange>,
}

#[derive(Debug, Clone)]
struct Leg {
    drone: DroneId,
    path: Vec<Cell>,
    at: usize,
}

impl Leg {
    fn done(&self) -> bool {
        self.at + 1 >= self.path.len()
    }
}

#[derive(Debug, Clone)]
struct Active {
    id: RequestId,
    req: SwapRequest,
    partner: Option<DroneId>,
    legs: Vec<Leg>,
    reserved: Vec<Cell>,
    last_progress: u64,
    retreating: bool,
}

impl Active {
    fn is_layer_move(&self) -> bool {
        self.req.strategy == Strategy::MultiLayer && self.partner.is_none()
    }
}

enum Admission {
    Admit { legs: Vec<Leg> },
    Wait,
    Abort,
}

/// Runs swap and move requests over a shared occupancy ledger, one tick at
/// a time.
///
/// Requests reserve every cell they will pass through when they are
/// admitted, and are admitted in order of the lower zone ordinal of their
/// edge, then issue tick, then drone id. A request that makes no progress
/// for `timeout` ticks is aborted; drones that had already left home fly
/// their path back before the reservations are released.
#[derive(Debug, Clone)]
pub struct TransferEngine {
    grid: GridSpec,
    ledger: OccupancyLedger,
    timeout: u64,
    tick: u64,
    next_id: u64,
    active: BTreeMap<RequestId, Active>,
    reserved: BTreeMap<Cell, RequestId>,
    busy: BTreeMap<DroneId, RequestId>,
    moved_at: BTreeMap<DroneId, u64>,
    finished: BTreeMap<RequestId, RequestStatus>,
    direct: Vec<Transition>,
}

impl TransferEngine {
    pub fn new(grid: GridSpec, timeout: u64) -> Self {
        TransferEngine {
            grid,
            ledger: OccupancyLedger::new(),
            timeout: timeout.max(1),
            tick: 0,
            next_id: 0,
            active: BTreeMap::new(),
            reserved: BTreeMap::new(),
            busy: BTreeMap::new(),
            moved_at: BTreeMap::new(),
            finished: BTreeMap::new(),
            direct: Vec::new(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn ledger(&self) -> &OccupancyLedger {
        &self.ledger
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn timeout(&self) -> u64 {
        self.timeout
    }

    pub fn is_busy(&self, drone: DroneId) -> bool {
        self.busy.contains_key(&drone)
    }

    pub fn is_reserved(&self, cell: Cell) -> bool {
        self.reserved.contains_key(&cell)
    }

    pub fn status(&self, id: RequestId) -> Option<RequestStatus> {
        self.active.get(&id).map(|a| a.req.status).or_else(|| self.finished.get(&id).copied())
    }

    /// Requests still holding drones or reservations.
    pub fn open_requests(&self) -> impl Iterator<Item = (RequestId, &SwapRequest)> + '_ {
        self.active.values().map(|a| (a.id, &a.req))
    }

    /// Seats a drone without any adjacency check, for initial layout.
    pub fn place(&mut self, drone: DroneId, cell: Cell) -> Result<(), TransferError> {
        if self.reserved.contains_key(&cell) {
            return Err(TransferError::CellUnavailable(cell));
        }
        self.ledger.place(drone, cell)?;
        Ok(())
    }

    /// Moves a drone that is not part of any request by one step. Used for
    /// arrivals, departures, parking in lanes and the sweep strategies.
    pub fn direct_step(&mut self, drone: DroneId, to: Option<Cell>) -> Result<Transition, TransferError> {
        if self.busy.contains_key(&drone) {
            return Err(TransferError::Busy(drone));
        }
        if self.moved_at.get(&drone) == Some(&self.tick) {
            return Err(TransferError::Busy(drone));
        }
        if let Some(cell) = to {
            if self.reserved.contains_key(&cell) || !self.ledger.is_free(cell) {
                return Err(TransferError::CellUnavailable(cell));
            }
        }
        let from = self.ledger.cell_of(drone);
        let link = self.ledger.step(drone, to, &self.grid)?;
        self.moved_at.insert(drone, self.tick);
        let t = Transition { tick: self.tick, drone, from, to, link };
        self.direct.push(t);
        Ok(t)
    }

    pub fn submit(&mut self, req: SwapRequest) -> Result<RequestId, TransferError> {
        let g = self.grid;
        for z in [req.from, req.to] {
            if !g.contains(z) {
                return Err(TransferError::UnknownZone(z));
            }
        }
        if req.from == req.to {
            return Err(TransferError::SameZone(req.from));
        }
        if self.ledger.cell_of(req.requester) != Some(Cell::Zone(req.from)) {
            return Err(TransferError::NotInZone { drone: req.requester, zone: req.from });
        }
        match req.strategy {
            Strategy::FixedArea => {
                if !req.from.is_plane_adjacent(&req.to) {
                    return Err(TransferError::NotAdjacent(req.from, req.to));
                }
            }
            Strategy::MultiLayer => {
                if req.from.layer != req.to.layer {
                    return Err(TransferError::NotAdjacent(req.from, req.to));
                }
                if req.from.layer == 0 {
                    return Err(TransferError::MissingTransferLayer(req.from.layer));
                }
            }
            other => return Err(TransferError::UnsupportedStrategy(other)),
        }
        if self.busy.contains_key(&req.requester) {
            return Err(TransferError::Busy(req.requester));
        }
        let partner = self.ledger.occupant(Cell::Zone(req.to));
        if let Some(p) = partner {
            if self.busy.contains_key(&p) {
                return Err(TransferError::Busy(p));
            }
        }
        let id = RequestId(self.next_id);
        self.next_id += 1;
        self.busy.insert(req.requester, id);
        if let Some(p) = partner {
            self.busy.insert(p, id);
        }
        let mut req = req;
        req.status = RequestStatus::Pending;
        self.active.insert(
            id,
            Active {
                id,
                req,
                partner,
                legs: Vec::new(),
                reserved: Vec::new(),
                last_progress: self.tick,
                retreating: false,
            },
        );
        Ok(id)
    }

    fn order_key(&self, a: &Active) -> (usize, u64, DroneId) {
        let n = self.grid.n;
        let ord = |z: ZoneId| drone_zone_value(z.row, z.col, n).unwrap_or(usize::MAX);
        (ord(a.req.from).min(ord(a.req.to)), a.req.issued_at, a.req.requester)
    }

    fn ordered_ids(&self) -> Vec<RequestId> {
        let mut ids: Vec<_> = self.active.values().map(|a| (self.order_key(a), a.id)).collect();
        ids.sort();
        ids.into_iter().map(|(_, id)| id).collect()
    }

    /// Advances every open request by one tick.
    pub fn step(&mut self) -> StepReport {
        let now = self.tick;
        let mut report = StepReport { tick: now, transitions: std::mem::take(&mut self.direct), changes: Vec::new() };

        self.resolve_contention(&mut report);

        for id in self.ordered_ids() {
            if self.active[&id].req.status != RequestStatus::Pending {
                continue;
            }
            match self.admit(&self.active[&id]) {
                Admission::Admit { legs } => {
                    let reserved: BTreeSet<Cell> = legs.iter().flat_map(|l| l.path.iter().copied()).collect();
                    for &cell in &reserved {
                        self.reserved.insert(cell, id);
                    }
                    let a = self.active.get_mut(&id).expect("id listed");
                    a.legs = legs;
                    a.reserved = reserved.into_iter().collect();
                    a.last_progress = now;
                    set_status(a, RequestStatus::InProgress, &mut report);
                }
                Admission::Wait => {}
                Admission::Abort => self.abort_pending(id, &mut report),
            }
        }

        for id in self.ordered_ids() {
            let status = self.active[&id].req.status;
            if status == RequestStatus::Pending {
                if now.saturating_sub(self.active[&id].req.issued_at) + 1 >= self.timeout {
                    self.abort_pending(id, &mut report);
                }
                continue;
            }
            let progressed = self.advance(id, &mut report);
            let a = &self.active[&id];
            if a.legs.iter().all(Leg::done) {
                self.finish(id, &mut report);
            } else if !progressed
                && !a.retreating
                && now - a.last_progress + 1 >= self.timeout
                && !a.legs.iter().any(|l| l.done() && l.at > 0)
            {
                self.start_retreat(id, &mut report);
            }
        }

        self.tick += 1;
        report
    }

    /// Several layered moves into the same empty zone: the first request by
    /// issue tick then drone id keeps the zone, the others are aborted.
    fn resolve_contention(&mut self, report: &mut StepReport) {
        let mut claims: BTreeMap<ZoneId, (u64, DroneId)> = BTreeMap::new();
        for a in self.active.values() {
            if a.is_layer_move() && a.req.status != RequestStatus::Pending && !a.retreating {
                claims.insert(a.req.to, (0, a.req.requester));
            }
        }
        let mut pending: Vec<_> = self
            .active
            .values()
            .filter(|a| a.is_layer_move() && a.req.status == RequestStatus::Pending)
            .map(|a| ((a.req.issued_at, a.req.requester), a.req.to, a.id))
            .collect();
        pending.sort();
        let mut losers = Vec::new();
        for (key, target, id) in pending {
            match claims.entry(target) {
                std::collections::btree_map::Entry::Occupied(_) => losers.push(id),
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert(key);
                }
            }
        }
        for id in losers {
            self.abort_pending(id, report);
        }
    }

    fn admit(&self, a: &Active) -> Admission {
        let (from, to) = (a.req.from, a.req.to);
        let requester = a.req.requester;
        if self.ledger.cell_of(requester) != Some(Cell::Zone(from)) {
            return Admission::Abort;
        }
        match a.partner {
            Some(p) if self.ledger.cell_of(p) != Some(Cell::Zone(to)) => return Admission::Abort,
            None if !self.ledger.is_free(Cell::Zone(to)) => return Admission::Wait,
            _ => {}
        }
        let legs = match a.req.strategy {
            Strategy::FixedArea => self.fixed_area_plan(requester, a.partner, from, to),
            Strategy::MultiLayer => self.layered_plan(requester, a.partner, from, to),
            _ => None,
        };
        let Some(legs) = legs else { return Admission::Wait };
        let clash = legs
            .iter()
            .flat_map(|l| l.path.iter())
            .any(|c| self.reserved.get(c).is_some_and(|&holder| holder != a.id));
        if clash {
            Admission::Wait
        } else {
            Admission::Admit { legs }
        }
    }

    /// Cell paths for a swap through the pair of transfer lanes on one edge.
    ///
    /// With both lanes empty each drone takes the lane leading towards its
    /// target. With one lane taken, the drone able to move parks in the free
    /// lane and the other follows once the taken lane clears; both then end
    /// in the other's zone. With both lanes taken the request waits.
    fn fixed_area_plan(&self, a_id: DroneId, partner: Option<DroneId>, a: ZoneId, b: ZoneId) -> Option<Vec<Leg>> {
        let ab = Cell::Lane(TransferArea::between(a, b)?);
        let ba = Cell::Lane(TransferArea::between(b, a)?);
        let (za, zb) = (Cell::Zone(a), Cell::Zone(b));
        let ab_free = self.ledger.is_free(ab);
        let ba_free = self.ledger.is_free(ba);
        let leg = |drone, path: Vec<Cell>| Leg { drone, path, at: 0 };
        match partner {
            Some(b_id) => match (ab_free, ba_free) {
                (true, true) => Some(vec![leg(a_id, vec![za, ab, zb]), leg(b_id, vec![zb, ba, za])]),
                (false, false) => None,
                _ => Some(vec![leg(a_id, vec![za, ba, zb]), leg(b_id, vec![zb, ab, za])]),
            },
            None => {
                let lane = if ab_free {
                    ab
                } else if ba_free {
                    ba
                } else {
                    return None;
                };
                Some(vec![leg(a_id, vec![za, lane, zb])])
            }
        }
    }

    /// Cell paths through the transfer layer directly above.
    ///
    /// Adjacent swaps climb and then descend crosswise into the exchanged
    /// zones. Moves into an empty zone climb, cross the transfer layer and
    /// descend. Swaps between distant zones climb and then pass each other on
    /// the transfer layer through its lanes, one per direction.
    fn layered_plan(&self, a_id: DroneId, partner: Option<DroneId>, a: ZoneId, b: ZoneId) -> Option<Vec<Leg>> {
        let t = a.layer.checked_sub(1)?;
        let (ua, ub) = (a.on_layer(t), b.on_layer(t));
        let route = manhattan_route(ua, ub);
        let leg = |drone, path: Vec<Cell>| Leg { drone, path, at: 0 };
        let legs = match partner {
            Some(b_id) if a.is_plane_adjacent(&b) => vec![
                leg(a_id, vec![Cell::Zone(a), Cell::Zone(ua), Cell::Zone(b)]),
                leg(b_id, vec![Cell::Zone(b), Cell::Zone(ub), Cell::Zone(a)]),
            ],
            Some(b_id) => {
                let forward = laned_route(&route);
                let mut back_route = route.clone();
                back_route.reverse();
                let backward = laned_route(&back_route);
                let mut pa = vec![Cell::Zone(a)];
                pa.extend(forward);
                pa.push(Cell::Zone(b));
                let mut pb = vec![Cell::Zone(b)];
                pb.extend(backward);
                pb.push(Cell::Zone(a));
                vec![leg(a_id, pa), leg(b_id, pb)]
            }
            None => {
                let mut pa = vec![Cell::Zone(a)];
                pa.extend(route.iter().map(|&z| Cell::Zone(z)));
                pa.push(Cell::Zone(b));
                vec![leg(a_id, pa)]
            }
        };
        // the transfer layer must be clear along the whole way
        let clear = legs.iter().flat_map(|l| l.path.iter()).filter(|c| c.layer() == t).all(|&c| self.ledger.is_free(c));
        clear.then_some(legs)
    }

    fn advance(&mut self, id: RequestId, report: &mut StepReport) -> bool {
        let now = self.tick;
        let g = self.grid;
        let a = self.active.get_mut(&id).expect("id listed");
        let mut progressed = false;
        for leg in a.legs.iter_mut() {
            if leg.done() || self.moved_at.get(&leg.drone) == Some(&now) {
                continue;
            }
            let from = leg.path[leg.at];
            let next = leg.path[leg.at + 1];
            if !self.ledger.is_free(next) {
                continue;
            }
            let link = self
                .ledger
                .step(leg.drone, Some(next), &g)
                .expect("planned paths only use valid links into free cells");
            leg.at += 1;
            self.moved_at.insert(leg.drone, now);
            report.transitions.push(Transition { tick: now, drone: leg.drone, from: Some(from), to: Some(next), link });
            progressed = true;
        }
        if progressed {
            a.last_progress = now;
        }
        progressed
    }

    fn start_retreat(&mut self, id: RequestId, report: &mut StepReport) {
        let a = self.active.get_mut(&id).expect("id listed");
        for leg in a.legs.iter_mut() {
            let mut back: Vec<Cell> = leg.path[..=leg.at].to_vec();
            back.reverse();
            leg.path = back;
            leg.at = 0;
        }
        a.retreating = true;
        a.last_progress = self.tick;
        set_status(a, RequestStatus::Aborted, report);
        if a.legs.iter().all(Leg::done) {
            self.release(id);
        }
    }

    fn finish(&mut self, id: RequestId, report: &mut StepReport) {
        let a = self.active.get_mut(&id).expect("id listed");
        if !a.retreating {
            set_status(a, RequestStatus::Done, report);
        }
        self.release(id);
    }

    fn abort_pending(&mut self, id: RequestId, report: &mut StepReport) {
        if let Some(a) = self.active.get_mut(&id) {
            set_status(a, RequestStatus::Aborted, report);
            self.release(id);
        }
    }

    fn release(&mut self, id: RequestId) {
        let Some(a) = self.active.remove(&id) else { return };
        for cell in &a.reserved {
            if self.reserved.get(cell) == Some(&id) {
                self.reserved.remove(cell);
            }
        }
        self.busy.retain(|_, r| *r != id);
        self.finished.insert(id, a.req.status);
    }

    /// Checks the ledger and the engine's own bookkeeping.
    pub fn check(&self) -> Result<(), TransferError> {
        self.ledger.check()?;
        for (drone, id) in &self.busy {
            if !self.active.contains_key(id) {
                return Err(TransferError::Busy(*drone));
            }
        }
        Ok(())
    }
}

fn set_status(a: &mut Active, status: RequestStatus, report: &mut StepReport) {
    debug_assert!(a.req.status.can_become(status));
    if a.req.status != status {
        a.req.status = status;
        report.changes.push(StatusChange { request: a.id, requester: a.req.requester, status });
    }
}

/// Zones from `a` to `b` inclusive on one layer, rows first.
fn manhattan_route(a: ZoneId, b: ZoneId) -> Vec<ZoneId> {
    let mut out = vec![a];
    let mut cur = a;
    while cur.row != b.row {
        cur.row = if b.row > cur.row { cur.row + 1 } else { cur.row - 1 };
        out.push(cur);
    }
    while cur.col != b.col {
        cur.col = if b.col > cur.col { cur.col + 1 } else { cur.col - 1 };
        out.push(cur);
    }
    out
}

/// Interleaves a zone route with the lane leading along each edge.
fn laned_route(route: &[ZoneId]) -> Vec<Cell> {
    let mut out = Vec::with_capacity(route.len() * 2);
    for w in route.windows(2) {
        out.push(Cell::Zone(w[0]));
        out.push(Cell::Lane(TransferArea::between(w[0], w[1]).expect("route steps are adjacent")));
    }
    if let Some(&last) = route.last() {
        out.push(Cell::Zone(last));
    }
    out
}
