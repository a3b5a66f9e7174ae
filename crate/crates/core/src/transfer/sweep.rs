//! Route-following strategies: the zigzag pipeline and the parallel sweep.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::engine::TransferEngine;
use super::ledger::{Cell, Transition};
use super::TransferError;
use crate::fleet::DroneId;
use crate::zone_grid::{drone_zone_value, zone_at_ordinal, GridSpec, ZoneId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZigzagStep {
    Next(ZoneId),
    /// The route is complete; the next drone starts at this entry zone.
    Exit(ZoneId),
}

/// Next zone along the diagonal zone order. The entry zone is ordinal 0.
pub fn zigzag_route(current: ZoneId, g: &GridSpec) -> ZigzagStep {
    let ordinal = drone_zone_value(current.row, current.col, g.n).expect("zone inside grid");
    match zone_at_ordinal(ordinal + 1, g.n) {
        Some((row, col)) => ZigzagStep::Next(ZoneId::new(row, col, current.layer)),
        None => ZigzagStep::Exit(ZoneId::new(0, 0, current.layer)),
    }
}

/// Drones following each other along the zigzag route on one layer.
///
/// Each advance moves every drone one ordinal forward, starting from the
/// front so that each drone steps into a zone vacated the same tick. The
/// drone on the last ordinal leaves and a waiting drone may enter at the
/// entry zone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZigzagPipeline {
    pub layer: usize,
    members: BTreeMap<usize, DroneId>,
}

impl ZigzagPipeline {
    pub fn new(layer: usize) -> Self {
        ZigzagPipeline { layer, members: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn drones(&self) -> impl Iterator<Item = (usize, DroneId)> + '_ {
        self.members.iter().map(|(o, d)| (*o, *d))
    }

    /// Seats a drone on the zone with the given ordinal before the run.
    pub fn seat(&mut self, engine: &mut TransferEngine, ordinal: usize, drone: DroneId) -> Result<(), TransferError> {
        let n = engine.grid().n;
        let (row, col) = zone_at_ordinal(ordinal, n).ok_or(TransferError::RowOutOfRange { row: ordinal, n })?;
        engine.place(drone, Cell::Zone(ZoneId::new(row, col, self.layer)))?;
        self.members.insert(ordinal, drone);
        Ok(())
    }

    /// Returns the transitions made and the drones that completed the route.
    pub fn advance(
        &mut self,
        engine: &mut TransferEngine,
        entering: Option<DroneId>,
    ) -> Result<(Vec<Transition>, Vec<DroneId>), TransferError> {
        let g = *engine.grid();
        let mut moves = Vec::new();
        let mut exited = Vec::new();
        let mut next = BTreeMap::new();
        for (&ordinal, &drone) in self.members.iter().rev() {
            let (row, col) = zone_at_ordinal(ordinal, g.n).expect("member ordinal valid");
            match zigzag_route(ZoneId::new(row, col, self.layer), &g) {
                ZigzagStep::Next(z) => {
                    moves.push(engine.direct_step(drone, Some(Cell::Zone(z)))?);
                    next.insert(ordinal + 1, drone);
                }
                ZigzagStep::Exit(_) => {
                    moves.push(engine.direct_step(drone, None)?);
                    exited.push(drone);
                }
            }
        }
        self.members = next;
        if let Some(drone) = entering {
            let entry = Cell::Zone(ZoneId::new(0, 0, self.layer));
            if engine.ledger().is_free(entry) && !engine.is_reserved(entry) {
                moves.push(engine.direct_step(drone, Some(entry))?);
                self.members.insert(0, drone);
            } else {
                return Err(TransferError::CellUnavailable(entry));
            }
        }
        Ok((moves, exited))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowAssignment {
    pub row: usize,
    pub drone: DroneId,
}

/// Places the row drones on column `col`, with the stagger `l` rotating
/// which drone serves which row.
///
/// Drones are ranked by their base row; with stagger `l` the drone ranked
/// `(j + l) mod k` serves the `j`-th occupied row.
pub fn parallel_sweep_step(
    row_assignments: &[RowAssignment],
    col: usize,
    l: usize,
    g: &GridSpec,
) -> Result<Vec<RowAssignment>, TransferError> {
    if col >= g.n {
        return Err(TransferError::ColumnOutOfRange { col, n: g.n });
    }
    let mut base: Vec<RowAssignment> = row_assignments.to_vec();
    base.sort();
    for w in base.windows(2) {
        if w[0].row == w[1].row {
            return Err(TransferError::RowConflict(w[0].row));
        }
    }
    if let Some(bad) = base.iter().find(|a| a.row >= g.n) {
        return Err(TransferError::RowOutOfRange { row: bad.row, n: g.n });
    }
    let k = base.len();
    Ok((0..k)
        .map(|j| RowAssignment { row: base[j].row, drone: base[(j + l) % k.max(1)].drone })
        .collect())
}

/// Drones sweeping the layer column by column, one per row.
///
/// A pass enters at column 0, advances one column per call and leaves
/// after the last column; the stagger only takes effect when the next pass
/// enters, so drones never change rows mid-pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelSweep {
    pub layer: usize,
    base: Vec<RowAssignment>,
    current: Vec<RowAssignment>,
    col: Option<usize>,
    stagger: usize,
}

impl ParallelSweep {
    pub fn new(layer: usize, base: Vec<RowAssignment>, g: &GridSpec) -> Result<Self, TransferError> {
        parallel_sweep_step(&base, 0, 0, g)?;
        Ok(ParallelSweep { layer, base, current: Vec::new(), col: None, stagger: 0 })
    }

    pub fn column(&self) -> Option<usize> {
        self.col
    }

    pub fn stagger(&self) -> usize {
        self.stagger
    }

    pub fn assignments(&self) -> &[RowAssignment] {
        &self.current
    }

    /// Seats the pass on column `col` before the run.
    pub fn seat(&mut self, engine: &mut TransferEngine, col: usize) -> Result<(), TransferError> {
        let g = *engine.grid();
        let placed = parallel_sweep_step(&self.base, col, self.stagger, &g)?;
        for a in &placed {
            engine.place(a.drone, Cell::Zone(ZoneId::new(a.row, col, self.layer)))?;
        }
        self.current = placed;
        self.col = Some(col);
        Ok(())
    }

    /// Called when a scan interval has elapsed.
    pub fn bump_stagger(&mut self) {
        self.stagger += 1;
    }

    pub fn advance(&mut self, engine: &mut TransferEngine) -> Result<Vec<Transition>, TransferError> {
        let g = *engine.grid();
        let mut moves = Vec::new();
        match self.col {
            None => {
                let placed = parallel_sweep_step(&self.base, 0, self.stagger, &g)?;
                for a in &placed {
                    moves.push(engine.direct_step(a.drone, Some(Cell::Zone(ZoneId::new(a.row, 0, self.layer))))?);
                }
                self.current = placed;
                self.col = Some(0);
            }
            Some(c) if c + 1 >= g.n => {
                for a in &self.current {
                    moves.push(engine.direct_step(a.drone, None)?);
                }
                self.current.clear();
                self.col = None;
            }
            Some(c) => {
                for a in &self.current {
                    moves.push(engine.direct_step(a.drone, Some(Cell::Zone(ZoneId::new(a.row, c + 1, self.layer))))?);
                }
                self.col = Some(c + 1);
            }
        }
        Ok(moves)
    }
}
