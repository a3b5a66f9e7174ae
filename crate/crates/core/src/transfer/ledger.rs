use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fleet::DroneId;
use crate::zone_grid::{drone_zone_value, GridSpec, TransferArea, ZoneId};

/// A place a drone can occupy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cell {
    Zone(ZoneId),
    Lane(TransferArea),
}

impl Cell {
    pub fn layer(&self) -> usize {
        match self {
            Cell::Zone(z) => z.layer,
            Cell::Lane(t) => t.entry.layer,
        }
    }

    pub fn zone(&self) -> Option<ZoneId> {
        match self {
            Cell::Zone(z) => Some(*z),
            Cell::Lane(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Zone(z) => write!(f, "Z[{z}]"),
            Cell::Lane(t) => t.fmt(f),
        }
    }
}

/// How a single move connects two cells. `None` on either side of a move
/// means outside the managed airspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Link {
    /// Between 4-neighbours on one layer.
    Plane,
    /// From a zone into a lane on one of its edges.
    LaneEntry,
    /// From a lane into one of the two zones it joins.
    LaneExit,
    /// Straight up or down one layer.
    Vertical,
    /// One layer up or down while stepping to a 4-neighbour.
    Crosswise,
    /// Consecutive ordinals of the diagonal zone order.
    RouteHop,
    Enter,
    Exit,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Returns the link joining `from` to `to`, or `None` if no single protocol
/// step may connect them.
pub fn classify_link(from: Option<Cell>, to: Option<Cell>, g: &GridSpec) -> Option<Link> {
    let valid = |c: &Cell| match c {
        Cell::Zone(z) => g.contains(*z),
        Cell::Lane(t) => g.contains(t.entry) && g.contains(t.exit) && t.entry.is_plane_adjacent(&t.exit),
    };
    if from.as_ref().is_some_and(|c| !valid(c)) || to.as_ref().is_some_and(|c| !valid(c)) {
        return None;
    }
    match (from, to) {
        (None, Some(Cell::Zone(_))) => Some(Link::Enter),
        (Some(_), None) => Some(Link::Exit),
        (Some(Cell::Zone(z)), Some(Cell::Lane(t))) => {
            (t.entry == z || t.exit == z).then_some(Link::LaneEntry)
        }
        (Some(Cell::Lane(t)), Some(Cell::Zone(z))) => {
            (t.entry == z || t.exit == z).then_some(Link::LaneExit)
        }
        (Some(Cell::Zone(a)), Some(Cell::Zone(b))) => zone_link(a, b, g),
        _ => None,
    }
}

fn zone_link(a: ZoneId, b: ZoneId, g: &GridSpec) -> Option<Link> {
    let flat_a = a.on_layer(0);
    let flat_b = b.on_layer(0);
    if a.layer == b.layer {
        if a.is_plane_adjacent(&b) {
            return Some(Link::Plane);
        }
        let oa = drone_zone_value(a.row, a.col, g.n).ok()?;
        let ob = drone_zone_value(b.row, b.col, g.n).ok()?;
        return (ob == oa + 1).then_some(Link::RouteHop);
    }
    if a.layer.abs_diff(b.layer) != 1 {
        return None;
    }
    if flat_a == flat_b {
        Some(Link::Vertical)
    } else if flat_a.is_plane_adjacent(&flat_b) {
        Some(Link::Crosswise)
    } else {
        None
    }
}

/// One ledger change, as appended to the event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub tick: u64,
    pub drone: DroneId,
    pub from: Option<Cell>,
    pub to: Option<Cell>,
    pub link: Link,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("cell {cell} already holds drone {holder}")]
    CellOccupied { cell: Cell, holder: DroneId },
    #[error("drone {0} is already in the ledger")]
    AlreadyPlaced(DroneId),
    #[error("drone {0} is not in the ledger")]
    UnknownDrone(DroneId),
    #[error("no single step links {from:?} to {to:?}")]
    NotAdjacent { from: Option<Cell>, to: Option<Cell> },
    #[error("ledger inconsistent: {0}")]
    Corrupt(String),
}

/// Two-way map between cells and the drones in them.
///
/// Each cell holds at most one drone and each drone sits in exactly one
/// cell. Every mutation checks both conditions before it lands, so the
/// ledger cannot reach a state that breaks them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyLedger {
    by_cell: BTreeMap<Cell, DroneId>,
    by_drone: BTreeMap<DroneId, Cell>,
}

impl OccupancyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn occupant(&self, cell: Cell) -> Option<DroneId> {
        self.by_cell.get(&cell).copied()
    }

    pub fn cell_of(&self, drone: DroneId) -> Option<Cell> {
        self.by_drone.get(&drone).copied()
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        !self.by_cell.contains_key(&cell)
    }

    pub fn len(&self) -> usize {
        self.by_drone.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_drone.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DroneId, Cell)> + '_ {
        self.by_drone.iter().map(|(d, c)| (*d, *c))
    }

    /// Puts a drone into the ledger without any adjacency check; used to lay
    /// out the initial fleet.
    pub fn place(&mut self, drone: DroneId, cell: Cell) -> Result<(), LedgerError> {
        if self.by_drone.contains_key(&drone) {
            return Err(LedgerError::AlreadyPlaced(drone));
        }
        if let Some(&holder) = self.by_cell.get(&cell) {
            return Err(LedgerError::CellOccupied { cell, holder });
        }
        self.by_cell.insert(cell, drone);
        self.by_drone.insert(drone, cell);
        Ok(())
    }

    /// Moves a drone one step. `to = None` takes it out of the airspace;
    /// a drone not yet in the ledger enters with `Link::Enter`.
    pub fn step(&mut self, drone: DroneId, to: Option<Cell>, g: &GridSpec) -> Result<Link, LedgerError> {
        let from = self.cell_of(drone);
        let link = classify_link(from, to, g).ok_or(LedgerError::NotAdjacent { from, to })?;
        if let Some(cell) = to {
            if let Some(&holder) = self.by_cell.get(&cell) {
                return Err(LedgerError::CellOccupied { cell, holder });
            }
        }
        if let Some(cell) = from {
            self.by_cell.remove(&cell);
            self.by_drone.remove(&drone);
        }
        if let Some(cell) = to {
            self.by_cell.insert(cell, drone);
            self.by_drone.insert(drone, cell);
        }
        Ok(link)
    }

    /// Re-derives the collision invariant from scratch.
    pub fn check(&self) -> Result<(), LedgerError> {
        if self.by_cell.len() != self.by_drone.len() {
            return Err(LedgerError::Corrupt(format!(
                "{} occupied cells but {} placed drones",
                self.by_cell.len(),
                self.by_drone.len()
            )));
        }
        for (cell, drone) in &self.by_cell {
            if self.by_drone.get(drone) != Some(cell) {
                return Err(LedgerError::Corrupt(format!("{cell} lists {drone} but not vice versa")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> GridSpec {
        GridSpec::new(3, 10.0, 2).unwrap()
    }

    fn z(r: usize, c: usize, l: usize) -> Cell {
        Cell::Zone(ZoneId::new(r, c, l))
    }

    #[test]
    fn link_classes() {
        let g = g();
        let lane = Cell::Lane(TransferArea::between(ZoneId::new(0, 0, 0), ZoneId::new(0, 1, 0)).unwrap());
        assert_eq!(classify_link(Some(z(0, 0, 0)), Some(z(0, 1, 0)), &g), Some(Link::Plane));
        assert_eq!(classify_link(Some(z(0, 0, 0)), Some(lane), &g), Some(Link::LaneEntry));
        assert_eq!(classify_link(Some(z(0, 1, 0)), Some(lane), &g), Some(Link::LaneEntry));
        assert_eq!(classify_link(Some(lane), Some(z(0, 1, 0)), &g), Some(Link::LaneExit));
        assert_eq!(classify_link(Some(lane), Some(z(1, 1, 0)), &g), None);
        assert_eq!(classify_link(Some(z(1, 1, 1)), Some(z(1, 1, 0)), &g), Some(Link::Vertical));
        assert_eq!(classify_link(Some(z(1, 1, 1)), Some(z(1, 2, 0)), &g), Some(Link::Crosswise));
        assert_eq!(classify_link(Some(z(1, 1, 1)), Some(z(2, 2, 0)), &g), None);
        // ordinal 2 is (1,0) and ordinal 3 is (0,2)
        assert_eq!(classify_link(Some(z(1, 0, 0)), Some(z(0, 2, 0)), &g), Some(Link::RouteHop));
        assert_eq!(classify_link(Some(z(0, 2, 0)), Some(z(1, 0, 0)), &g), None);
        assert_eq!(classify_link(None, Some(z(0, 0, 0)), &g), Some(Link::Enter));
        assert_eq!(classify_link(None, Some(lane), &g), None);
        assert_eq!(classify_link(Some(lane), None, &g), Some(Link::Exit));
        assert_eq!(classify_link(Some(z(3, 0, 0)), None, &g), None);
    }

    #[test]
    fn ledger_rejects_double_occupancy() {
        let g = g();
        let mut l = OccupancyLedger::new();
        l.place(DroneId(1), z(0, 0, 0)).unwrap();
        l.place(DroneId(2), z(0, 1, 0)).unwrap();
        assert_eq!(
            l.place(DroneId(3), z(0, 0, 0)),
            Err(LedgerError::CellOccupied { cell: z(0, 0, 0), holder: DroneId(1) })
        );
        assert_eq!(l.place(DroneId(1), z(2, 2, 0)), Err(LedgerError::AlreadyPlaced(DroneId(1))));
        assert!(matches!(
            l.step(DroneId(1), Some(z(0, 1, 0)), &g),
            Err(LedgerError::CellOccupied { .. })
        ));
        assert!(matches!(
            l.step(DroneId(1), Some(z(2, 2, 0)), &g),
            Err(LedgerError::NotAdjacent { .. })
        ));
        assert_eq!(l.step(DroneId(1), Some(z(1, 0, 0)), &g), Ok(Link::Plane));
        assert_eq!(l.cell_of(DroneId(1)), Some(z(1, 0, 0)));
        assert!(l.is_free(z(0, 0, 0)));
        assert_eq!(l.step(DroneId(2), None, &g), Ok(Link::Exit));
        assert_eq!(l.len(), 1);
        l.check().unwrap();
    }
}
