//! Collision-free zone transfer protocols.
//!
//! Every drone is tracked in an [`OccupancyLedger`] whose cells are zones and
//! transfer lanes. Protocols only ever move a drone one cell per tick along a
//! link the ledger accepts, so the one-drone-per-cell invariant can be checked
//! after every single move.

mod engine;
mod hybrid;
mod ledger;
mod sweep;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fleet::{Drone, DroneId};
use crate::zone_grid::{in_collision_band, neighbors_of, zone_of_position, GridSpec, ZoneId};

pub use engine::{StepReport, TransferEngine, DEFAULT_TIMEOUT};
pub use hybrid::{hybrid_plan, stack_levels, HybridLevel, HybridPlan};
pub use ledger::{classify_link, Cell, LedgerError, Link, OccupancyLedger, Transition};
pub use sweep::{
    parallel_sweep_step, zigzag_route, ParallelSweep, RowAssignment, ZigzagPipeline, ZigzagStep,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    FixedArea,
    Zigzag,
    Parallel,
    MultiLayer,
    Hybrid,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RequestStatus {
    Pending,
    InProgress,
    Done,
    Aborted,
}

impl RequestStatus {
    pub fn is_final(self) -> bool {
        matches!(self, RequestStatus::Done | RequestStatus::Aborted)
    }

    /// Status changes only ever move forward.
    pub fn can_become(self, next: RequestStatus) -> bool {
        use RequestStatus::*;
        matches!(
            (self, next),
            (Pending, InProgress) | (Pending, Aborted) | (InProgress, Done) | (InProgress, Aborted)
        ) || self == next
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u64);

/// A drone asking to move from `from` into `to`, swapping with the
/// occupant of `to` if there is one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapRequest {
    pub requester: DroneId,
    pub from: ZoneId,
    pub to: ZoneId,
    pub strategy: Strategy,
    pub status: RequestStatus,
    pub issued_at: u64,
}

impl SwapRequest {
    pub fn new(
        requester: DroneId,
        from: ZoneId,
        to: ZoneId,
        strategy: Strategy,
        issued_at: u64,
    ) -> Result<Self, TransferError> {
        if from == to {
            return Err(TransferError::SameZone(from));
        }
        Ok(SwapRequest { requester, from, to, strategy, status: RequestStatus::Pending, issued_at })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransferError {
    #[error("request moves a drone from {0} to itself")]
    SameZone(ZoneId),
    #[error("zones {0} and {1} are not adjacent on one layer")]
    NotAdjacent(ZoneId, ZoneId),
    #[error("zone {0} is outside the grid")]
    UnknownZone(ZoneId),
    #[error("drone {drone} is not in zone {zone}")]
    NotInZone { drone: DroneId, zone: ZoneId },
    #[error("drone {0} already takes part in a transfer")]
    Busy(DroneId),
    #[error("layer {0} has no transfer layer above it")]
    MissingTransferLayer(usize),
    #[error("strategy {0} is not request driven")]
    UnsupportedStrategy(Strategy),
    #[error("layer {0} is claimed by more than one level")]
    LayerOverlap(usize),
    #[error("layer {layer} does not exist in a grid of {layers} layers")]
    LayerOutOfRange { layer: usize, layers: usize },
    #[error("a hybrid plan level cannot itself be hybrid")]
    NestedHybrid,
    #[error("rows {0} assigned to more than one drone")]
    RowConflict(usize),
    #[error("row {row} outside grid of side {n}")]
    RowOutOfRange { row: usize, n: usize },
    #[error("column {col} outside grid of side {n}")]
    ColumnOutOfRange { col: usize, n: usize },
    #[error("cell {0} is occupied or reserved")]
    CellUnavailable(Cell),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Drones that must hold position because `d` is inside a collision band.
///
/// Returns the occupants of every zone neighbouring the drone's zone when
/// the drone is within the band of an interior boundary; otherwise nothing.
pub fn band_signal(d: &Drone, g: &GridSpec, ledger: &OccupancyLedger) -> BTreeSet<DroneId> {
    let in_band = in_collision_band(d.position, g).unwrap_or(false);
    if !in_band {
        return BTreeSet::new();
    }
    let Ok(zone) = zone_of_position(d.position, g) else {
        return BTreeSet::new();
    };
    neighbors_of(zone, g)
        .into_iter()
        .filter_map(|z| ledger.occupant(Cell::Zone(z)))
        .filter(|&id| id != d.id)
        .collect()
}
