//! Deterministic discrete-event simulation: event log, seeded streams,
//! scenarios, the pedestrian pipeline and fleet operations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distancing::Directive;
use crate::fleet::{DroneId, DroneState};
use crate::transfer::{Cell, Link, RequestId, RequestStatus};
use crate::zone_grid::ZoneId;

pub mod engine;
pub mod export;
pub mod ops;
pub mod pedflow;
pub mod rng;
pub mod scenario;

pub use engine::{run, RunOutput, RunSummary};
pub use pedflow::{medicine_service_count, ped_flow_step, PedCounters, PedFlowSpec, PedFlowState};
pub use rng::RngStreams;
pub use scenario::{bundled, bundled_names, Scenario, ScenarioName, ValidationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Entity {
    System,
    Drone(DroneId),
    Person(u32),
    Zone(ZoneId),
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::System => f.write_str("system"),
            Entity::Drone(d) => write!(f, "{d}"),
            Entity::Person(p) => write!(f, "P{p}"),
            Entity::Zone(z) => write!(f, "Z{z}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    RunStart { scenario: String, seed: u64 },
    RunStop,
    State { state: DroneState },
    Move { from: Option<Cell>, to: Option<Cell>, link: Link },
    Request { request: RequestId, status: RequestStatus },
    Scan { zone: ZoneId, persons: usize },
    Alarm { zone: ZoneId, person: u32 },
    Sanitized { zone: ZoneId },
    /// People in a zone told to keep their distance.
    Intimation { zone: ZoneId, persons: usize },
    Directive { directive: Directive },
    PedArrive,
    /// Let through the gate; the person has been checked.
    PedAdmit,
    PedJoinQueue,
    PedRequeue,
    PedServiceStart { unit: usize },
    PedSink { served: bool },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::RunStart { .. } => "RunStart",
            EventKind::RunStop => "RunStop",
            EventKind::State { .. } => "State",
            EventKind::Move { .. } => "Move",
            EventKind::Request { .. } => "Request",
            EventKind::Scan { .. } => "Scan",
            EventKind::Alarm { .. } => "Alarm",
            EventKind::Sanitized { .. } => "Sanitized",
            EventKind::Intimation { .. } => "Intimation",
            EventKind::Directive { .. } => "Directive",
            EventKind::PedArrive => "PedArrive",
            EventKind::PedAdmit => "PedAdmit",
            EventKind::PedJoinQueue => "PedJoinQueue",
            EventKind::PedRequeue => "PedRequeue",
            EventKind::PedServiceStart { .. } => "PedServiceStart",
            EventKind::PedSink { .. } => "PedSink",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub tick: u64,
    pub seq: u64,
    pub entity: Entity,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Append-only log; `seq` numbers events within the run so `(tick, seq)` is
/// unique and increasing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    events: Vec<SimEvent>,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    /// Panics if `tick` lies before the last logged event.
    pub fn push(&mut self, tick: u64, entity: Entity, kind: EventKind) {
        let seq = self.events.len() as u64;
        if let Some(last) = self.events.last() {
            assert!(tick >= last.tick, "event at tick {tick} logged after tick {}", last.tick);
        }
        self.events.push(SimEvent { tick, seq, entity, kind });
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_strictly_ordered(&self) -> bool {
        self.events.windows(2).all(|w| (w[0].tick, w[0].seq) < (w[1].tick, w[1].seq))
    }
}
