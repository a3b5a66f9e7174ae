//! Runs a scenario tick by tick and gathers everything the exports need.

use serde::{Deserialize, Serialize};

use super::ops::{Ops, OpsOutput};
use super::pedflow::{ped_flow_step, PedFlowState, PedRngs};
use super::rng::RngStreams;
use super::scenario::{Scenario, ValidationError};
use super::{Entity, EventKind, EventLog};
use crate::metrics::{drones_in_use, throughput, utilization_series, UtilizationWindow};
use crate::zone_ops::{
    compute_zone_stats, density_map, edge_aggregate, DensityMap, NetworkId, NetworkSummary, OpsRecord, ZoneStats,
};

/// Pedestrian counters after one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PedTick {
    pub tick: u64,
    pub arrivals: u64,
    pub in_system: u64,
    pub sinks: u64,
    pub checked: u64,
    pub served: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub duration: u64,
    pub drones: usize,
    pub events: usize,
    /// bits per second, mean over link samples; 0 without samples
    pub mean_throughput: f64,
    pub link_samples: usize,
    pub mean_signal_time: f64,
    /// drones in use sampled at every control interval
    pub in_use_min: usize,
    pub in_use_max: usize,
    pub max_window_utilization: f64,
    pub scans: u64,
    pub alarms: u64,
    pub sanitized: u64,
    pub intimations: u64,
    pub ped_arrivals: u64,
    pub ped_checked: u64,
    pub ped_served: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub seed: u64,
    pub log: EventLog,
    pub ops: OpsOutput,
    pub ped: Vec<PedTick>,
    pub utilization: Vec<UtilizationWindow>,
    pub zone_stats: Vec<ZoneStats>,
    pub networks: Vec<NetworkSummary>,
    pub density: DensityMap,
    pub summary: RunSummary,
}

/// Runs `s` with its own seed.
pub fn run(s: &Scenario) -> Result<RunOutput, Vec<ValidationError>> {
    s.validate()?;
    let streams = RngStreams::new(s.seed);
    let mut log = EventLog::new();
    let name = format!("{:?}", s.name);
    log.push(0, Entity::System, EventKind::RunStart { scenario: name, seed: s.seed });

    let mut ops = Ops::new(s, &streams, &mut log)
        .map_err(|e| vec![ValidationError::new("plan".to_string(), e)])?;
    let mut ped = s.ped_flow.as_ref().map(|spec| {
        let mut rngs = PedRngs::from_streams(&streams);
        let state = PedFlowState::new(spec, &mut rngs);
        (spec, rngs, state)
    });
    let mut ped_series = Vec::new();

    for t in 0..s.duration {
        if let Some((spec, rngs, state)) = ped.as_mut() {
            ped_flow_step(spec, s.fleet.drones, state, rngs, Some(&mut log));
            let c = state.counters;
            ped_series.push(PedTick {
                tick: t,
                arrivals: c.arrivals,
                in_system: state.in_system(),
                sinks: c.sinks,
                checked: c.checked,
                served: c.served,
            });
        }
        ops.step(t, &mut log).map_err(|e| vec![ValidationError::new("plan".to_string(), e)])?;
    }
    log.push(s.duration, Entity::System, EventKind::RunStop);

    let out = ops.out.clone();
    let window = s.control.window.max(1);
    let utilization = utilization_series(&out.states, window, s.duration);
    let mut zone_stats = Vec::new();
    let mut networks = Vec::new();
    for (a, &layer) in out.area_layers.iter().enumerate() {
        let stats: Vec<ZoneStats> = s
            .grid
            .zones_in_layer(layer)
            .map(|z| compute_zone_stats(z, NetworkId(a as u32), (0, s.duration), &out.records, &s.grid))
            .collect::<Result<_, _>>()
            .expect("duration is positive");
        if let Ok(summary) = edge_aggregate(&stats) {
            networks.push(summary);
        }
        zone_stats.extend(stats);
    }
    let density = density_map(&out.presence, (0, s.duration), s.grid.n, 0);
    let summary = summarize(s, &log, &out, &ped_series, &utilization);
    Ok(RunOutput {
        scenario: s.clone(),
        seed: s.seed,
        log,
        ops: out,
        ped: ped_series,
        utilization,
        zone_stats,
        networks,
        density,
        summary,
    })
}

fn summarize(
    s: &Scenario,
    log: &EventLog,
    out: &OpsOutput,
    ped: &[PedTick],
    utilization: &[UtilizationWindow],
) -> RunSummary {
    let mut rate = (0.0, 0usize);
    let mut signal = (0.0, 0usize);
    let (mut scans, mut alarms, mut sanitized) = (0, 0, 0);
    for r in &out.records {
        match r {
            OpsRecord::Link { sample, .. } => {
                rate.0 += throughput(sample);
                rate.1 += 1;
            }
            OpsRecord::Signal { seconds, .. } => {
                signal.0 += seconds;
                signal.1 += 1;
            }
            OpsRecord::Scanned { .. } => scans += 1,
            OpsRecord::Alarm { .. } => alarms += 1,
            OpsRecord::Sanitized { .. } => sanitized += 1,
            _ => {}
        }
    }
    let intimations = log
        .events()
        .iter()
        .map(|e| match e.kind {
            EventKind::Intimation { persons, .. } => persons as u64,
            _ => 0,
        })
        .sum();
    let mean = |(sum, n): (f64, usize)| if n == 0 { 0.0 } else { sum / n as f64 };
    let in_use: Vec<usize> =
        (0..s.duration).step_by(s.control.interval.max(1) as usize).map(|t| drones_in_use(&out.states, t)).collect();
    let last = ped.last().copied();
    RunSummary {
        duration: s.duration,
        drones: s.fleet.drones,
        events: log.len(),
        mean_throughput: mean(rate),
        link_samples: rate.1,
        mean_signal_time: mean(signal),
        in_use_min: in_use.iter().copied().min().unwrap_or(0),
        in_use_max: in_use.iter().copied().max().unwrap_or(0),
        max_window_utilization: utilization.iter().map(|w| w.mean_utilization).fold(0.0, f64::max),
        scans,
        alarms,
        sanitized,
        intimations,
        ped_arrivals: last.map_or(0, |p| p.arrivals),
        ped_checked: last.map_or(0, |p| p.checked),
        ped_served: last.map_or(0, |p| p.served),
    }
}
