//! Run exports: event log, per-window metrics, zone statistics, density
//! matrix and the manifest that lists them.
//!
//! Every data file opens with the scenario hash and seed: a `# ` comment
//! line in CSV, a header record in newline-delimited JSON. The manifest is
//! written before any other file.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::engine::RunOutput;
use super::SimEvent;
use crate::metrics::{drones_in_use, throughput};
use crate::zone_ops::OpsRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "ndjson",
        }
    }
}

/// Written first; lists every file the run produces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub out_dir: String,
    pub formats: Vec<Format>,
    /// simulated span in ticks; wall-clock times are left out so repeated
    /// runs write identical bytes
    pub start_tick: u64,
    pub stop_tick: u64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct ExportHeader<'a> {
    scenario_hash: &'a str,
    seed: u64,
}

#[derive(Debug, Clone, Serialize)]
struct EventRow {
    tick: u64,
    seq: u64,
    entity: String,
    kind: String,
    detail: String,
}

#[derive(Debug, Clone, Serialize)]
struct MetricsRow {
    start: u64,
    end: u64,
    busy: u64,
    dispatches: u64,
    cumulative_dispatches: u64,
    mean_utilization: f64,
    max_utilization: f64,
    drones_in_use: usize,
    link_samples: usize,
    mean_throughput: f64,
    mean_signal_time: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ZoneRow {
    network: u32,
    row: usize,
    col: usize,
    layer: usize,
    mean_signal_time: f64,
    throughput: f64,
    coverage_fraction: f64,
    persons_scanned: u64,
    fever_alarms: u64,
    sanitizations: u64,
    medications: u64,
}

fn event_row(e: &SimEvent) -> EventRow {
    let mut v = serde_json::to_value(&e.kind).expect("events serialize");
    if let Some(map) = v.as_object_mut() {
        map.remove("kind");
    }
    EventRow { tick: e.tick, seq: e.seq, entity: e.entity.to_string(), kind: e.kind.name().to_string(), detail: v.to_string() }
}

fn metrics_rows(out: &RunOutput) -> Vec<MetricsRow> {
    out.utilization
        .iter()
        .map(|w| {
            let mut rate = (0.0, 0usize);
            let mut signal = (0.0, 0usize);
            for r in out.ops.records.iter().filter(|r| (w.start..w.end).contains(&r.tick())) {
                match r {
                    OpsRecord::Link { sample, .. } => {
                        rate.0 += throughput(sample);
                        rate.1 += 1;
                    }
                    OpsRecord::Signal { seconds, .. } => {
                        signal.0 += seconds;
                        signal.1 += 1;
                    }
                    _ => {}
                }
            }
            let mean = |(s, n): (f64, usize)| if n == 0 { 0.0 } else { s / n as f64 };
            MetricsRow {
                start: w.start,
                end: w.end,
                busy: w.busy,
                dispatches: w.dispatches,
                cumulative_dispatches: w.cumulative_dispatches,
                mean_utilization: w.mean_utilization,
                max_utilization: w.max_utilization,
                drones_in_use: drones_in_use(&out.ops.states, w.start),
                link_samples: rate.1,
                mean_throughput: mean(rate),
                mean_signal_time: mean(signal),
            }
        })
        .collect()
}

fn zone_rows(out: &RunOutput) -> Vec<ZoneRow> {
    out.zone_stats
        .iter()
        .map(|s| ZoneRow {
            network: s.network.0,
            row: s.zone.row,
            col: s.zone.col,
            layer: s.zone.layer,
            mean_signal_time: s.qos.mean_signal_time,
            throughput: s.qos.throughput,
            coverage_fraction: s.qos.coverage_fraction,
            persons_scanned: s.experience.persons_scanned,
            fever_alarms: s.experience.fever_alarms,
            sanitizations: s.experience.sanitizations,
            medications: s.experience.medications,
        })
        .collect()
}

fn csv_bytes<T: Serialize>(header: &ExportHeader, rows: &[T]) -> Vec<u8> {
    let mut buf = format!("# scenario_hash={},seed={}\n", header.scenario_hash, header.seed).into_bytes();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    w.flush().expect("writing to memory");
    drop(w);
    buf
}

fn ndjson_bytes<T: Serialize>(header: &ExportHeader, rows: &[T]) -> Vec<u8> {
    let mut buf = serde_json::to_vec(header).expect("header serializes");
    buf.push(b'\n');
    for r in rows {
        serde_json::to_writer(&mut buf, r).expect("rows serialize");
        buf.push(b'\n');
    }
    buf
}

fn table<T: Serialize>(format: Format, header: &ExportHeader, rows: &[T]) -> Vec<u8> {
    match format {
        Format::Csv => csv_bytes(header, rows),
        Format::Json => ndjson_bytes(header, rows),
    }
}

/// Density counts as an n×n matrix, row 0 first.
fn density_csv(header: &ExportHeader, out: &RunOutput) -> Vec<u8> {
    let d = &out.density;
    let mut buf = format!("# scenario_hash={},seed={}\n", header.scenario_hash, header.seed).into_bytes();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
    let mut head = vec!["row".to_string()];
    head.extend((0..d.n).map(|c| format!("c{c}")));
    w.write_record(&head).expect("writing to memory");
    for r in 0..d.n {
        let mut rec = vec![r.to_string()];
        rec.extend((0..d.n).map(|c| d.get(r, c).to_string()));
        w.write_record(&rec).expect("writing to memory");
    }
    w.flush().expect("writing to memory");
    drop(w);
    buf
}

/// The files a run writes, in the order they are written after the
/// manifest.
pub fn planned_files(out: &RunOutput, format: Format) -> Vec<String> {
    let ext = format.ext();
    let mut files = vec![format!("events.{ext}"), format!("metrics.{ext}"), format!("zone_stats.{ext}")];
    if !out.ped.is_empty() {
        files.push(format!("ped.{ext}"));
    }
    files.push("density.csv".to_string());
    files.push("summary.json".to_string());
    files
}

/// Writes the manifest, then every file it lists, into `dir`.
pub fn write_run(
    out: &RunOutput,
    scenario_path: &str,
    scenario_hash: &str,
    dir: &Path,
    format: Format,
) -> io::Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let files = planned_files(out, format);
    let manifest = RunManifest {
        scenario: scenario_path.to_string(),
        scenario_hash: scenario_hash.to_string(),
        seed: out.seed,
        out_dir: dir.display().to_string(),
        formats: vec![format],
        start_tick: 0,
        stop_tick: out.scenario.duration,
        files: files.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;

    let header = ExportHeader { scenario_hash, seed: out.seed };
    let path = |name: &str| -> PathBuf { dir.join(name) };
    for name in &files {
        let bytes = match name.split('.').next().unwrap_or_default() {
            "events" => {
                let rows: Vec<EventRow> = out.log.events().iter().map(event_row).collect();
                table(format, &header, &rows)
            }
            "metrics" => table(format, &header, &metrics_rows(out)),
            "zone_stats" => table(format, &header, &zone_rows(out)),
            "ped" => table(format, &header, &out.ped),
            "density" => density_csv(&header, out),
            _ => {
                let mut v = serde_json::to_vec_pretty(&serde_json::json!({
                    "scenario_hash": scenario_hash,
                    "seed": out.seed,
                    "summary": out.summary,
                }))
                .expect("summary serializes");
                v.push(b'\n');
                v
            }
        };
        fs::write(path(name), bytes)?;
    }
    Ok(manifest)
}
