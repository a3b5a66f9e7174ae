//! Figure data: calibrated sweeps written as tidy `(x, y, series)` CSV with
//! a pass/fail summary against the reference values.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::metrics::{calibrate_rate, coverage_time, drones_in_use, sample_signal_time, CoverageModel, SignalTimeModel};
use crate::sim::pedflow::{calibrate_arrival_rate, simulate_ped_flow};
use crate::sim::{bundled, run, RunOutput};
use crate::zone_ops::OpsRecord;
use crate::metrics::throughput;

pub const FIGURES: [&str; 6] = ["fig17", "fig21", "fig22", "fig26", "fig27", "fig28"];

/// Route length of the coverage sweep, km.
pub const COVERAGE_ROUTE_KM: f64 = 1200.0;
/// Reference makespans in minutes for 3, 10, 20 and 30 drones.
pub const COVERAGE_MINUTES: [(usize, f64); 4] = [(3, 18900.0), (10, 9390.0), (20, 3680.0), (30, 2293.0)];
pub const COVERAGE_TOL: f64 = 0.25;

/// Reference counts of persons checked and served in 55 minutes.
pub const PED_DRONES: [usize; 4] = [3, 10, 20, 30];
pub const PED_CHECKED: [u64; 4] = [3389, 13398, 16298, 19697];
pub const PED_SERVED: [u64; 4] = [1612, 10073, 13129, 16166];
pub const PED_TOL: f64 = 0.30;
pub const PED_MINUTES: u64 = 55;

pub const SIGNAL_DRAWS: usize = 100_000;
pub const SIGNAL_MEAN: f64 = 4.1;
pub const SIGNAL_MEAN_TOL: f64 = 0.2;

pub const IN_USE_BAND: (f64, f64) = (20.0, 60.0);
pub const UTILIZATION_BAND: (f64, f64) = (0.0, 0.85);
pub const THROUGHPUT_BAND_MBPS: (f64, f64) = (35.0, 70.0);
pub const PARALLEL_THROUGHPUT_BAND_MBPS: (f64, f64) = (35.0, 80.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub x: f64,
    pub y: f64,
    pub series: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Check {
        Check { name: name.into(), value, lo: target * (1.0 - tol), hi: target * (1.0 + tol) }
    }

    pub fn band(name: impl Into<String>, value: f64, (lo, hi): (f64, f64)) -> Check {
        Check { name: name.into(), value, lo, hi }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Check {
        Check { name: name.into(), value: f64::from(u8::from(ok)), lo: 1.0, hi: 1.0 }
    }

    pub fn passed(&self) -> bool {
        self.lo <= self.value && self.value <= self.hi
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {} in [{}, {}]", self.name, self.value, self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub id: &'static str,
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
    /// calibrated parameters and other context for the summary
    pub notes: Vec<String>,
}

impl Figure {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

fn row(x: f64, y: f64, series: &str) -> Row {
    Row { x, y, series: series.to_string() }
}

/// Makespans after calibrating the spray rate on the 3-drone point.
pub fn fig17() -> Figure {
    let (d0, m0) = COVERAGE_MINUTES[0];
    let cm = calibrate_rate(COVERAGE_ROUTE_KM, d0, m0, &CoverageModel::default());
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let notes = vec![format!("calibrated per_drone_rate: {} km/min", cm.per_drone_rate)];
    let mut times = Vec::new();
    for &(d, reference) in &COVERAGE_MINUTES {
        let t = coverage_time(COVERAGE_ROUTE_KM, d, &cm);
        rows.push(row(d as f64, t, "simulated"));
        rows.push(row(d as f64, reference, "reference"));
        if d != d0 {
            checks.push(Check::within(format!("makespan minutes, {d} drones"), t, reference, COVERAGE_TOL));
        }
        times.push(t);
    }
    checks.push(Check::holds("makespan strictly decreasing in drones", times.windows(2).all(|w| w[1] < w[0])));
    Figure { id: "fig17", rows, checks, notes }
}

/// Checked and served counts for 3, 10, 20 and 30 drones.
pub struct PedSweep {
    pub arrival_rate: f64,
    pub checked: Vec<u64>,
    pub served: Vec<u64>,
}

pub fn ped_sweep(threads: usize) -> PedSweep {
    let s = bundled("case4").expect("bundled case4");
    let mut spec = s.ped_flow.clone().expect("case4 has a pedestrian flow");
    let ticks = PED_MINUTES * 60;
    spec.arrival_rate = calibrate_arrival_rate(&spec, PED_DRONES[0], ticks, s.seed, PED_CHECKED[0]);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool");
    let counts: Vec<(u64, u64)> = pool.install(|| {
        PED_DRONES
            .par_iter()
            .map(|&k| {
                let (state, _) = simulate_ped_flow(&spec, k, ticks, s.seed, None);
                (state.counters.checked, state.counters.served)
            })
            .collect()
    });
    PedSweep {
        arrival_rate: spec.arrival_rate,
        checked: counts.iter().map(|c| c.0).collect(),
        served: counts.iter().map(|c| c.1).collect(),
    }
}

fn ped_notes(sw: &PedSweep) -> Vec<String> {
    vec![format!("calibrated arrival rate: {} persons per line per minute", sw.arrival_rate)]
}

pub fn fig21(threads: usize) -> Figure {
    let sw = ped_sweep(threads);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (i, &k) in PED_DRONES.iter().enumerate() {
        rows.push(row(k as f64, sw.checked[i] as f64, "simulated"));
        rows.push(row(k as f64, PED_CHECKED[i] as f64, "reference"));
        checks.push(Check::within(format!("checked, {k} drones"), sw.checked[i] as f64, PED_CHECKED[i] as f64, PED_TOL));
    }
    checks.push(Check::holds("checked non-decreasing in drones", sw.checked.windows(2).all(|w| w[0] <= w[1])));
    Figure { id: "fig21", rows, checks, notes: ped_notes(&sw) }
}

pub fn fig22(threads: usize) -> Figure {
    let sw = ped_sweep(threads);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (i, &k) in PED_DRONES.iter().enumerate() {
        rows.push(row(k as f64, sw.served[i] as f64, "simulated"));
        rows.push(row(k as f64, PED_SERVED[i] as f64, "reference"));
        checks.push(Check::within(format!("served, {k} drones"), sw.served[i] as f64, PED_SERVED[i] as f64, PED_TOL));
    }
    let bounded = sw.served.iter().zip(&sw.checked).all(|(s, c)| s <= c);
    checks.push(Check::holds("served <= checked", bounded));
    Figure { id: "fig22", rows, checks, notes: ped_notes(&sw) }
}

pub fn fig26(seed: u64) -> Figure {
    let m = SignalTimeModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<f64> = (0..SIGNAL_DRAWS).map(|_| sample_signal_time(&m, &mut rng)).collect();
    let rows = draws.iter().enumerate().map(|(i, &y)| row(i as f64, y, "signal_time")).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = m.cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    let in_support = draws.iter().all(|&x| (0.0..10.0).contains(&x));
    let checks = vec![
        Check::band("mean seconds", mean, (SIGNAL_MEAN - SIGNAL_MEAN_TOL, SIGNAL_MEAN + SIGNAL_MEAN_TOL)),
        Check::band("KS statistic", ks, (0.0, 0.01)),
        Check::holds("samples in [0, 10)", in_support),
    ];
    let notes = vec![format!("{SIGNAL_DRAWS} draws from triangular({}, {}, {})", m.min, m.mode, m.max)];
    Figure { id: "fig26", rows, checks, notes }
}

fn run_bundled(name: &str) -> RunOutput {
    run(&bundled(name).expect("bundled scenario")).expect("bundled scenarios run")
}

fn mbps(out: &RunOutput) -> f64 {
    out.summary.mean_throughput / 1e6
}

/// Drones in use over time for the spray cases.
pub fn fig27(threads: usize) -> Figure {
    let names = ["case5", "case6"];
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool");
    let outs: Vec<RunOutput> = pool.install(|| names.par_iter().map(|n| run_bundled(n)).collect());
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (name, out) in names.iter().zip(&outs) {
        let interval = out.scenario.control.interval.max(1);
        for t in (0..out.scenario.duration).step_by(interval as usize) {
            rows.push(row(t as f64, drones_in_use(&out.ops.states, t) as f64, name));
        }
        for w in &out.utilization {
            rows.push(row(w.start as f64, w.mean_utilization, &format!("{name}_utilization")));
        }
        checks.push(Check::band(format!("{name} fewest drones in use"), out.summary.in_use_min as f64, IN_USE_BAND));
        checks.push(Check::band(format!("{name} most drones in use"), out.summary.in_use_max as f64, IN_USE_BAND));
        checks.push(Check::band(
            format!("{name} highest window utilization"),
            out.summary.max_window_utilization,
            UTILIZATION_BAND,
        ));
    }
    Figure { id: "fig27", rows, checks, notes: Vec::new() }
}

/// Link throughput per window for zigzag and parallel spraying.
pub fn fig28(threads: usize) -> Figure {
    let names = ["case6", "case6_parallel"];
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool");
    let outs: Vec<RunOutput> = pool.install(|| names.par_iter().map(|n| run_bundled(n)).collect());
    let mut rows = Vec::new();
    for (name, out) in names.iter().zip(&outs) {
        for w in &out.utilization {
            let samples: Vec<f64> = out
                .ops
                .records
                .iter()
                .filter(|r| (w.start..w.end).contains(&r.tick()))
                .filter_map(|r| match r {
                    OpsRecord::Link { sample, .. } => Some(throughput(sample)),
                    _ => None,
                })
                .collect();
            if !samples.is_empty() {
                let mean = samples.iter().sum::<f64>() / samples.len() as f64;
                rows.push(row(w.start as f64, mean / 1e6, name));
            }
        }
    }
    let checks = vec![
        Check::band("case6 mean throughput Mbps", mbps(&outs[0]), THROUGHPUT_BAND_MBPS),
        Check::band("case6_parallel mean throughput Mbps", mbps(&outs[1]), PARALLEL_THROUGHPUT_BAND_MBPS),
    ];
    Figure { id: "fig28", rows, checks, notes: Vec::new() }
}

/// `None` for an unknown figure id.
pub fn reproduce(id: &str, threads: usize, seed: u64) -> Option<Figure> {
    Some(match id {
        "fig17" => fig17(),
        "fig21" => fig21(threads),
        "fig22" => fig22(threads),
        "fig26" => fig26(seed),
        "fig27" => fig27(threads),
        "fig28" => fig28(threads),
        _ => return None,
    })
}

/// File names `write_figure` produces for `id`.
pub fn figure_files(id: &str) -> Vec<String> {
    vec![format!("{id}.csv"), format!("{id}_summary.txt")]
}

/// Writes the tidy CSV and the summary; returns the file names.
pub fn write_figure(fig: &Figure, dir: &Path) -> io::Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let files = figure_files(fig.id);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in &fig.rows {
        w.serialize(r).map_err(io::Error::other)?;
    }
    let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    fs::write(dir.join(&files[0]), bytes)?;
    let mut summary = String::new();
    for n in &fig.notes {
        summary.push_str(&format!("note: {n}\n"));
    }
    for c in &fig.checks {
        summary.push_str(&format!("{c}\n"));
    }
    summary.push_str(if fig.passed() { "overall: PASS\n" } else { "overall: FAIL\n" });
    fs::write(dir.join(&files[1]), summary)?;
    Ok(files)
}
