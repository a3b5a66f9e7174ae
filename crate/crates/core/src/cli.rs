//! Command-line surface. Data goes to stdout, diagnostics to stderr, and
//! the exit code says what happened:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | invalid scenario or unknown figure |
//! | 2 | I/O failure |
//! | 3 | figure outside its acceptance tolerance |
//! | 4 | oracle mismatch |

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::reproduce::{figure_files, reproduce, write_figure, FIGURES};
use crate::sim::export::{planned_files, write_run, Format};
use crate::sim::scenario::bundled_text;
use crate::sim::{run, Scenario};
use crate::verify::verify_all;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

/// Environment variable capping the worker threads of sweeps and suites.
pub const THREADS_ENV: &str = "SWARMZONES_THREADS";

#[derive(Debug, Parser)]
#[command(name = "swarmzones", version, about = "Zone-partitioned drone fleet simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and export its event log, metrics, zone statistics
    /// and density matrix.
    Run {
        /// Scenario file, or the name of a bundled scenario (case2 .. case6,
        /// case6_parallel).
        #[arg(long)]
        scenario: String,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Export format for the event log and tables.
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Regenerate the data behind a reference figure and check it against
    /// its reference values.
    Reproduce {
        /// One of fig17, fig21, fig22, fig26, fig27, fig28.
        #[arg(long)]
        figure: String,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Seed for figures drawn from random samples.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run the oracle suites: zone ordinals, distances, violation
    /// detection and collision fuzzing.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

/// Worker threads: `SWARMZONES_THREADS` if set to a positive number, else
/// the machine's parallelism.
pub fn threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { scenario, seed, out, format } => {
            let format = match format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
            cmd_run(&scenario, seed, &out, format)
        }
        Command::Reproduce { figure, out, seed } => cmd_reproduce(&figure, &out, seed),
        Command::Verify { seed } => cmd_verify(seed),
    }
}

fn read_scenario(arg: &str) -> Result<String, std::io::Error> {
    match fs::read_to_string(arg) {
        Ok(t) => Ok(t),
        Err(e) => {
            let name = arg.trim_end_matches(".json");
            bundled_text(name).map(str::to_string).ok_or(e)
        }
    }
}

pub fn cmd_run(scenario: &str, seed: Option<u64>, out: &Path, format: Format) -> i32 {
    let text = match read_scenario(scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read scenario {scenario}: {e}");
            return EXIT_IO;
        }
    };
    let mut s = match Scenario::from_json(&text) {
        Ok(s) => s,
        Err(errs) => {
            for e in errs {
                eprintln!("error: {e}");
            }
            return EXIT_INVALID;
        }
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let output = match run(&s) {
        Ok(o) => o,
        Err(errs) => {
            for e in errs {
                eprintln!("error: {e}");
            }
            return EXIT_INVALID;
        }
    };
    let hash = Scenario::content_hash(&text);
    match write_run(&output, scenario, &hash, out, format) {
        Ok(manifest) => {
            debug_assert_eq!(manifest.files, planned_files(&output, format));
            println!("{}", serde_json::to_string(&output.summary).expect("summary serializes"));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: writing to {}: {e}", out.display());
            EXIT_IO
        }
    }
}

#[derive(Serialize)]
struct FigureManifest<'a> {
    figure: &'a str,
    seed: u64,
    files: Vec<String>,
}

pub fn cmd_reproduce(figure: &str, out: &Path, seed: u64) -> i32 {
    if !FIGURES.contains(&figure) {
        eprintln!("error: unknown figure {figure}; valid ids: {}", FIGURES.join(", "));
        return EXIT_INVALID;
    }
    let manifest = FigureManifest { figure, seed, files: figure_files(figure) };
    let written = fs::create_dir_all(out).and_then(|()| {
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(out.join("manifest.json"), text)
    });
    if let Err(e) = written {
        eprintln!("error: writing to {}: {e}", out.display());
        return EXIT_IO;
    }
    let fig = reproduce(figure, threads(), seed).expect("figure id checked above");
    if let Err(e) = write_figure(&fig, out) {
        eprintln!("error: writing to {}: {e}", out.display());
        return EXIT_IO;
    }
    for n in &fig.notes {
        println!("note: {n}");
    }
    for c in &fig.checks {
        println!("{c}");
    }
    if fig.passed() {
        EXIT_OK
    } else {
        eprintln!("error: {figure} is outside its acceptance tolerance");
        EXIT_TOLERANCE
    }
}

pub fn cmd_verify(seed: u64) -> i32 {
    let reports = verify_all(threads(), seed);
    for r in &reports {
        println!("{r}");
    }
    match reports.iter().find(|r| !r.passed()) {
        None => EXIT_OK,
        Some(r) => {
            eprintln!("error: {} suite found a counterexample", r.name);
            EXIT_ORACLE
        }
    }
}
