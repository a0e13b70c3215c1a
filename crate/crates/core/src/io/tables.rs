//! Trajectory and event tables, run summaries and manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::file::CoefficientDerivation;
use crate::dynamics::{Run, Termination, TrajectoryPoint};
use crate::error::{Error, Result};
use crate::events::{EventKind, EventRecord};
use crate::reservoir::{validity_check, ValidityReport};
use crate::scenario::{OutputFormat, Scenario};
use crate::solver::SolverStats;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `t, T_1..T_n, J_1..J_n, E_total`.
pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|j| format!("T_{j}")));
    h.extend((1..=n).map(|j| format!("J_{j}")));
    h.push("E_total".into());
    h
}

/// Full round-trip precision (17 significant digits).
fn exact(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rounds to `digits` significant digits for human-facing summaries.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

fn csv_writer<W: Write>(w: W, format: OutputFormat) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .delimiter(format.delimiter() as u8)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

pub fn write_trajectory_table<W: Write>(
    w: W,
    points: &[TrajectoryPoint],
    n: usize,
    format: OutputFormat,
) -> csv::Result<()> {
    let mut out = csv_writer(w, format);
    out.write_record(trajectory_header(n))?;
    for p in points {
        let mut row = Vec::with_capacity(2 * n + 2);
        row.push(exact(p.t));
        row.extend(p.temps.iter().map(|&v| exact(v)));
        row.extend(p.flows.iter().map(|&v| exact(v)));
        row.push(exact(p.e_total));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// One event per line: `kind,time,reservoirs,detail`, reservoirs 1-based
/// and space-separated.
pub fn write_events_table<W: Write>(w: W, events: &[EventRecord], format: OutputFormat) -> csv::Result<()> {
    let mut out = csv_writer(w, format);
    out.write_record(["kind", "time", "reservoirs", "detail"])?;
    for e in events {
        out.write_record([
            e.kind.as_str().to_string(),
            exact(e.time),
            one_based(&e.reservoirs),
            e.detail.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn one_based(indices: &[usize]) -> String {
    indices
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Everything needed to reproduce a result set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub scenario: Scenario,
    pub derived_coefficients: Vec<CoefficientDerivation>,
    pub solver: SolverStats,
    pub wall_time_seconds: f64,
}

impl RunManifest {
    pub fn new(
        scenario: &Scenario,
        derived: &[CoefficientDerivation],
        solver: SolverStats,
        wall_time_seconds: f64,
    ) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            scenario: scenario.clone(),
            derived_coefficients: derived.to_vec(),
            solver,
            wall_time_seconds,
        }
    }
}

/// An event as written to the summary, with 1-based reservoir indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEvent {
    pub kind: EventKind,
    pub time: f64,
    pub reservoirs: Vec<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundedValues {
    pub final_time: f64,
    pub final_temperatures: Vec<f64>,
    pub equilibrium_temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub termination: Termination,
    pub final_time: f64,
    pub final_temperatures: Vec<f64>,
    pub equilibrium_temperature: f64,
    pub spread_tol: f64,
    pub event_counts: BTreeMap<EventKind, usize>,
    pub events: Vec<SummaryEvent>,
    /// The same numbers to 6 significant digits.
    pub rounded: RoundedValues,
    pub validity: ValidityReport,
    pub manifest: RunManifest,
}

impl Summary {
    pub fn new(run: &Run, manifest: RunManifest) -> Self {
        let last = run.final_point();
        let mut event_counts: BTreeMap<EventKind, usize> = [
            EventKind::Extremum,
            EventKind::RankChange,
            EventKind::PairEqualized,
            EventKind::GlobalEqualized,
        ]
        .into_iter()
        .map(|k| (k, 0))
        .collect();
        for e in &run.events {
            *event_counts.entry(e.kind).or_default() += 1;
        }
        Self {
            termination: run.termination,
            final_time: last.t,
            final_temperatures: last.temps.clone(),
            equilibrium_temperature: run.equilibrium,
            spread_tol: run.spread_tol,
            event_counts,
            events: run
                .events
                .iter()
                .map(|e| SummaryEvent {
                    kind: e.kind,
                    time: e.time,
                    reservoirs: e.reservoirs.iter().map(|i| i + 1).collect(),
                    detail: e.detail.clone(),
                })
                .collect(),
            rounded: RoundedValues {
                final_time: round_sig(last.t, 6),
                final_temperatures: last.temps.iter().map(|&t| round_sig(t, 6)).collect(),
                equilibrium_temperature: round_sig(run.equilibrium, 6),
            },
            validity: validity_check(&manifest.scenario),
            manifest,
        }
    }
}

/// Paths of the files written for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub trajectory: PathBuf,
    pub events: PathBuf,
    pub summary: PathBuf,
}

/// Writes `trajectory.<ext>`, `events.<ext>` and `summary.json` into `dir`,
/// creating it if needed.
pub fn write_run(dir: &Path, run: &Run, manifest: RunManifest) -> Result<RunFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let format = manifest.scenario.output.format;
    let n = manifest.scenario.len();
    let files = RunFiles {
        trajectory: dir.join(format!("trajectory.{}", format.extension())),
        events: dir.join(format!("events.{}", format.extension())),
        summary: dir.join("summary.json"),
    };

    let mut buf = Vec::new();
    write_trajectory_table(&mut buf, &run.trajectory, n, format).map_err(|e| csv_err(&files.trajectory, e))?;
    fs::write(&files.trajectory, buf).map_err(|e| Error::io(&files.trajectory, e))?;

    let mut buf = Vec::new();
    write_events_table(&mut buf, &run.events, format).map_err(|e| csv_err(&files.events, e))?;
    fs::write(&files.events, buf).map_err(|e| Error::io(&files.events, e))?;

    write_json(&files.summary, &Summary::new(run, manifest))?;
    Ok(files)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("summary types serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
