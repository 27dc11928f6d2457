//! CSV and JSON writers for evaluation tables, search history and the grid
//! oracle. Floats are written with Rust's shortest round-trip formatting so
//! the files reload to identical values.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluator::{BruteForce, EvalResult, Solution};
use crate::local_nlp::TraceRow;
use crate::pso::{EpochSummary, HistoryRow};

#[derive(Serialize)]
struct ServedRow {
    period: usize,
    transit_demand_per_h: f64,
    served_per_h: f64,
    rejected_per_h: f64,
}

#[derive(Serialize)]
struct PatternRow {
    pattern: usize,
    period: usize,
    freq_per_h: f64,
    peak_per_h: f64,
    r_transit: f64,
    r_sams: f64,
}

#[derive(Serialize)]
struct SamsRow {
    period: usize,
    fleet: f64,
    utilization: f64,
    wait_min: f64,
}

#[derive(Serialize)]
struct GridRow {
    index: usize,
    objective: f64,
    cost: f64,
    /// Flat solution vector, space separated.
    solution: String,
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-period served and rejected demand.
pub fn write_served(path: &Path, res: &EvalResult) -> Result<()> {
    let rejected = res.rejected_per_period();
    write_rows(
        path,
        (0..res.served_per_period.len()).map(|k| ServedRow {
            period: k,
            transit_demand_per_h: res.transit_demand_per_period[k],
            served_per_h: res.served_per_period[k],
            rejected_per_h: rejected[k],
        }),
    )
}

/// Per (pattern, period) frequency, peak load and rejections.
pub fn write_patterns(path: &Path, res: &EvalResult) -> Result<()> {
    let rows = res.solution.freq_per_h.iter().enumerate().flat_map(|(p, row)| {
        row.iter().enumerate().map(move |(k, &f)| PatternRow {
            pattern: p,
            period: k,
            freq_per_h: f,
            peak_per_h: res.flows[k].peak_per_h[p],
            r_transit: res.r_transit[p][k],
            r_sams: res.r_sams[p][k],
        })
    });
    write_rows(path, rows)
}

/// Per-period fleet, utilization and wait. Infinite utilization is written
/// as `inf`.
pub fn write_sams(path: &Path, res: &EvalResult) -> Result<()> {
    write_rows(
        path,
        (0..res.wait_min.len()).map(|k| SamsRow {
            period: k,
            fleet: res.solution.fleet[k],
            utilization: res.utilization[k],
            wait_min: res.wait_min[k],
        }),
    )
}

/// `served.csv`, `patterns.csv` and `sams.csv` in `dir`.
pub fn write_eval_tables(dir: &Path, res: &EvalResult) -> Result<()> {
    write_served(&dir.join("served.csv"), res)?;
    write_patterns(&dir.join("patterns.csv"), res)?;
    write_sams(&dir.join("sams.csv"), res)
}

pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn write_convergence(path: &Path, rows: &[EpochSummary]) -> Result<()> {
    write_rows(path, rows)
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn write_grid(path: &Path, oracle: &BruteForce) -> Result<()> {
    write_rows(
        path,
        oracle.grid.iter().enumerate().map(|(i, pt)| GridRow {
            index: i,
            objective: pt.objective,
            cost: pt.cost,
            solution: pt.solution.to_flat().iter().map(f64::to_string).collect::<Vec<_>>().join(" "),
        }),
    )
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Parse(e.to_string()))?;
    w.write_all(b"\n").and_then(|()| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_solution(path: &Path) -> Result<Solution> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
