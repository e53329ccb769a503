//! Run reports and their CSV schemas.

use std::io::{Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::TreeIndicator;
use crate::model::FlowAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Central,
    Distributed,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Central => "central",
            Mode::Distributed => "distributed",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the iteration loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIters,
    NotRun,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max-iters",
            RunStatus::NotRun => "not run",
        }
    }
}

/// Where the reported flows came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extraction {
    /// Final `(z, y)` iterate was feasible as is.
    Direct,
    /// `y` was rebuilt by routing on the final tree.
    Repaired,
    /// Even tree routing breaks the hop bound.
    NoFeasibleExtraction,
}

impl Extraction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Extraction::Direct => "direct",
            Extraction::Repaired => "repaired",
            Extraction::NoFeasibleExtraction => "no-feasible-extraction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralTraceRow {
    pub k: usize,
    pub objective_w: f64,
    pub objective_z: f64,
    pub residual: f64,
    pub qp_iters: usize,
    pub qp_status: String,
    pub feasible_now: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistTraceRow {
    pub k: usize,
    /// Agent id, or `all` for aggregated rows.
    pub agent: String,
    pub objective_w: f64,
    pub residual_contrib: f64,
    pub consensus_gap: f64,
    pub qp_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trace {
    Central(Vec<CentralTraceRow>),
    /// Always per agent; [`aggregate_rows`] folds them for compact output.
    Distributed(Vec<DistTraceRow>),
}

impl Trace {
    pub fn len(&self) -> usize {
        match self {
            Trace::Central(r) => r.len(),
            Trace::Distributed(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_csv<W: Write>(&self, out: W, per_agent: bool) -> Result<()> {
        match self {
            Trace::Central(rows) => write_rows(out, rows),
            Trace::Distributed(rows) if per_agent => write_rows(out, rows),
            Trace::Distributed(rows) => write_rows(out, &aggregate_rows(rows)),
        }
    }
}

/// One `all` row per round: mean objective, summed residual contributions
/// and QP iterations, and the round's consensus gap.
pub fn aggregate_rows(rows: &[DistTraceRow]) -> Vec<DistTraceRow> {
    let mut out: Vec<DistTraceRow> = Vec::new();
    let mut count = 0usize;
    for r in rows {
        match out.last_mut() {
            Some(last) if last.k == r.k => {
                last.objective_w += r.objective_w;
                last.residual_contrib += r.residual_contrib;
                last.qp_iters += r.qp_iters;
                count += 1;
            }
            _ => {
                if let Some(last) = out.last_mut() {
                    last.objective_w /= count as f64;
                }
                out.push(DistTraceRow {
                    agent: "all".into(),
                    ..r.clone()
                });
                count = 1;
            }
        }
    }
    if let Some(last) = out.last_mut() {
        last.objective_w /= count as f64;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub mode: Mode,
    pub z: TreeIndicator,
    pub y: FlowAssignment,
    pub objective: f64,
    pub feasible: bool,
    pub status: RunStatus,
    pub extraction: Extraction,
    pub iterations: usize,
    pub final_residual: Option<f64>,
    /// Distributed runs only.
    pub consensus_gap: Option<f64>,
    pub wall_ms: u64,
    pub gap_pct: Option<f64>,
    pub oracle_obj: Option<f64>,
    pub trace_path: Option<PathBuf>,
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub rho: f64,
    pub mode: Mode,
    pub iters: usize,
    pub objective: Option<f64>,
    pub feasible: bool,
    pub gap_pct: Option<f64>,
    pub oracle_obj: Option<f64>,
    pub status: String,
    pub wall_ms: u64,
    pub trace_path: String,
}

pub fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Header-only output for an empty table, since serde-driven headers need a row.
pub fn write_summary<W: Write>(mut out: W, rows: &[SummaryRow]) -> Result<()> {
    if rows.is_empty() {
        writeln!(
            out,
            "n,m,seed,rho,mode,iters,objective,feasible,gap_pct,oracle_obj,status,wall_ms,trace_path"
        )?;
        return Ok(());
    }
    write_rows(out, rows)
}

pub fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}
