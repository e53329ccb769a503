//! Sweep harness: instances × ρ × solver mode, with optional exact baseline.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::central::{solve_central, SolverConfig};
use crate::distributed::solve_distributed;
use crate::error::{Error, Result};
use crate::model::{generate_instance, GenerateParams, Instance};
use crate::oracle::{exact_solve, EnumerationBudget, ExactOutcome};
use crate::report::{write_summary, Mode, SolveReport, SummaryRow};

/// `(heuristic / exact - 1) · 100`.
pub fn compute_gap(heuristic_obj: f64, exact_obj: f64) -> Result<f64> {
    if !(exact_obj > 0.0) {
        return Err(Error::NonPositiveObjective(exact_obj));
    }
    Ok((heuristic_obj / exact_obj - 1.0) * 100.0)
}

pub fn solve_mode(inst: &Instance, cfg: &SolverConfig, mode: Mode) -> Result<SolveReport> {
    match mode {
        Mode::Central => solve_central(inst, cfg),
        Mode::Distributed => solve_distributed(inst, cfg),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    pub rhos: Vec<f64>,
    pub modes: Vec<Mode>,
    pub p: f64,
    pub hop_slack: usize,
    pub commodities: Option<usize>,
    /// `rho` and `seed` are overwritten per cell.
    pub solver: SolverConfig,
    pub oracle: bool,
    pub budget: EnumerationBudget,
    pub out_dir: PathBuf,
    pub record_wall_time: bool,
    pub trace_per_agent: bool,
}

impl SweepSpec {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            ns: vec![6],
            seeds: vec![0],
            rhos: vec![0.1, 1.0, 10.0],
            modes: vec![Mode::Central, Mode::Distributed],
            p: 0.5,
            hop_slack: 2,
            commodities: None,
            solver: SolverConfig::default(),
            oracle: true,
            budget: EnumerationBudget::default(),
            out_dir: out_dir.into(),
            record_wall_time: true,
            trace_per_agent: false,
        }
    }

    pub fn generate_params(&self, n: usize, seed: u64) -> GenerateParams {
        GenerateParams {
            commodities: self.commodities,
            hop_slack: self.hop_slack,
            ..GenerateParams::new(n, self.p, seed)
        }
    }
}

pub fn trace_file_name(n: usize, seed: u64, rho: f64, mode: Mode) -> String {
    format!("n{n}_seed{seed}_rho{rho}_{mode}.csv")
}

enum Baseline {
    Off,
    Skipped,
    Exact(ExactOutcome),
    Failed(String),
}

struct Cell<'a> {
    n: usize,
    seed: u64,
    rho: f64,
    mode: Mode,
    instance: &'a std::result::Result<Instance, String>,
    baseline: &'a Baseline,
}

fn run_cell(spec: &SweepSpec, cell: &Cell<'_>) -> Result<SummaryRow> {
    let mut row = SummaryRow {
        n: cell.n,
        m: 0,
        seed: cell.seed,
        rho: cell.rho,
        mode: cell.mode,
        iters: 0,
        objective: None,
        feasible: false,
        gap_pct: None,
        oracle_obj: None,
        status: String::new(),
        wall_ms: 0,
        trace_path: String::new(),
    };
    let inst = match cell.instance {
        Ok(inst) => inst,
        Err(e) => {
            row.status = format!("error: {e}");
            return Ok(row);
        }
    };
    row.m = inst.edge_count();
    let cfg = SolverConfig {
        rho: cell.rho,
        seed: cell.seed,
        ..spec.solver.clone()
    };
    let report = match solve_mode(inst, &cfg, cell.mode) {
        Ok(r) => r,
        Err(e) => {
            row.status = format!("error: {e}");
            return Ok(row);
        }
    };
    let rel = Path::new("traces").join(trace_file_name(cell.n, cell.seed, cell.rho, cell.mode));
    let file = BufWriter::new(File::create(spec.out_dir.join(&rel))?);
    report.trace.write_csv(file, spec.trace_per_agent)?;
    row.trace_path = rel.to_string_lossy().into_owned();
    row.iters = report.iterations;
    row.objective = Some(report.objective);
    row.feasible = report.feasible;
    if spec.record_wall_time {
        row.wall_ms = report.wall_ms;
    }
    row.status = match cell.baseline {
        _ if !report.feasible => report.extraction.as_str().to_string(),
        Baseline::Off => "ok".into(),
        Baseline::Skipped => "oracle-skipped".into(),
        Baseline::Failed(e) => format!("oracle-error: {e}"),
        Baseline::Exact(ExactOutcome::Infeasible) => "oracle-infeasible".into(),
        Baseline::Exact(ExactOutcome::Optimal { objective, .. }) => {
            row.oracle_obj = Some(*objective);
            match compute_gap(report.objective, *objective) {
                Ok(g) if g < -1e-9 => {
                    row.gap_pct = Some(g);
                    "internal-error: negative gap".into()
                }
                Ok(g) => {
                    row.gap_pct = Some(g);
                    "ok".into()
                }
                Err(e) => format!("error: {e}"),
            }
        }
    };
    Ok(row)
}

/// Runs every cell, writes `summary.csv` and `traces/*.csv` under
/// `spec.out_dir`, and returns the rows sorted by `(n, seed, ρ, mode)`.
/// Per-cell failures land in the status column; only I/O errors abort.
pub fn run_experiment(spec: &SweepSpec) -> Result<Vec<SummaryRow>> {
    fs::create_dir_all(spec.out_dir.join("traces"))?;
    let mut keys: Vec<(usize, u64)> = Vec::new();
    for &n in &spec.ns {
        for &seed in &spec.seeds {
            keys.push((n, seed));
        }
    }
    let prepared: Vec<(std::result::Result<Instance, String>, Baseline)> = keys
        .par_iter()
        .map(|&(n, seed)| {
            let inst = generate_instance(&spec.generate_params(n, seed)).map_err(|e| e.to_string());
            let baseline = match (&inst, spec.oracle) {
                (_, false) | (Err(_), _) => Baseline::Off,
                (Ok(i), true) => match exact_solve(i, spec.budget) {
                    Ok(o) => Baseline::Exact(o),
                    Err(Error::BudgetExceeded(_)) => Baseline::Skipped,
                    Err(e) => Baseline::Failed(e.to_string()),
                },
            };
            (inst, baseline)
        })
        .collect();
    let mut cells = Vec::new();
    for ((n, seed), (instance, baseline)) in keys.iter().zip(&prepared) {
        for &rho in &spec.rhos {
            for &mode in &spec.modes {
                cells.push(Cell {
                    n: *n,
                    seed: *seed,
                    rho,
                    mode,
                    instance,
                    baseline,
                });
            }
        }
    }
    let mut rows = cells
        .par_iter()
        .map(|c| run_cell(spec, c))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        (a.n, a.seed)
            .cmp(&(b.n, b.seed))
            .then(a.rho.total_cmp(&b.rho))
            .then(a.mode.cmp(&b.mode))
    });
    let summary = BufWriter::new(File::create(spec.out_dir.join("summary.csv"))?);
    write_summary(summary, &rows)?;
    info!("sweep: {} rows written to {}", rows.len(), spec.out_dir.display());
    Ok(rows)
}
