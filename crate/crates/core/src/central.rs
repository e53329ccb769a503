//! Centralized ADMM for the tree-design problem.
//!
//! Each iteration solves the convex `(u, w)` subproblem over Σ, projects
//! `w - μ` onto spanning trees and `u - η` onto `{0,1}`, then takes scaled
//! dual steps `μ += z - w`, `η += y - u`.

use std::time::Instant;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributed::ConsensusForm;
use crate::error::{Error, Result};
use crate::graph::TreeIndicator;
use crate::model::{
    build_centralized_subproblem, check_feasible, objective, route_on_tree, FlowAssignment,
    Instance, RouteOutcome,
};
use crate::projection::{project_binary, project_tree, Topology};
use crate::qp::{solve_qp_with, QpSettings, QpSolution, QpStatus, QuadraticProgram, WarmStart};
use crate::report::{CentralTraceRow, Extraction, Mode, RunStatus, SolveReport, Trace};

/// Starting point for `w`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialW {
    Ones,
    Custom(Vec<f64>),
    /// `U[0,1]^m` drawn from the config seed.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rho: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub qp: QpSettings,
    /// A QP stopped at its iteration cap is still used if its residuals are
    /// below this; otherwise the run aborts.
    pub qp_accept: f64,
    pub seed: u64,
    pub initial_w: InitialW,
    pub consensus: ConsensusForm,
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            tol: 1e-4,
            max_iters: 500,
            qp: QpSettings::default(),
            qp_accept: 1e-4,
            seed: 0,
            initial_w: InitialW::Ones,
            consensus: ConsensusForm::Undirected,
            parallel: true,
        }
    }
}

impl SolverConfig {
    pub fn with_rho(rho: f64) -> Self {
        Self {
            rho,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidInstance(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInstance(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.qp.tol > 0.0) || self.qp.max_iters == 0 {
            return Err(Error::InvalidInstance("QP tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_w(&self, m: usize) -> Result<Vec<f64>> {
        match &self.initial_w {
            InitialW::Ones => Ok(vec![1.0; m]),
            InitialW::Custom(w) if w.len() == m => Ok(w.clone()),
            InitialW::Custom(w) => Err(Error::LengthMismatch {
                expected: m,
                actual: w.len(),
            }),
            InitialW::Uniform => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok((0..m).map(|_| rng.gen::<f64>()).collect())
            }
        }
    }
}

/// Solves a subproblem, treating an iteration-capped result with small
/// residuals as usable and anything else as fatal.
pub(crate) fn solve_subproblem(
    p: &QuadraticProgram,
    cfg: &SolverConfig,
    warm: Option<&WarmStart>,
) -> Result<QpSolution> {
    let s = solve_qp_with(p, &cfg.qp, warm)?;
    match s.status {
        QpStatus::Solved => Ok(s),
        QpStatus::InfeasibleDetected => Err(Error::QpInfeasible(format!(
            "certificate found after {} iterations",
            s.iterations
        ))),
        QpStatus::MaxIters if s.max_residual() <= cfg.qp_accept => {
            warn!(
                "QP hit iteration cap with residual {:.2e}; using degraded solution",
                s.max_residual()
            );
            Ok(s)
        }
        QpStatus::MaxIters => Err(Error::QpFailed(format!(
            "residual {:.2e} after {} iterations",
            s.max_residual(),
            s.iterations
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralState {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub z: TreeIndicator,
    pub y: FlowAssignment,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub k: usize,
    pub last_residual: Option<f64>,
    pub qp_iters: usize,
    pub qp_status: Option<QpStatus>,
    pub warm: Option<WarmStart>,
}

pub fn init_state(inst: &Instance, cfg: &SolverConfig) -> Result<CentralState> {
    let layout = inst.layout();
    let w = cfg.initial_w(layout.edges)?;
    let mu = vec![0.0; layout.edges];
    let z = project_tree(&w, &mu, Topology::Undirected(inst.graph()))?;
    Ok(CentralState {
        w,
        u: vec![0.0; layout.flow_len()],
        z,
        y: FlowAssignment::for_instance(inst),
        mu,
        eta: vec![0.0; layout.flow_len()],
        k: 0,
        last_residual: None,
        qp_iters: 0,
        qp_status: None,
        warm: None,
    })
}

fn norm(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `‖(Δμ, Δη)‖ + ‖(Δu, Δw)‖` between consecutive states.
pub fn residual_central(prev: &CentralState, curr: &CentralState) -> f64 {
    let dual = norm(
        curr.mu
            .iter()
            .zip(&prev.mu)
            .chain(curr.eta.iter().zip(&prev.eta))
            .map(|(a, b)| (*a, *b)),
    );
    let primal = norm(
        curr.u
            .iter()
            .zip(&prev.u)
            .chain(curr.w.iter().zip(&prev.w))
            .map(|(a, b)| (*a, *b)),
    );
    dual + primal
}

/// One ADMM iteration.
pub fn step(state: &CentralState, inst: &Instance, cfg: &SolverConfig) -> Result<CentralState> {
    let layout = inst.layout();
    let p = build_centralized_subproblem(
        inst,
        &state.z.to_f64(),
        &state.y,
        &state.mu,
        &state.eta,
        cfg.rho,
    )?;
    let sol = solve_subproblem(&p, cfg, state.warm.as_ref())?;
    let (w, u) = layout.split(&sol.v);
    let (w, u) = (w.to_vec(), u.to_vec());

    let z = project_tree(&w, &state.mu, Topology::Undirected(inst.graph()))?;
    let shifted: Vec<f64> = u.iter().zip(&state.eta).map(|(u, e)| u - e).collect();
    let y = FlowAssignment::from_values(layout.arcs(), layout.commodities, project_binary(&shifted))?;

    let zf = z.to_f64();
    let mu: Vec<f64> = state
        .mu
        .iter()
        .zip(zf.iter().zip(&w))
        .map(|(m, (z, w))| m + (z - w))
        .collect();
    let eta: Vec<f64> = state
        .eta
        .iter()
        .zip(y.values().iter().zip(&u))
        .map(|(e, (y, u))| e + (y - u))
        .collect();

    let mut next = CentralState {
        w,
        u,
        z,
        y,
        mu,
        eta,
        k: state.k + 1,
        last_residual: None,
        qp_iters: sol.iterations,
        qp_status: Some(sol.status),
        warm: Some(sol.warm_start()),
    };
    next.last_residual = Some(residual_central(state, &next));
    Ok(next)
}

/// Final `(z, y)` selection shared by both drivers.
pub(crate) fn extract(
    inst: &Instance,
    z: &TreeIndicator,
    y: &FlowAssignment,
) -> Result<(FlowAssignment, bool, Extraction)> {
    if check_feasible(inst, z, y).is_feasible() {
        return Ok((y.clone(), true, Extraction::Direct));
    }
    Ok(match route_on_tree(inst, z)? {
        RouteOutcome::Routed(flows) => (flows, true, Extraction::Repaired),
        RouteOutcome::HopViolation { flows, commodities } => {
            warn!("no feasible extraction: commodities {commodities:?} exceed the hop bound");
            (flows, false, Extraction::NoFeasibleExtraction)
        }
    })
}

pub fn solve_central(inst: &Instance, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_central_observed(inst, cfg, |_| {})
}

/// [`solve_central`] with a hook that sees every state, starting at `k = 0`.
pub fn solve_central_observed<F: FnMut(&CentralState)>(
    inst: &Instance,
    cfg: &SolverConfig,
    mut observe: F,
) -> Result<SolveReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut state = init_state(inst, cfg)?;
    observe(&state);
    let mut rows = Vec::new();
    let mut status = RunStatus::NotRun;
    while state.k < cfg.max_iters {
        let next = step(&state, inst, cfg)?;
        observe(&next);
        let residual = next.last_residual.unwrap_or(f64::INFINITY);
        rows.push(CentralTraceRow {
            k: next.k,
            objective_w: objective(inst, &next.w),
            objective_z: objective(inst, &next.z.to_f64()),
            residual,
            qp_iters: next.qp_iters,
            qp_status: next.qp_status.map_or("", |s| s.as_str()).to_string(),
            feasible_now: check_feasible(inst, &next.z, &next.y).is_feasible(),
        });
        state = next;
        if residual < cfg.tol {
            status = RunStatus::Converged;
            break;
        }
        status = RunStatus::MaxIters;
    }
    debug!(
        "central run: {} after {} iterations, residual {:?}",
        status.as_str(),
        state.k,
        state.last_residual
    );
    let (y, feasible, extraction) = if status == RunStatus::NotRun {
        let ok = check_feasible(inst, &state.z, &state.y).is_feasible();
        (state.y.clone(), ok, Extraction::Direct)
    } else {
        extract(inst, &state.z, &state.y)?
    };
    Ok(SolveReport {
        mode: Mode::Central,
        objective: objective(inst, &state.z.to_f64()),
        z: state.z,
        y,
        feasible,
        status,
        extraction,
        iterations: state.k,
        final_residual: state.last_residual,
        consensus_gap: None,
        wall_ms: started.elapsed().as_millis() as u64,
        gap_pct: None,
        oracle_obj: None,
        trace_path: None,
        trace: Trace::Central(rows),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::UndirectedGraph;
    use crate::model::Commodity;

    fn single_edge() -> Instance {
        let g = UndirectedGraph::new(2, vec![(0, 1)]).unwrap();
        Instance::new(g, vec![1.0], vec![Commodity { origin: 0, dest: 1 }], 1).unwrap()
    }

    fn k3() -> Instance {
        let g = UndirectedGraph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        Instance::new(g, vec![1.0, 2.0, 3.0], vec![Commodity { origin: 0, dest: 2 }], 2).unwrap()
    }

    #[test]
    fn init_examples() {
        let inst = k3();
        let s = init_state(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(s.w, vec![1.0; 3]);
        assert_eq!(s.z.bits(), &[true, true, false]);
        assert!(s.mu.iter().chain(&s.eta).chain(s.y.values()).all(|&v| v == 0.0));

        let cfg = SolverConfig {
            initial_w: InitialW::Custom(vec![0.0, 1.0, 1.0]),
            ..SolverConfig::default()
        };
        let s = init_state(&inst, &cfg).unwrap();
        assert_eq!(s.z.bits(), &[false, true, true]);
    }

    #[test]
    fn residual_examples() {
        let inst = Instance::new(
            UndirectedGraph::new(3, vec![(0, 1), (1, 2)]).unwrap(),
            vec![1.0, 1.0],
            vec![Commodity { origin: 0, dest: 2 }],
            2,
        )
        .unwrap();
        let a = init_state(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(residual_central(&a, &a), 0.0);
        let mut b = a.clone();
        b.mu = vec![0.3, -0.4];
        assert!((residual_central(&a, &b) - 0.5).abs() < 1e-15);
        let mut c = a.clone();
        c.w = vec![1.3, 1.4];
        assert!((residual_central(&a, &c) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_edge_step_is_feasible() {
        let inst = single_edge();
        let cfg = SolverConfig::default();
        let s0 = init_state(&inst, &cfg).unwrap();
        let s1 = step(&s0, &inst, &cfg).unwrap();
        assert_eq!(s1.z.bits(), &[true]);
        assert_eq!(s1.y.values(), &[1.0, 0.0]);
        assert!(check_feasible(&inst, &s1.z, &s1.y).is_feasible());
        for (d, (z, w)) in s1.mu.iter().zip(s1.z.to_f64().iter().zip(&s1.w)) {
            assert_eq!(*d, z - w);
        }
    }

    #[test]
    fn single_edge_converges() {
        let inst = single_edge();
        let r = solve_central(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, RunStatus::Converged);
        assert!(r.iterations <= 2);
        assert_eq!(r.objective, 1.0);
        assert!(r.feasible);
    }

    #[test]
    fn stopping_rules() {
        let inst = k3();
        let cfg = SolverConfig {
            tol: f64::INFINITY,
            ..SolverConfig::default()
        };
        let r = solve_central(&inst, &cfg).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.z.popcount(), 2);

        let cfg = SolverConfig {
            max_iters: 0,
            ..SolverConfig::default()
        };
        let r = solve_central(&inst, &cfg).unwrap();
        assert_eq!(r.status, RunStatus::NotRun);
        assert_eq!(r.status.as_str(), "not run");
        assert_eq!(r.iterations, 0);
        assert!(r.trace.is_empty());
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SolverConfig::with_rho(0.0);
        assert!(solve_central(&k3(), &cfg).is_err());
    }
}
