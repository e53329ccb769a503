//! Synchronous multi-agent ADMM.
//!
//! Every node of the instance graph is an agent holding a full copy of
//! `(u, w)` and the replicated constraint set. Agents talk only to graph
//! neighbours. A round has two phases separated by a barrier:
//!
//! 1. each agent solves its subproblem from the round-`k` snapshots of its
//!    neighbours and projects to get `z^i`, `y^i`;
//! 2. each agent folds the fresh neighbour primals into `ν^i`, `ξ^i`, then
//!    updates `μ^i`, `η^i`.
//!
//! Phase 1 may run agents in parallel. Each agent writes only its own slot,
//! so results do not depend on scheduling.

use std::time::Instant;

use log::debug;
use rayon::prelude::*;

use crate::central::{extract, solve_subproblem, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::TreeIndicator;
use crate::model::{build_agent_subproblem, check_feasible, objective, FlowAssignment, Instance};
use crate::projection::{project_binary, project_tree, Topology};
use crate::qp::{QpStatus, WarmStart};
use crate::report::{DistTraceRow, Extraction, Mode, RunStatus, SolveReport, Trace};

/// Scaling of the neighbour-consensus terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConsensusForm {
    /// Coefficient `ρ` on the consensus quadratics, full dual increments.
    #[default]
    Undirected,
    /// Coefficient `ρ/2`, half dual increments.
    Directed,
}

impl ConsensusForm {
    pub fn consensus_coefficient(&self, rho: f64) -> f64 {
        match self {
            ConsensusForm::Undirected => rho,
            ConsensusForm::Directed => rho / 2.0,
        }
    }

    pub fn dual_increment(&self) -> f64 {
        match self {
            ConsensusForm::Undirected => 1.0,
            ConsensusForm::Directed => 0.5,
        }
    }
}

/// One agent's iterates. All duals are scaled by `1/ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub z: TreeIndicator,
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub nu: Vec<f64>,
    pub xi: Vec<f64>,
    pub k: usize,
    pub qp_iters: usize,
    pub qp_status: Option<QpStatus>,
    pub warm: Option<WarmStart>,
}

impl AgentState {
    pub fn initial(inst: &Instance, cfg: &SolverConfig) -> Result<Self> {
        let layout = inst.layout();
        let w = cfg.initial_w(layout.edges)?;
        let mu = vec![0.0; layout.edges];
        let z = project_tree(&w, &mu, Topology::Undirected(inst.graph()))?;
        Ok(Self {
            u: vec![0.0; layout.flow_len()],
            w,
            z,
            y: vec![0.0; layout.flow_len()],
            mu,
            eta: vec![0.0; layout.flow_len()],
            nu: vec![0.0; layout.flow_len()],
            xi: vec![0.0; layout.edges],
            k: 0,
            qp_iters: 0,
            qp_status: None,
            warm: None,
        })
    }

    pub fn flows(&self, inst: &Instance) -> Result<FlowAssignment> {
        let layout = inst.layout();
        FlowAssignment::from_values(layout.arcs(), layout.commodities, self.y.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub inst: Instance,
    pub agents: Vec<AgentState>,
    pub round: usize,
    pub cfg: SolverConfig,
}

impl World {
    /// Every agent starts from the same point.
    pub fn new(inst: Instance, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let a = AgentState::initial(&inst, &cfg)?;
        let agents = vec![a; inst.node_count()];
        Ok(Self {
            inst,
            agents,
            round: 0,
            cfg,
        })
    }
}

/// Phase 1 for agent `i`: subproblem solve and both projections. Duals are
/// carried over unchanged.
pub fn agent_step(
    inst: &Instance,
    i: usize,
    own: &AgentState,
    neighbors: &[(usize, &AgentState)],
    cfg: &SolverConfig,
) -> Result<AgentState> {
    let wrap = |e: Error| Error::Agent {
        agent: i,
        source: Box::new(e),
    };
    let layout = inst.layout();
    let p = build_agent_subproblem(inst, i, own, neighbors, cfg.rho, cfg.consensus).map_err(wrap)?;
    let sol = solve_subproblem(&p, cfg, own.warm.as_ref()).map_err(wrap)?;
    let (w, u) = layout.split(&sol.v);
    let z = project_tree(w, &own.mu, Topology::Undirected(inst.graph())).map_err(wrap)?;
    let shifted: Vec<f64> = u.iter().zip(&own.eta).map(|(u, e)| u - e).collect();
    Ok(AgentState {
        u: u.to_vec(),
        w: w.to_vec(),
        z,
        y: project_binary(&shifted),
        mu: own.mu.clone(),
        eta: own.eta.clone(),
        nu: own.nu.clone(),
        xi: own.xi.clone(),
        k: own.k + 1,
        qp_iters: sol.iterations,
        qp_status: Some(sol.status),
        warm: Some(sol.warm_start()),
    })
}

/// Phase 2 for agent `i`, given everyone's fresh phase-1 output.
pub fn agent_dual_step(
    inst: &Instance,
    i: usize,
    fresh: &[AgentState],
    form: ConsensusForm,
) -> AgentState {
    let me = &fresh[i];
    let mut next = me.clone();
    let scale = form.dual_increment();
    for j in inst.graph().neighbors(i) {
        let other = &fresh[j];
        for (nu, (a, b)) in next.nu.iter_mut().zip(me.u.iter().zip(&other.u)) {
            *nu += scale * (a - b);
        }
        for (xi, (a, b)) in next.xi.iter_mut().zip(me.w.iter().zip(&other.w)) {
            *xi += scale * (a - b);
        }
    }
    let zf = me.z.to_f64();
    for (mu, (z, w)) in next.mu.iter_mut().zip(zf.iter().zip(&me.w)) {
        *mu += z - w;
    }
    for (eta, (y, u)) in next.eta.iter_mut().zip(me.y.iter().zip(&me.u)) {
        *eta += y - u;
    }
    next
}

fn phase_one(world: &World, i: usize) -> Result<AgentState> {
    let snaps: Vec<(usize, &AgentState)> = world
        .inst
        .graph()
        .neighbors(i)
        .map(|j| (j, &world.agents[j]))
        .collect();
    agent_step(&world.inst, i, &world.agents[i], &snaps, &world.cfg)
}

/// One synchronous round.
pub fn sync_round(world: &World) -> Result<World> {
    let n = world.agents.len();
    let fresh: Vec<AgentState> = if world.cfg.parallel {
        (0..n)
            .into_par_iter()
            .map(|i| phase_one(world, i))
            .collect::<Result<_>>()?
    } else {
        (0..n).map(|i| phase_one(world, i)).collect::<Result<_>>()?
    };
    finish_round(world, fresh)
}

/// [`sync_round`] with phase 1 executed sequentially in `order`.
pub fn sync_round_in_order(world: &World, order: &[usize]) -> Result<World> {
    let n = world.agents.len();
    let mut slots: Vec<Option<AgentState>> = vec![None; n];
    for &i in order {
        slots[i] = Some(phase_one(world, i)?);
    }
    let fresh = slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.ok_or_else(|| Error::InvalidInstance(format!("agent {i} missing from execution order")))
        })
        .collect::<Result<Vec<_>>>()?;
    finish_round(world, fresh)
}

fn finish_round(world: &World, fresh: Vec<AgentState>) -> Result<World> {
    let agents = (0..fresh.len())
        .map(|i| agent_dual_step(&world.inst, i, &fresh, world.cfg.consensus))
        .collect();
    Ok(World {
        inst: world.inst.clone(),
        agents,
        round: world.round + 1,
        cfg: world.cfg.clone(),
    })
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

/// Agent `i`'s share of [`residual_distributed`], already divided by `n`.
pub fn residual_contribution(prev: &AgentState, curr: &AgentState, n: usize) -> f64 {
    let dual = (diff_norm(&curr.mu, &prev.mu)
        + diff_norm(&curr.eta, &prev.eta)
        + diff_norm(&curr.nu, &prev.nu)
        + diff_norm(&curr.xi, &prev.xi))
    .sqrt();
    let primal = (diff_norm(&curr.u, &prev.u) + diff_norm(&curr.w, &prev.w)).sqrt();
    (dual + primal) / n as f64
}

/// `(1/n) Σ_i ‖Δ(μ, η, ν, ξ)^i‖ + (1/n) Σ_i ‖Δ(u, w)^i‖`.
pub fn residual_distributed(prev: &World, curr: &World) -> f64 {
    let n = curr.agents.len();
    prev.agents
        .iter()
        .zip(&curr.agents)
        .map(|(p, c)| residual_contribution(p, c, n))
        .sum()
}

/// `max_{i,j} ‖w^i - w^j‖ + ‖u^i - u^j‖`.
pub fn consensus_gap(world: &World) -> f64 {
    consensus_gap_of(&world.agents)
}

pub fn consensus_gap_of(agents: &[AgentState]) -> f64 {
    let mut gap = 0.0f64;
    for (i, a) in agents.iter().enumerate() {
        for b in &agents[i + 1..] {
            gap = gap.max(diff_norm(&a.w, &b.w).sqrt() + diff_norm(&a.u, &b.u).sqrt());
        }
    }
    gap
}

pub fn solve_distributed(inst: &Instance, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_distributed_observed(inst, cfg, |_| {})
}

/// [`solve_distributed`] with a hook that sees the world after every round,
/// starting at round 0.
pub fn solve_distributed_observed<F: FnMut(&World)>(
    inst: &Instance,
    cfg: &SolverConfig,
    mut observe: F,
) -> Result<SolveReport> {
    let started = Instant::now();
    let mut world = World::new(inst.clone(), cfg.clone())?;
    observe(&world);
    let n = inst.node_count();
    let mut rows = Vec::new();
    let mut status = RunStatus::NotRun;
    let mut last_residual = None;
    while world.round < cfg.max_iters {
        let next = sync_round(&world)?;
        observe(&next);
        let gap = consensus_gap(&next);
        for (i, (p, c)) in world.agents.iter().zip(&next.agents).enumerate() {
            rows.push(DistTraceRow {
                k: next.round,
                agent: i.to_string(),
                objective_w: objective(inst, &c.w),
                residual_contrib: residual_contribution(p, c, n),
                consensus_gap: gap,
                qp_iters: c.qp_iters,
            });
        }
        let residual = residual_distributed(&world, &next);
        last_residual = Some(residual);
        world = next;
        if residual < cfg.tol {
            status = RunStatus::Converged;
            break;
        }
        status = RunStatus::MaxIters;
    }
    debug!(
        "distributed run: {} after {} rounds, residual {:?}",
        status.as_str(),
        world.round,
        last_residual
    );
    let reporter = &world.agents[0];
    let y0 = reporter.flows(inst)?;
    let (y, feasible, extraction) = if status == RunStatus::NotRun {
        let ok = check_feasible(inst, &reporter.z, &y0).is_feasible();
        (y0, ok, Extraction::Direct)
    } else {
        extract(inst, &reporter.z, &y0)?
    };
    Ok(SolveReport {
        mode: Mode::Distributed,
        objective: objective(inst, &reporter.z.to_f64()),
        z: reporter.z.clone(),
        y,
        feasible,
        status,
        extraction,
        iterations: world.round,
        final_residual: last_residual,
        consensus_gap: Some(consensus_gap(&world)),
        wall_ms: started.elapsed().as_millis() as u64,
        gap_pct: None,
        oracle_obj: None,
        trace_path: None,
        trace: Trace::Distributed(rows),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::UndirectedGraph;
    use crate::model::Commodity;

    fn k3() -> Instance {
        let g = UndirectedGraph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        Instance::new(g, vec![1.0, 2.0, 3.0], vec![Commodity { origin: 0, dest: 2 }], 2).unwrap()
    }

    #[test]
    fn dual_arithmetic() {
        let g = UndirectedGraph::new(2, vec![(0, 1)]).unwrap();
        let inst = Instance::new(g, vec![1.0], vec![Commodity { origin: 0, dest: 1 }], 1).unwrap();
        let cfg = SolverConfig::default();
        let base = AgentState::initial(&inst, &cfg).unwrap();
        let mut a = base.clone();
        a.w = vec![1.0];
        let mut b = base;
        b.w = vec![0.0];
        let next = agent_dual_step(&inst, 0, &[a, b], ConsensusForm::Undirected);
        assert_eq!(next.xi, vec![1.0]);
    }

    #[test]
    fn identical_agents_leave_consensus_duals() {
        let inst = k3();
        let cfg = SolverConfig::default();
        let a = AgentState::initial(&inst, &cfg).unwrap();
        let fresh = vec![a.clone(), a.clone(), a];
        for i in 0..3 {
            let next = agent_dual_step(&inst, i, &fresh, ConsensusForm::Undirected);
            assert!(next.nu.iter().chain(&next.xi).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn residual_examples() {
        let inst = k3();
        let w0 = World::new(inst, SolverConfig::default()).unwrap();
        assert_eq!(residual_distributed(&w0, &w0), 0.0);
        let mut w1 = w0.clone();
        w1.agents[1].mu = vec![0.0, 0.3, 0.4];
        assert!((residual_distributed(&w0, &w1) - 0.5 / 3.0).abs() < 1e-15);
        let mut w2 = w0.clone();
        for a in &mut w2.agents {
            a.w[0] += 0.6;
            a.w[2] += 0.8;
        }
        assert!((residual_distributed(&w0, &w2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_examples() {
        let inst = k3();
        let mut w = World::new(inst, SolverConfig::default()).unwrap();
        assert_eq!(consensus_gap(&w), 0.0);
        w.agents[2].w = vec![1.0, 1.3, 1.4];
        assert!((consensus_gap(&w) - 0.5).abs() < 1e-15);
        assert!(consensus_gap_of(&w.agents[..2]) <= consensus_gap(&w));
    }

    #[test]
    fn one_round_gives_trees() {
        let inst = k3();
        let cfg = SolverConfig {
            tol: f64::INFINITY,
            ..SolverConfig::default()
        };
        let r = solve_distributed(&inst, &cfg).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.z.popcount(), 2);
    }

    #[test]
    fn missing_snapshot_is_reported() {
        let inst = k3();
        let cfg = SolverConfig::default();
        let a = AgentState::initial(&inst, &cfg).unwrap();
        let err = agent_step(&inst, 1, &a, &[(0, &a)], &cfg).unwrap_err();
        match err {
            Error::Agent { agent: 1, source } => {
                assert!(matches!(*source, Error::MissingSnapshot { agent: 1, neighbor: 2 }))
            }
            other => panic!("{other:?}"),
        }
    }
}
