//! Un-condensed distributed iteration with explicit edge variables.
//!
//! For each ordered neighbour pair `(i, j)` agent `i` owns averages `t^{ij}`
//! (flows) and `s^{ij}` (edges) with constraints `x^i = t^{ij}`,
//! `x^j = t^{ij}`. Their multipliers are `α^{ij}, β^{ij}` (flows) and
//! `γ^{ij}, δ^{ij}` (edges). Duals here are unscaled, including `μ` and `η`.
//!
//! Reference only: it exists so the condensed updates in
//! [`crate::distributed`] can be checked against it.

use crate::central::{solve_subproblem, SolverConfig};
use crate::distributed::AgentState;
use crate::error::{Error, Result};
use crate::graph::TreeIndicator;
use crate::model::{agent_cost_share, Instance, QuadTerms};
use crate::projection::{project_binary, project_tree, Topology};
use crate::qp::WarmStart;

#[derive(Debug, Clone, PartialEq)]
pub struct FullDualAgentState {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub z: TreeIndicator,
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    /// Neighbour ids, in graph order; the per-edge vectors below follow it.
    pub neighbors: Vec<usize>,
    pub t: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    pub k: usize,
    pub warm: Option<WarmStart>,
}

impl FullDualAgentState {
    fn slot(&self, j: usize) -> Option<usize> {
        self.neighbors.iter().position(|&x| x == j)
    }

    /// `Σ_j α^{ij} + β^{ji}` given every agent's state.
    pub fn nu_aggregate(&self, me: usize, all: &[FullDualAgentState]) -> Vec<f64> {
        self.aggregate(me, all, |s| &s.alpha, |s| &s.beta)
    }

    /// `Σ_j γ^{ij} + δ^{ji}` given every agent's state.
    pub fn xi_aggregate(&self, me: usize, all: &[FullDualAgentState]) -> Vec<f64> {
        self.aggregate(me, all, |s| &s.gamma, |s| &s.delta)
    }

    fn aggregate(
        &self,
        me: usize,
        all: &[FullDualAgentState],
        own: fn(&FullDualAgentState) -> &Vec<Vec<f64>>,
        other: fn(&FullDualAgentState) -> &Vec<Vec<f64>>,
    ) -> Vec<f64> {
        let len = own(self).first().map_or(0, Vec::len);
        let mut acc = vec![0.0; len];
        for (slot, &j) in self.neighbors.iter().enumerate() {
            let back = all[j].slot(me).expect("neighbour relation is symmetric");
            for (a, (x, y)) in acc.iter_mut().zip(own(self)[slot].iter().zip(&other(&all[j])[back])) {
                *a += x + y;
            }
        }
        acc
    }
}

/// Full-dual world matching [`crate::distributed::World::new`].
pub fn init_full_dual(inst: &Instance, cfg: &SolverConfig) -> Result<Vec<FullDualAgentState>> {
    let base = AgentState::initial(inst, cfg)?;
    Ok((0..inst.node_count())
        .map(|i| {
            let neighbors: Vec<usize> = inst.graph().neighbors(i).collect();
            let d = neighbors.len();
            FullDualAgentState {
                u: base.u.clone(),
                w: base.w.clone(),
                z: base.z.clone(),
                y: base.y.clone(),
                mu: base.mu.clone(),
                eta: base.eta.clone(),
                t: vec![base.u.clone(); d],
                s: vec![base.w.clone(); d],
                alpha: vec![vec![0.0; base.u.len()]; d],
                beta: vec![vec![0.0; base.u.len()]; d],
                gamma: vec![vec![0.0; base.w.len()]; d],
                delta: vec![vec![0.0; base.w.len()]; d],
                neighbors,
                k: 0,
                warm: None,
            }
        })
        .collect())
}

fn primal_step(
    inst: &Instance,
    i: usize,
    agents: &[FullDualAgentState],
    cfg: &SolverConfig,
) -> Result<FullDualAgentState> {
    let me = &agents[i];
    let rho = cfg.rho;
    let layout = inst.layout();
    let off = layout.edges;
    let mut terms = QuadTerms::new(layout.total());
    terms.add_linear(0, &agent_cost_share(inst, i), 1.0);
    // μᵀ(z - w) + ρ/2‖z - w‖², likewise for (η, y, u)
    terms.add_linear(0, &me.mu, -1.0);
    terms.add_proximal(0, &me.z.to_f64(), rho);
    terms.add_linear(off, &me.eta, -1.0);
    terms.add_proximal(off, &me.y, rho);
    for (slot, &j) in me.neighbors.iter().enumerate() {
        let other = &agents[j];
        let back = other.slot(i).ok_or(Error::MissingSnapshot { agent: i, neighbor: j })?;
        // edge (i,j): α^{ij}ᵀx^i + ρ/2‖x^i - t^{ij}‖²
        terms.add_linear(off, &me.alpha[slot], 1.0);
        terms.add_proximal(off, &me.t[slot], rho);
        terms.add_linear(0, &me.gamma[slot], 1.0);
        terms.add_proximal(0, &me.s[slot], rho);
        // edge (j,i): β^{ji}ᵀx^i + ρ/2‖x^i - t^{ji}‖²
        terms.add_linear(off, &other.beta[back], 1.0);
        terms.add_proximal(off, &other.t[back], rho);
        terms.add_linear(0, &other.delta[back], 1.0);
        terms.add_proximal(0, &other.s[back], rho);
    }
    let p = terms.into_program(inst);
    let sol = solve_subproblem(&p, cfg, me.warm.as_ref()).map_err(|e| Error::Agent {
        agent: i,
        source: Box::new(e),
    })?;
    let (w, u) = sol.v.split_at(off);
    let mu_scaled: Vec<f64> = me.mu.iter().map(|v| v / rho).collect();
    let z = project_tree(w, &mu_scaled, Topology::Undirected(inst.graph()))?;
    let shifted: Vec<f64> = u.iter().zip(&me.eta).map(|(u, e)| u - e / rho).collect();
    Ok(FullDualAgentState {
        u: u.to_vec(),
        w: w.to_vec(),
        z,
        y: project_binary(&shifted),
        k: me.k + 1,
        warm: Some(sol.warm_start()),
        ..me.clone()
    })
}

/// One round: all primal solves from round-`k` state, then closed-form
/// averages and the edge, tree and flow dual updates.
pub fn full_dual_step(
    inst: &Instance,
    agents: &[FullDualAgentState],
    cfg: &SolverConfig,
) -> Result<Vec<FullDualAgentState>> {
    let rho = cfg.rho;
    let half = rho / 2.0;
    let fresh: Vec<FullDualAgentState> = (0..agents.len())
        .map(|i| primal_step(inst, i, agents, cfg))
        .collect::<Result<_>>()?;
    let mut next = fresh.clone();
    for (i, st) in next.iter_mut().enumerate() {
        let me = &fresh[i];
        for (slot, &j) in me.neighbors.iter().enumerate() {
            let other = &fresh[j];
            for (k, (a, b)) in me.u.iter().zip(&other.u).enumerate() {
                st.t[slot][k] = (a + b) / 2.0;
                st.alpha[slot][k] += half * (a - b);
                st.beta[slot][k] += half * (b - a);
            }
            for (k, (a, b)) in me.w.iter().zip(&other.w).enumerate() {
                st.s[slot][k] = (a + b) / 2.0;
                st.gamma[slot][k] += half * (a - b);
                st.delta[slot][k] += half * (b - a);
            }
        }
        let zf = me.z.to_f64();
        for (mu, (z, w)) in st.mu.iter_mut().zip(zf.iter().zip(&me.w)) {
            *mu += rho * (z - w);
        }
        for (eta, (y, u)) in st.eta.iter_mut().zip(me.y.iter().zip(&me.u)) {
            *eta += rho * (y - u);
        }
    }
    Ok(next)
}
