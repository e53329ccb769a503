//! Hop-constrained multicommodity-flow spanning-tree design.
//!
//! Decision vector layout (fixed, so CSV dumps are stable): the `m` edge
//! variables `w` first, then the arc flows `u` commodity-major, arc-minor,
//! `2m` per commodity. Arc `a < m` is edge `a` as stored; arc `m + a` is its
//! reverse.
//!
//! The relaxed set Σ keeps flow conservation, edge coupling
//! `u_ij + u_ji ≤ w_ij`, the hop bound and the unit box. The tree-counting
//! and subtour rows are deliberately left out: the tree projection already
//! guarantees every iterate `z_k` is a spanning tree.

mod generate;
mod io;

use crate::distributed::{AgentState, ConsensusForm};
use crate::error::{Error, Result};
use crate::graph::{bidirect, tree_path_steps, DirectedArcSet, TreeIndicator, UndirectedGraph};
use crate::qp::{QuadraticProgram, SparseRows};

pub use generate::{generate_instance, relaxed_set_nonempty, GenerateParams};
pub use io::{parse_instance, write_instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commodity {
    pub origin: usize,
    pub dest: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    graph: UndirectedGraph,
    arcs: DirectedArcSet,
    costs: Vec<f64>,
    commodities: Vec<Commodity>,
    hop_bound: usize,
}

impl Instance {
    pub fn new(
        graph: UndirectedGraph,
        costs: Vec<f64>,
        commodities: Vec<Commodity>,
        hop_bound: usize,
    ) -> Result<Self> {
        let n = graph.node_count();
        if costs.len() != graph.edge_count() {
            return Err(Error::InvalidInstance(format!(
                "{} costs for {} edges",
                costs.len(),
                graph.edge_count()
            )));
        }
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidInstance("costs must be finite and nonnegative".into()));
        }
        if hop_bound < 1 {
            return Err(Error::InvalidInstance("hop bound must be at least 1".into()));
        }
        if !graph.is_connected() {
            return Err(Error::InvalidInstance("graph is not connected".into()));
        }
        for (f, c) in commodities.iter().enumerate() {
            if c.origin >= n || c.dest >= n {
                return Err(Error::InvalidInstance(format!("commodity {f} out of range")));
            }
            if c.origin == c.dest {
                return Err(Error::InvalidInstance(format!(
                    "commodity {f} has origin == destination ({})",
                    c.origin
                )));
            }
        }
        let arcs = bidirect(&graph);
        Ok(Self {
            graph,
            arcs,
            costs,
            commodities,
            hop_bound,
        })
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    pub fn arcs(&self) -> &DirectedArcSet {
        &self.arcs
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn commodities(&self) -> &[Commodity] {
        &self.commodities
    }

    pub fn hop_bound(&self) -> usize {
        self.hop_bound
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn layout(&self) -> Layout {
        Layout {
            edges: self.edge_count(),
            commodities: self.commodities.len(),
        }
    }

    pub fn with_hop_bound(&self, hop_bound: usize) -> Result<Self> {
        Self::new(
            self.graph.clone(),
            self.costs.clone(),
            self.commodities.clone(),
            hop_bound,
        )
    }
}

/// Index arithmetic for the stacked `(w, u)` vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub edges: usize,
    pub commodities: usize,
}

impl Layout {
    pub fn arcs(&self) -> usize {
        2 * self.edges
    }

    pub fn flow_len(&self) -> usize {
        self.arcs() * self.commodities
    }

    pub fn total(&self) -> usize {
        self.edges + self.flow_len()
    }

    /// Position of `u[f][arc]` in the flat flow vector.
    pub fn flow_index(&self, commodity: usize, arc: usize) -> usize {
        commodity * self.arcs() + arc
    }

    /// Inverse of [`Layout::flow_index`].
    pub fn flow_position(&self, index: usize) -> (usize, usize) {
        (index / self.arcs(), index % self.arcs())
    }

    /// Position of `u[f][arc]` in the stacked `(w, u)` vector.
    pub fn var_index(&self, commodity: usize, arc: usize) -> usize {
        self.edges + self.flow_index(commodity, arc)
    }

    pub fn split<'a>(&self, v: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        v.split_at(self.edges)
    }

    pub fn stack(&self, w: &[f64], u: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.total());
        v.extend_from_slice(w);
        v.extend_from_slice(u);
        v
    }
}

/// Per-commodity arc values, commodity-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    arcs: usize,
    commodities: usize,
    values: Vec<f64>,
}

impl FlowAssignment {
    pub fn zeros(arcs: usize, commodities: usize) -> Self {
        Self {
            arcs,
            commodities,
            values: vec![0.0; arcs * commodities],
        }
    }

    pub fn from_values(arcs: usize, commodities: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != arcs * commodities {
            return Err(Error::LengthMismatch {
                expected: arcs * commodities,
                actual: values.len(),
            });
        }
        Ok(Self {
            arcs,
            commodities,
            values,
        })
    }

    pub fn for_instance(inst: &Instance) -> Self {
        Self::zeros(inst.arcs().arc_count(), inst.commodities().len())
    }

    pub fn arcs(&self) -> usize {
        self.arcs
    }

    pub fn commodities(&self) -> usize {
        self.commodities
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, commodity: usize, arc: usize) -> f64 {
        self.values[commodity * self.arcs + arc]
    }

    pub fn set(&mut self, commodity: usize, arc: usize, value: f64) {
        self.values[commodity * self.arcs + arc] = value;
    }

    pub fn commodity(&self, f: usize) -> &[f64] {
        &self.values[f * self.arcs..(f + 1) * self.arcs]
    }
}

/// Accumulates `½ vᵀ diag v + linearᵀ v` term by term.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadTerms {
    pub diag: Vec<f64>,
    pub linear: Vec<f64>,
}

impl QuadTerms {
    pub fn new(len: usize) -> Self {
        Self {
            diag: vec![0.0; len],
            linear: vec![0.0; len],
        }
    }

    /// `(weight/2) ‖v[offset..] - center‖²` up to a constant.
    pub fn add_proximal(&mut self, offset: usize, center: &[f64], weight: f64) {
        for (k, &c) in center.iter().enumerate() {
            self.diag[offset + k] += weight;
            self.linear[offset + k] -= weight * c;
        }
    }

    /// `scale · coeffᵀ v[offset..]`.
    pub fn add_linear(&mut self, offset: usize, coeff: &[f64], scale: f64) {
        for (k, &c) in coeff.iter().enumerate() {
            self.linear[offset + k] += scale * c;
        }
    }

    pub fn into_program(self, inst: &Instance) -> QuadraticProgram {
        let rows = relaxed_constraints(inst);
        let n = self.diag.len();
        log::debug!(
            "subproblem: {n} vars, {} eq, {} coupling, {} hop rows",
            rows.eq.len(),
            rows.coupling_rows,
            rows.hop_rows
        );
        QuadraticProgram {
            diag: self.diag,
            linear: self.linear,
            eq: rows.eq,
            eq_rhs: rows.eq_rhs,
            ineq: rows.ineq,
            ineq_rhs: rows.ineq_rhs,
            lower: vec![0.0; n],
            upper: vec![1.0; n],
        }
    }
}

/// Linear rows of the relaxed set Σ over the stacked `(w, u)` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRows {
    pub eq: SparseRows,
    pub eq_rhs: Vec<f64>,
    pub ineq: SparseRows,
    pub ineq_rhs: Vec<f64>,
    pub coupling_rows: usize,
    pub hop_rows: usize,
}

/// Net outflow demanded at `node` by commodity `c`.
fn supply(c: &Commodity, node: usize) -> f64 {
    if node == c.origin {
        1.0
    } else if node == c.dest {
        -1.0
    } else {
        0.0
    }
}

pub fn relaxed_constraints(inst: &Instance) -> ConstraintRows {
    let layout = inst.layout();
    let m = inst.edge_count();
    let arcs = inst.arcs();
    let mut eq = SparseRows::new();
    let mut eq_rhs = Vec::new();
    let mut ineq = SparseRows::new();
    let mut ineq_rhs = Vec::new();
    for (f, c) in inst.commodities().iter().enumerate() {
        for node in 0..inst.node_count() {
            let mut row: Vec<(usize, f64)> = arcs
                .out_arcs(node)
                .iter()
                .map(|&a| (layout.var_index(f, a), 1.0))
                .chain(arcs.in_arcs(node).iter().map(|&a| (layout.var_index(f, a), -1.0)))
                .collect();
            row.sort_by_key(|&(col, _)| col);
            eq.push(row);
            eq_rhs.push(supply(c, node));
        }
    }
    for f in 0..inst.commodities().len() {
        for e in 0..m {
            ineq.push(vec![
                (e, -1.0),
                (layout.var_index(f, e), 1.0),
                (layout.var_index(f, m + e), 1.0),
            ]);
            ineq_rhs.push(0.0);
        }
    }
    let coupling_rows = ineq.len();
    for f in 0..inst.commodities().len() {
        ineq.push((0..2 * m).map(|a| (layout.var_index(f, a), 1.0)).collect());
        ineq_rhs.push(inst.hop_bound() as f64);
    }
    let hop_rows = ineq.len() - coupling_rows;
    ConstraintRows {
        eq,
        eq_rhs,
        ineq,
        ineq_rhs,
        coupling_rows,
        hop_rows,
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// Centralized `(u, w)` subproblem:
/// `cᵀw + (ρ/2)‖z_k - w + μ_k‖² + (ρ/2)‖y_k - u + η_k‖²` over Σ.
pub fn build_centralized_subproblem(
    inst: &Instance,
    z_k: &[f64],
    y_k: &FlowAssignment,
    mu_k: &[f64],
    eta_k: &[f64],
    rho: f64,
) -> Result<QuadraticProgram> {
    let layout = inst.layout();
    check_len(layout.edges, z_k.len())?;
    check_len(layout.edges, mu_k.len())?;
    check_len(layout.flow_len(), y_k.values().len())?;
    check_len(layout.flow_len(), eta_k.len())?;
    if !(rho > 0.0) {
        return Err(Error::InvalidInstance(format!("rho must be positive, got {rho}")));
    }
    let mut terms = QuadTerms::new(layout.total());
    terms.add_linear(0, inst.costs(), 1.0);
    let w_center: Vec<f64> = z_k.iter().zip(mu_k).map(|(z, m)| z + m).collect();
    terms.add_proximal(0, &w_center, rho);
    let u_center: Vec<f64> = y_k.values().iter().zip(eta_k).map(|(y, e)| y + e).collect();
    terms.add_proximal(layout.edges, &u_center, rho);
    Ok(terms.into_program(inst))
}

/// Half of each incident edge cost: the agent's share of `cᵀw`.
pub fn agent_cost_share(inst: &Instance, agent: usize) -> Vec<f64> {
    let mut share = vec![0.0; inst.edge_count()];
    for &e in inst.graph().incident_edges(agent) {
        share[e] = 0.5 * inst.costs()[e];
    }
    share
}

/// Agent `i`'s subproblem over its full copy `(u^i, w^i)`:
/// `f^i(w) + (ρ/2)‖z^i - w + μ^i‖² + (ρ/2)‖y^i - u + η^i‖²
///  + ρ(ν^i)ᵀu + ρ(ξ^i)ᵀw + c Σ_j ‖x - (x^i_k + x^j_k)/2‖²`
/// for `x ∈ {u, w}`, with `c = ρ` (undirected) or `ρ/2` (directed). The duals
/// are stored scaled by `1/ρ`, hence the `ρ` on the linear dual terms.
pub fn build_agent_subproblem(
    inst: &Instance,
    agent: usize,
    local: &AgentState,
    neighbor_snapshots: &[(usize, &AgentState)],
    rho: f64,
    form: ConsensusForm,
) -> Result<QuadraticProgram> {
    let layout = inst.layout();
    check_len(layout.edges, local.w.len())?;
    check_len(layout.flow_len(), local.u.len())?;
    if !(rho > 0.0) {
        return Err(Error::InvalidInstance(format!("rho must be positive, got {rho}")));
    }
    let mut terms = QuadTerms::new(layout.total());
    terms.add_linear(0, &agent_cost_share(inst, agent), 1.0);

    let z = local.z.to_f64();
    let w_center: Vec<f64> = z.iter().zip(&local.mu).map(|(z, m)| z + m).collect();
    terms.add_proximal(0, &w_center, rho);
    let u_center: Vec<f64> = local.y.iter().zip(&local.eta).map(|(y, e)| y + e).collect();
    terms.add_proximal(layout.edges, &u_center, rho);

    terms.add_linear(0, &local.xi, rho);
    terms.add_linear(layout.edges, &local.nu, rho);

    // c‖x - a‖² = (2c/2)‖x - a‖²
    let weight = 2.0 * form.consensus_coefficient(rho);
    for j in inst.graph().neighbors(agent) {
        let snap = neighbor_snapshots
            .iter()
            .find(|(id, _)| *id == j)
            .map(|(_, s)| *s)
            .ok_or(Error::MissingSnapshot { agent, neighbor: j })?;
        let w_avg: Vec<f64> = local.w.iter().zip(&snap.w).map(|(a, b)| (a + b) / 2.0).collect();
        let u_avg: Vec<f64> = local.u.iter().zip(&snap.u).map(|(a, b)| (a + b) / 2.0).collect();
        terms.add_proximal(0, &w_avg, weight);
        terms.add_proximal(layout.edges, &u_avg, weight);
    }
    Ok(terms.into_program(inst))
}

/// One reason a candidate `(z, y)` is infeasible.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Length { expected: usize, actual: usize },
    NotSpanningTree,
    NotBinary { index: usize, value: f64 },
    FlowConservation { commodity: usize, node: usize, net_outflow: f64, expected: f64 },
    Coupling { commodity: usize, edge: usize, load: f64, capacity: f64 },
    HopBound { commodity: usize, hops: f64, bound: usize },
}

/// Verdict of [`check_feasible`]: empty violation list means feasible.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn hop_only(&self) -> bool {
        !self.violations.is_empty()
            && self.violations.iter().all(|v| matches!(v, Violation::HopBound { .. }))
    }
}

const FEAS_EPS: f64 = 1e-9;

/// Checks every constraint of the binary model and reports all violations.
pub fn check_feasible(inst: &Instance, z: &TreeIndicator, y: &FlowAssignment) -> Feasibility {
    let mut violations = Vec::new();
    let m = inst.edge_count();
    let layout = inst.layout();
    if z.len() != m {
        violations.push(Violation::Length { expected: m, actual: z.len() });
        return Feasibility { violations };
    }
    if y.values().len() != layout.flow_len() {
        violations.push(Violation::Length {
            expected: layout.flow_len(),
            actual: y.values().len(),
        });
        return Feasibility { violations };
    }
    if !crate::graph::is_spanning_tree(inst.graph(), z).unwrap_or(false) {
        violations.push(Violation::NotSpanningTree);
    }
    for (index, &value) in y.values().iter().enumerate() {
        if value != 0.0 && value != 1.0 {
            violations.push(Violation::NotBinary { index, value });
        }
    }
    let arcs = inst.arcs();
    for (f, c) in inst.commodities().iter().enumerate() {
        for node in 0..inst.node_count() {
            let out: f64 = arcs.out_arcs(node).iter().map(|&a| y.get(f, a)).sum();
            let inn: f64 = arcs.in_arcs(node).iter().map(|&a| y.get(f, a)).sum();
            let expected = supply(c, node);
            if (out - inn - expected).abs() > FEAS_EPS {
                violations.push(Violation::FlowConservation {
                    commodity: f,
                    node,
                    net_outflow: out - inn,
                    expected,
                });
            }
        }
        for e in 0..m {
            let load = y.get(f, e) + y.get(f, m + e);
            let capacity = if z.get(e) { 1.0 } else { 0.0 };
            if load > capacity + FEAS_EPS {
                violations.push(Violation::Coupling { commodity: f, edge: e, load, capacity });
            }
        }
        let hops: f64 = y.commodity(f).iter().sum();
        if hops > inst.hop_bound() as f64 + FEAS_EPS {
            violations.push(Violation::HopBound {
                commodity: f,
                hops,
                bound: inst.hop_bound(),
            });
        }
    }
    Feasibility { violations }
}

/// `Σ c_e · values_e` for binary `z` or fractional `w`.
pub fn objective(inst: &Instance, values: &[f64]) -> f64 {
    inst.costs().iter().zip(values).map(|(c, v)| c * v).sum()
}

/// Forced routing on a fixed tree.
#[derive(Debug, Clone, PartialEq)]
pub enum RouteOutcome {
    Routed(FlowAssignment),
    /// Tree paths exist but these commodities exceed the hop bound.
    HopViolation {
        flows: FlowAssignment,
        commodities: Vec<usize>,
    },
}

impl RouteOutcome {
    pub fn flows(&self) -> &FlowAssignment {
        match self {
            RouteOutcome::Routed(f) => f,
            RouteOutcome::HopViolation { flows, .. } => flows,
        }
    }

    pub fn is_routed(&self) -> bool {
        matches!(self, RouteOutcome::Routed(_))
    }
}

/// Hop counts of every commodity's unique tree path.
pub fn tree_hops(inst: &Instance, z: &TreeIndicator) -> Result<Vec<usize>> {
    inst.commodities()
        .iter()
        .map(|c| Ok(tree_path_steps(inst.graph(), z, c.origin, c.dest)?.len()))
        .collect()
}

/// Sends every commodity along its unique tree path.
pub fn route_on_tree(inst: &Instance, z: &TreeIndicator) -> Result<RouteOutcome> {
    let m = inst.edge_count();
    let mut flows = FlowAssignment::for_instance(inst);
    let mut over = Vec::new();
    for (f, c) in inst.commodities().iter().enumerate() {
        let steps = tree_path_steps(inst.graph(), z, c.origin, c.dest)?;
        if steps.len() > inst.hop_bound() {
            over.push(f);
        }
        for st in steps {
            let (u, _) = inst.graph().edge(st.edge);
            let arc = if st.from == u { st.edge } else { m + st.edge };
            flows.set(f, arc, 1.0);
        }
    }
    Ok(if over.is_empty() {
        RouteOutcome::Routed(flows)
    } else {
        RouteOutcome::HopViolation {
            flows,
            commodities: over,
        }
    })
}
