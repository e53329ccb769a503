//! Exhaustive exact solvers for small instances.
//!
//! Enumeration is guarded by an [`EnumerationBudget`] that is checked before
//! any work starts: the edge count against `max_edges`, and the exact tree
//! count (matrix-tree theorem) against `max_trees`. Exceeding either is an
//! error, never a silent truncation.

use std::collections::VecDeque;

use crate::dsu::{DisjointSet, RollbackDisjointSet};
use crate::error::{Error, Result};
use crate::graph::{DirectedArcSet, TreeIndicator, UndirectedGraph};
use crate::model::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_edges: usize,
    pub max_trees: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self {
            max_edges: 24,
            max_trees: 10_000_000,
        }
    }
}

impl EnumerationBudget {
    pub fn with_max_edges(max_edges: usize) -> Self {
        Self {
            max_edges,
            ..Self::default()
        }
    }

    fn check_edges(&self, m: usize) -> Result<()> {
        if self.max_edges == 0 || self.max_trees == 0 {
            return Err(Error::BudgetExceeded("budget caps must be positive".into()));
        }
        if m > self.max_edges {
            return Err(Error::BudgetExceeded(format!(
                "{m} edges exceeds cap {}",
                self.max_edges
            )));
        }
        Ok(())
    }

    fn check_count(&self, count: u128) -> Result<()> {
        if count > self.max_trees as u128 {
            return Err(Error::BudgetExceeded(format!(
                "{count} trees exceeds cap {}",
                self.max_trees
            )));
        }
        Ok(())
    }
}

/// Determinant of an integer matrix by fraction-free (Bareiss) elimination.
fn bareiss_det(mut a: Vec<Vec<i128>>) -> Option<i128> {
    let n = a.len();
    if n == 0 {
        return Some(1);
    }
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            // no pivot: the matrix is singular
            let Some(swap) = (k + 1..n).find(|&r| a[r][k] != 0) else {
                return Some(0);
            };
            a.swap(k, swap);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = a[i][j].checked_mul(a[k][k])?.checked_sub(a[i][k].checked_mul(a[k][j])?)?;
                a[i][j] = num / prev;
            }
        }
        prev = a[k][k];
    }
    Some(sign * a[n - 1][n - 1])
}

/// Number of spanning trees by the matrix-tree theorem.
pub fn kirchhoff_count(g: &UndirectedGraph) -> Result<u128> {
    let n = g.node_count();
    let mut lap = vec![vec![0i128; n]; n];
    for &(u, v) in g.edges() {
        lap[u][u] += 1;
        lap[v][v] += 1;
        lap[u][v] -= 1;
        lap[v][u] -= 1;
    }
    let minor: Vec<Vec<i128>> = lap[1..].iter().map(|row| row[1..].to_vec()).collect();
    let det = bareiss_det(minor)
        .ok_or_else(|| Error::BudgetExceeded("tree count overflowed".into()))?;
    Ok(det.max(0) as u128)
}

/// Number of spanning arborescences rooted at `root` (directed matrix-tree).
pub fn arborescence_count(a: &DirectedArcSet, root: usize) -> Result<u128> {
    let n = a.node_count();
    let mut lap = vec![vec![0i128; n]; n];
    for &(u, v) in a.arcs() {
        lap[v][v] += 1;
        lap[u][v] -= 1;
    }
    let keep: Vec<usize> = (0..n).filter(|&x| x != root).collect();
    let minor: Vec<Vec<i128>> = keep
        .iter()
        .map(|&r| keep.iter().map(|&c| lap[r][c]).collect())
        .collect();
    let det = bareiss_det(minor)
        .ok_or_else(|| Error::BudgetExceeded("arborescence count overflowed".into()))?;
    Ok(det.max(0) as u128)
}

/// Calls `visit` with the sorted edge list of every spanning tree of `g`.
/// Backtracks over edges in index order; an edge may be skipped only if the
/// chosen edges plus all later edges still connect the graph, so every branch
/// ends in a tree.
pub fn for_each_spanning_tree<F: FnMut(&[usize])>(
    g: &UndirectedGraph,
    budget: EnumerationBudget,
    mut visit: F,
) -> Result<u64> {
    budget.check_edges(g.edge_count())?;
    let count = kirchhoff_count(g)?;
    budget.check_count(count)?;
    if count == 0 {
        return Ok(0);
    }
    let mut dsu = RollbackDisjointSet::new(g.node_count());
    let mut chosen = Vec::with_capacity(g.node_count() - 1);
    let mut seen = 0u64;
    backtrack(g, 0, &mut dsu, &mut chosen, &mut |t| {
        seen += 1;
        visit(t)
    });
    debug_assert_eq!(seen as u128, count);
    Ok(seen)
}

fn connectable(g: &UndirectedGraph, chosen: &[usize], from: usize) -> bool {
    let mut d = DisjointSet::new(g.node_count());
    for k in chosen.iter().copied().chain(from..g.edge_count()) {
        let (u, v) = g.edge(k);
        d.union(u, v);
    }
    d.components() == 1
}

fn backtrack(
    g: &UndirectedGraph,
    k: usize,
    dsu: &mut RollbackDisjointSet,
    chosen: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if chosen.len() == g.node_count() - 1 {
        visit(chosen);
        return;
    }
    if k == g.edge_count() {
        return;
    }
    let (u, v) = g.edge(k);
    if dsu.union(u, v) {
        chosen.push(k);
        backtrack(g, k + 1, dsu, chosen, visit);
        chosen.pop();
    }
    dsu.rollback();
    if connectable(g, chosen, k + 1) {
        backtrack(g, k + 1, dsu, chosen, visit);
    }
}

pub fn enumerate_spanning_trees(
    g: &UndirectedGraph,
    budget: EnumerationBudget,
) -> Result<Vec<TreeIndicator>> {
    let mut out = Vec::new();
    for_each_spanning_tree(g, budget, |t| {
        out.push(TreeIndicator::from_indices(g.edge_count(), t));
    })?;
    Ok(out)
}

/// Every spanning arborescence of `a` rooted at `root`, as arc indicators.
/// Each non-root node picks one in-arc; partial choices that close a cycle
/// are pruned.
pub fn enumerate_arborescences(
    a: &DirectedArcSet,
    root: usize,
    budget: EnumerationBudget,
) -> Result<Vec<TreeIndicator>> {
    let n = a.node_count();
    if root >= n {
        return Err(Error::InvalidGraph(format!("root {root} out of range")));
    }
    budget.check_edges(a.arc_count())?;
    budget.check_count(arborescence_count(a, root)?)?;
    let order: Vec<usize> = (0..n).filter(|&x| x != root).collect();
    let mut parent_arc: Vec<Option<usize>> = vec![None; n];
    let mut out = Vec::new();
    arb_backtrack(a, root, &order, 0, &mut parent_arc, &mut out);
    Ok(out)
}

fn closes_cycle(a: &DirectedArcSet, root: usize, parent_arc: &[Option<usize>], start: usize) -> bool {
    let mut cur = start;
    for _ in 0..parent_arc.len() {
        if cur == root {
            return false;
        }
        match parent_arc[cur] {
            None => return false,
            Some(arc) => {
                cur = a.arc(arc).0;
                if cur == start {
                    return true;
                }
            }
        }
    }
    true
}

fn arb_backtrack(
    a: &DirectedArcSet,
    root: usize,
    order: &[usize],
    pos: usize,
    parent_arc: &mut Vec<Option<usize>>,
    out: &mut Vec<TreeIndicator>,
) {
    if pos == order.len() {
        let picked: Vec<usize> = parent_arc.iter().flatten().copied().collect();
        out.push(TreeIndicator::from_indices(a.arc_count(), &picked));
        return;
    }
    let node = order[pos];
    for &arc in a.in_arcs(node) {
        parent_arc[node] = Some(arc);
        if !closes_cycle(a, root, parent_arc, node) {
            arb_backtrack(a, root, order, pos + 1, parent_arc, out);
        }
    }
    parent_arc[node] = None;
}

/// Outcome of [`exact_solve`].
#[derive(Debug, Clone, PartialEq)]
pub enum ExactOutcome {
    Optimal { z: TreeIndicator, objective: f64 },
    Infeasible,
}

impl ExactOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            ExactOutcome::Optimal { objective, .. } => Some(*objective),
            ExactOutcome::Infeasible => None,
        }
    }
}

/// Hop counts from `source` inside the tree given by `edges`.
fn tree_hops_from(g: &UndirectedGraph, adj: &[Vec<usize>], source: usize) -> Vec<usize> {
    let n = g.node_count();
    let mut dist = vec![usize::MAX; n];
    dist[source] = 0;
    let mut q = VecDeque::from([source]);
    while let Some(x) = q.pop_front() {
        for &y in &adj[x] {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                q.push_back(y);
            }
        }
    }
    dist
}

/// Minimum-cost spanning tree whose forced routing meets the hop bound.
/// Ties keep the first tree in enumeration order.
pub fn exact_solve(inst: &Instance, budget: EnumerationBudget) -> Result<ExactOutcome> {
    let g = inst.graph();
    let n = g.node_count();
    let d = inst.hop_bound();
    let mut origins: Vec<usize> = inst.commodities().iter().map(|c| c.origin).collect();
    origins.sort_unstable();
    origins.dedup();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for_each_spanning_tree(g, budget, |tree| {
        let cost: f64 = tree.iter().map(|&k| inst.costs()[k]).sum();
        if best.as_ref().is_some_and(|(b, _)| cost >= *b) {
            return;
        }
        adj.iter_mut().for_each(Vec::clear);
        for &k in tree {
            let (u, v) = g.edge(k);
            adj[u].push(v);
            adj[v].push(u);
        }
        for &o in &origins {
            let dist = tree_hops_from(g, &adj, o);
            let ok = inst
                .commodities()
                .iter()
                .filter(|c| c.origin == o)
                .all(|c| dist[c.dest] <= d);
            if !ok {
                return;
            }
        }
        best = Some((cost, tree.to_vec()));
    })?;
    Ok(match best {
        Some((objective, tree)) => ExactOutcome::Optimal {
            z: TreeIndicator::from_indices(g.edge_count(), &tree),
            objective,
        },
        None => ExactOutcome::Infeasible,
    })
}

/// Brute-force `argmin ‖z - w + μ‖²` over spanning trees; returns the
/// minimizer (first in enumeration order) and the minimum value.
pub fn exact_project(
    w: &[f64],
    mu: &[f64],
    g: &UndirectedGraph,
    budget: EnumerationBudget,
) -> Result<(TreeIndicator, f64)> {
    let m = g.edge_count();
    for len in [w.len(), mu.len()] {
        if len != m {
            return Err(Error::LengthMismatch { expected: m, actual: len });
        }
    }
    let base: Vec<f64> = w.iter().zip(mu).map(|(w, m)| m - w).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut mask = vec![false; m];
    for_each_spanning_tree(g, budget, |tree| {
        for &k in tree {
            mask[k] = true;
        }
        let dist: f64 = (0..m)
            .map(|k| {
                let r = if mask[k] { 1.0 } else { 0.0 } + base[k];
                r * r
            })
            .sum();
        for &k in tree {
            mask[k] = false;
        }
        if best.as_ref().map_or(true, |(b, _)| dist < *b) {
            best = Some((dist, tree.to_vec()));
        }
    })?;
    let (value, tree) = best.ok_or(Error::NoSpanningTree)?;
    Ok((TreeIndicator::from_indices(m, &tree), value))
}
