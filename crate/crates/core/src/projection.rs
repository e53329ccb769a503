//! Exact projections onto the tree set.
//!
//! Because every spanning tree (and every spanning arborescence) has exactly
//! `n - 1` members, `‖z - w + μ‖²` over tree indicators differs from
//! `2·zᵀ(μ - w)` by a constant. The squared-distance projection is therefore a
//! minimum-weight tree problem with weights `h = μ - w`, solved exactly here by
//! Kruskal (undirected) or Chu–Liu/Edmonds (rooted, directed).
//!
//! Ties are always broken towards the lowest edge/arc index so that ADMM
//! trajectories are reproducible.

use std::cmp::Ordering;

use crate::dsu::DisjointSet;
use crate::error::{Error, Result};
use crate::graph::{DirectedArcSet, TreeIndicator, UndirectedGraph};

/// Real weights over edge or arc indices; negative values are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights(pub Vec<f64>);

impl EdgeWeights {
    /// `h = μ - w_next`.
    pub fn from_iterates(w_next: &[f64], mu: &[f64]) -> Result<Self> {
        if w_next.len() != mu.len() {
            return Err(Error::LengthMismatch {
                expected: w_next.len(),
                actual: mu.len(),
            });
        }
        Ok(Self(mu.iter().zip(w_next).map(|(m, w)| m - w).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Total weight of the selected indices.
    pub fn total(&self, z: &TreeIndicator) -> f64 {
        z.selected().map(|k| self.0[k]).sum()
    }

    fn check(&self, expected: usize) -> Result<()> {
        if self.0.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: self.0.len(),
            });
        }
        if let Some(bad) = self.0.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidGraph(format!("non-finite weight {bad}")));
        }
        Ok(())
    }
}

/// Where the tree set lives.
#[derive(Debug, Clone, Copy)]
pub enum Topology<'a> {
    Undirected(&'a UndirectedGraph),
    Rooted(&'a DirectedArcSet, usize),
}

impl Topology<'_> {
    pub fn dimension(&self) -> usize {
        match self {
            Topology::Undirected(g) => g.edge_count(),
            Topology::Rooted(a, _) => a.arc_count(),
        }
    }
}

/// Minimum-weight spanning tree by Kruskal with a stable sort on weight.
pub fn mst_kruskal(g: &UndirectedGraph, h: &EdgeWeights) -> Result<TreeIndicator> {
    h.check(g.edge_count())?;
    let mut order: Vec<usize> = (0..g.edge_count()).collect();
    order.sort_by(|&a, &b| h.0[a].total_cmp(&h.0[b]));

    let n = g.node_count();
    let mut dsu = DisjointSet::new(n);
    let mut bits = vec![false; g.edge_count()];
    let mut taken = 0;
    for k in order {
        let (u, v) = g.edge(k);
        if dsu.union(u, v) {
            bits[k] = true;
            taken += 1;
            if taken == n - 1 {
                break;
            }
        }
    }
    if taken != n - 1 {
        return Err(Error::NoSpanningTree);
    }
    TreeIndicator::from_bits(bits).validate_spanning(g)
}

#[derive(Debug, Clone, Copy)]
struct WorkArc {
    from: usize,
    to: usize,
    weight: f64,
    // original arc index, doubles as the tie-break key
    id: usize,
}

fn lighter(a: &WorkArc, b: &WorkArc) -> bool {
    match a.weight.total_cmp(&b.weight) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.id < b.id,
    }
}

/// Minimum-weight spanning arborescence rooted at `root` (Chu–Liu/Edmonds with
/// explicit cycle contraction and expansion).
pub fn mwra_edmonds(a: &DirectedArcSet, root: usize, h: &EdgeWeights) -> Result<TreeIndicator> {
    h.check(a.arc_count())?;
    let n = a.node_count();
    if root >= n {
        return Err(Error::InvalidGraph(format!("root {root} out of range")));
    }
    let reach = a.reachable_from(root);
    if let Some(node) = reach.iter().position(|&r| !r) {
        return Err(Error::NoArborescence { root, node });
    }
    let arcs: Vec<WorkArc> = a
        .arcs()
        .iter()
        .enumerate()
        .map(|(id, &(from, to))| WorkArc {
            from,
            to,
            weight: h.0[id],
            id,
        })
        .collect();
    let chosen = edmonds_contract(n, root, &arcs)?;
    let ids: Vec<usize> = chosen.into_iter().map(|p| arcs[p].id).collect();
    TreeIndicator::from_indices(a.arc_count(), &ids).validate_arborescence(a, root)
}

/// Returns positions into `arcs` of the chosen arborescence.
fn edmonds_contract(n: usize, root: usize, arcs: &[WorkArc]) -> Result<Vec<usize>> {
    let mut best_in: Vec<Option<usize>> = vec![None; n];
    for (pos, arc) in arcs.iter().enumerate() {
        if arc.to == root || arc.from == arc.to {
            continue;
        }
        match best_in[arc.to] {
            Some(cur) if !lighter(arc, &arcs[cur]) => {}
            _ => best_in[arc.to] = Some(pos),
        }
    }
    for v in 0..n {
        if v != root && best_in[v].is_none() {
            return Err(Error::NoArborescence { root, node: v });
        }
    }

    // Cycle detection on the parent pointers.
    let mut cycle_of: Vec<Option<usize>> = vec![None; n];
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    let mut mark = vec![usize::MAX; n];
    for start in 0..n {
        let mut v = start;
        while v != root && mark[v] == usize::MAX && cycle_of[v].is_none() {
            mark[v] = start;
            v = arcs[best_in[v].unwrap()].from;
        }
        if v != root && mark[v] == start && cycle_of[v].is_none() {
            let id = cycles.len();
            let mut cycle = vec![v];
            cycle_of[v] = Some(id);
            let mut u = arcs[best_in[v].unwrap()].from;
            while u != v {
                cycle_of[u] = Some(id);
                cycle.push(u);
                u = arcs[best_in[u].unwrap()].from;
            }
            cycles.push(cycle);
        }
    }

    if cycles.is_empty() {
        return Ok((0..n).filter(|&v| v != root).map(|v| best_in[v].unwrap()).collect());
    }

    // Contract: each cycle becomes one node, everything else is renumbered.
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for c in &cycles {
        for &v in c {
            comp[v] = next;
        }
        next += 1;
    }
    for v in 0..n {
        if comp[v] == usize::MAX {
            comp[v] = next;
            next += 1;
        }
    }
    let mut contracted = Vec::new();
    let mut origin = Vec::new();
    for (pos, arc) in arcs.iter().enumerate() {
        let (cu, cv) = (comp[arc.from], comp[arc.to]);
        if cu == cv {
            continue;
        }
        let weight = if cycle_of[arc.to].is_some() {
            arc.weight - arcs[best_in[arc.to].unwrap()].weight
        } else {
            arc.weight
        };
        contracted.push(WorkArc {
            from: cu,
            to: cv,
            weight,
            id: arc.id,
        });
        origin.push(pos);
    }
    let sub = edmonds_contract(next, comp[root], &contracted)?;

    // Expand.
    let mut result = Vec::with_capacity(n - 1);
    let mut entered: Vec<Option<usize>> = vec![None; cycles.len()];
    for p in sub {
        let pos = origin[p];
        let to = arcs[pos].to;
        if let Some(c) = cycle_of[to] {
            entered[c] = Some(to);
        }
        result.push(pos);
    }
    for (c, cycle) in cycles.iter().enumerate() {
        let entry = entered[c].expect("every contracted cycle has one entering arc");
        for &v in cycle {
            if v != entry {
                result.push(best_in[v].unwrap());
            }
        }
    }
    Ok(result)
}

/// Exact projection of `w_next - mu` onto the tree set:
/// `argmin ‖z - w_next + mu‖²` via the weights `h = mu - w_next`.
pub fn project_tree(w_next: &[f64], mu: &[f64], topology: Topology<'_>) -> Result<TreeIndicator> {
    if w_next.len() != topology.dimension() {
        return Err(Error::LengthMismatch {
            expected: topology.dimension(),
            actual: w_next.len(),
        });
    }
    let h = EdgeWeights::from_iterates(w_next, mu)?;
    match topology {
        Topology::Undirected(g) => mst_kruskal(g, &h),
        Topology::Rooted(a, root) => mwra_edmonds(a, root, &h),
    }
}

/// Component-wise nearest point of `{0,1}`; a value of exactly 0.5 rounds to 1.
pub fn project_binary(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| if x >= 0.5 { 1.0 } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_arborescence;

    fn k3() -> UndirectedGraph {
        UndirectedGraph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn three_node_digraph() -> DirectedArcSet {
        DirectedArcSet::new(3, vec![(0, 1), (0, 2), (2, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn kruskal_examples() {
        let g = k3();
        let z = mst_kruskal(&g, &EdgeWeights(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(z.bits(), &[true, true, false]);
        let h = EdgeWeights(vec![-1.0, -2.0, -3.0]);
        let z = mst_kruskal(&g, &h).unwrap();
        assert_eq!(z.bits(), &[false, true, true]);
        assert_eq!(h.total(&z), -5.0);
        for c in [-2.5, 0.0, 4.0] {
            let h = EdgeWeights(vec![c; 3]);
            let z = mst_kruskal(&g, &h).unwrap();
            assert_eq!(z.bits(), &[true, true, false]);
            assert_eq!(h.total(&z), 2.0 * c);
        }
    }

    #[test]
    fn kruskal_rejects_disconnected() {
        let g = UndirectedGraph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            mst_kruskal(&g, &EdgeWeights(vec![0.0, 0.0])),
            Err(Error::NoSpanningTree)
        ));
    }

    #[test]
    fn edmonds_examples() {
        let a = three_node_digraph();
        let h = EdgeWeights(vec![5.0, 1.0, 1.0, 10.0]);
        let z = mwra_edmonds(&a, 0, &h).unwrap();
        assert_eq!(z.bits(), &[false, true, true, false]);
        assert_eq!(h.total(&z), 2.0);

        let two = DirectedArcSet::new(2, vec![(0, 1)]).unwrap();
        let h = EdgeWeights(vec![-4.0]);
        let z = mwra_edmonds(&two, 0, &h).unwrap();
        assert_eq!(h.total(&z), -4.0);

        let unreachable = DirectedArcSet::new(3, vec![(0, 1), (2, 1)]).unwrap();
        assert!(matches!(
            mwra_edmonds(&unreachable, 0, &EdgeWeights(vec![0.0, 0.0])),
            Err(Error::NoArborescence { node: 2, .. })
        ));
    }

    #[test]
    fn edmonds_contracts_cycles() {
        // Cheap 1<->2 cycle must be broken by the cheapest entry from the root.
        let a = DirectedArcSet::new(
            4,
            vec![(0, 1), (1, 2), (2, 1), (2, 3), (3, 2), (0, 3)],
        )
        .unwrap();
        let h = EdgeWeights(vec![10.0, 1.0, 1.0, 1.0, 1.0, 3.0]);
        let z = mwra_edmonds(&a, 0, &h).unwrap();
        assert!(is_arborescence(&a, 0, &z).unwrap());
        assert_eq!(h.total(&z), 5.0);
    }

    #[test]
    fn project_tree_examples() {
        let g = k3();
        let z = project_tree(&[0.9, 0.5, 0.1], &[0.2, -0.1, 0.0], Topology::Undirected(&g)).unwrap();
        assert_eq!(z.bits(), &[true, true, false]);
        let t = [1.0, 0.0, 1.0];
        let z = project_tree(&t, &[0.0; 3], Topology::Undirected(&g)).unwrap();
        assert_eq!(z.to_f64(), t);
        let z = project_tree(&[0.0; 3], &[0.0; 3], Topology::Undirected(&g)).unwrap();
        assert_eq!(z.bits(), &[true, true, false]);
        assert!(project_tree(&[0.0; 2], &[0.0; 2], Topology::Undirected(&g)).is_err());
    }

    #[test]
    fn project_binary_examples() {
        assert_eq!(project_binary(&[0.7, 0.2, 0.5]), vec![1.0, 0.0, 1.0]);
        assert_eq!(project_binary(&[0.0, 1.0]), vec![0.0, 1.0]);
        assert_eq!(project_binary(&[-3.0, 4.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn project_binary_is_exhaustively_nearest() {
        let v = [0.49, 0.51, -0.2, 1.3, 0.5, 0.0, 0.77, 0.23, 0.5000001, 0.4999999];
        let y = project_binary(&v);
        let dist = |b: &[f64]| -> f64 { b.iter().zip(&v).map(|(a, x)| (a - x).powi(2)).sum() };
        let best = dist(&y);
        for mask in 0u32..(1 << v.len()) {
            let b: Vec<f64> = (0..v.len()).map(|i| ((mask >> i) & 1) as f64).collect();
            assert!(best <= dist(&b) + 1e-15);
        }
        assert_eq!(project_binary(&y), y);
    }
}
