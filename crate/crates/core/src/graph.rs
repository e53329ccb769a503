//! Undirected graphs, bidirected arc sets, tree indicators and path queries.

use std::collections::VecDeque;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsu::DisjointSet;
use crate::error::{Error, Result};

/// Resample cap used by [`generate_erdos_renyi`].
pub const DEFAULT_RESAMPLE_CAP: usize = 1000;

/// Simple undirected graph with stable, dense edge indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    incident: Vec<Vec<usize>>,
}

impl UndirectedGraph {
    /// Builds a graph from an edge list. Edge `k` of the list becomes edge index `k`;
    /// endpoints are stored as given.
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 nodes, got {node_count}"
            )));
        }
        let mut incident = vec![Vec::new(); node_count];
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for (k, &(u, v)) in edges.iter().enumerate() {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge {k} = ({u},{v}) out of range for {node_count} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u},{v})")));
            }
            incident[u].push(k);
            incident[v].push(k);
        }
        Ok(Self {
            node_count,
            edges,
            incident,
        })
    }

    pub fn complete(node_count: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for u in 0..node_count {
            for v in u + 1..node_count {
                edges.push((u, v));
            }
        }
        Self::new(node_count, edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> (usize, usize) {
        self.edges[k]
    }

    /// Incident edge indices of `node`, ascending.
    pub fn incident_edges(&self, node: usize) -> &[usize] {
        &self.incident[node]
    }

    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.incident[node].iter().map(move |&k| {
            let (u, v) = self.edges[k];
            if u == node {
                v
            } else {
                u
            }
        })
    }

    pub fn degree(&self, node: usize) -> usize {
        self.incident[node].len()
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.incident
            .get(a)?
            .iter()
            .copied()
            .find(|&k| {
                let (u, v) = self.edges[k];
                (u == a && v == b) || (u == b && v == a)
            })
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_hops(0).iter().all(Option::is_some)
    }

    /// Hop distances from `source`; `None` marks unreachable nodes.
    pub fn bfs_hops(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(x) = queue.pop_front() {
            let dx = dist[x].unwrap_or(0);
            for y in self.neighbors(x) {
                if dist[y].is_none() {
                    dist[y] = Some(dx + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }
}

/// Directed arc set with in/out adjacency. When built by [`bidirect`] the
/// forward arc `k` mirrors edge `k` and the reverse arc is `m + k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedArcSet {
    node_count: usize,
    arcs: Vec<(usize, usize)>,
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
    parent_edge: Option<Vec<usize>>,
}

impl DirectedArcSet {
    pub fn new(node_count: usize, arcs: Vec<(usize, usize)>) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 nodes, got {node_count}"
            )));
        }
        let mut out_arcs = vec![Vec::new(); node_count];
        let mut in_arcs = vec![Vec::new(); node_count];
        let mut seen = std::collections::HashSet::with_capacity(arcs.len());
        for (k, &(i, j)) in arcs.iter().enumerate() {
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "arc {k} = ({i},{j}) out of range for {node_count} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidGraph(format!("duplicate arc ({i},{j})")));
            }
            out_arcs[i].push(k);
            in_arcs[j].push(k);
        }
        Ok(Self {
            node_count,
            arcs,
            out_arcs,
            in_arcs,
            parent_edge: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn arc(&self, k: usize) -> (usize, usize) {
        self.arcs[k]
    }

    /// Arc indices leaving `node` (N⁺).
    pub fn out_arcs(&self, node: usize) -> &[usize] {
        &self.out_arcs[node]
    }

    /// Arc indices entering `node` (N⁻).
    pub fn in_arcs(&self, node: usize) -> &[usize] {
        &self.in_arcs[node]
    }

    pub fn out_neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.out_arcs[node].iter().map(move |&a| self.arcs[a].1)
    }

    pub fn in_neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.in_arcs[node].iter().map(move |&a| self.arcs[a].0)
    }

    pub fn parent_edge(&self, arc: usize) -> Option<usize> {
        self.parent_edge.as_ref().map(|p| p[arc])
    }

    /// Nodes reachable from `root` along arc directions.
    pub fn reachable_from(&self, root: usize) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(x) = stack.pop() {
            for y in self.out_neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    }
}

/// Both orientations of every edge: arcs `0..m` are `(u,v)` as stored, arcs
/// `m..2m` are `(v,u)`.
pub fn bidirect(g: &UndirectedGraph) -> DirectedArcSet {
    let m = g.edge_count();
    let arcs: Vec<_> = g
        .edges()
        .iter()
        .copied()
        .chain(g.edges().iter().map(|&(u, v)| (v, u)))
        .collect();
    let mut set = DirectedArcSet::new(g.node_count(), arcs)
        .expect("a valid undirected graph bidirects to a valid arc set");
    set.parent_edge = Some((0..2 * m).map(|a| a % m).collect());
    set
}

/// Binary indicator over edge (or arc) indices.
///
/// The `validated` flag is only ever set by a successful spanning-tree or
/// arborescence check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeIndicator {
    bits: Vec<bool>,
    validated: bool,
}

impl TreeIndicator {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self {
            bits,
            validated: false,
        }
    }

    pub fn from_indices(len: usize, selected: &[usize]) -> Self {
        let mut bits = vec![false; len];
        for &k in selected {
            bits[k] = true;
        }
        Self::from_bits(bits)
    }

    /// Interprets `values` as binary (`>= 0.5` selects).
    pub fn from_values(values: &[f64]) -> Self {
        Self::from_bits(values.iter().map(|&v| v >= 0.5).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, k: usize) -> bool {
        self.bits[k]
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(k, &b)| b.then_some(k))
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// Checks the spanning-tree property and marks the indicator valid.
    pub fn validate_spanning(mut self, g: &UndirectedGraph) -> Result<Self> {
        if is_spanning_tree(g, &self)? {
            self.validated = true;
            Ok(self)
        } else {
            Err(Error::InvalidTree)
        }
    }

    /// Checks the rooted-arborescence property and marks the indicator valid.
    pub fn validate_arborescence(mut self, arcs: &DirectedArcSet, root: usize) -> Result<Self> {
        if is_arborescence(arcs, root, &self)? {
            self.validated = true;
            Ok(self)
        } else {
            Err(Error::InvalidTree)
        }
    }
}

/// `true` iff the selected edges are `n-1` in number and connect every node.
pub fn is_spanning_tree(g: &UndirectedGraph, z: &TreeIndicator) -> Result<bool> {
    if z.len() != g.edge_count() {
        return Err(Error::LengthMismatch {
            expected: g.edge_count(),
            actual: z.len(),
        });
    }
    let n = g.node_count();
    if z.popcount() != n - 1 {
        return Ok(false);
    }
    let mut dsu = DisjointSet::new(n);
    for k in z.selected() {
        let (u, v) = g.edge(k);
        if !dsu.union(u, v) {
            return Ok(false);
        }
    }
    Ok(dsu.components() == 1)
}

/// `true` iff the selected arcs form a spanning arborescence rooted at `root`.
pub fn is_arborescence(arcs: &DirectedArcSet, root: usize, z: &TreeIndicator) -> Result<bool> {
    if z.len() != arcs.arc_count() {
        return Err(Error::LengthMismatch {
            expected: arcs.arc_count(),
            actual: z.len(),
        });
    }
    let n = arcs.node_count();
    if root >= n || z.popcount() != n - 1 {
        return Ok(false);
    }
    let mut indeg = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for a in z.selected() {
        let (i, j) = arcs.arc(a);
        indeg[j] += 1;
        children[i].push(j);
    }
    if indeg[root] != 0 || (0..n).any(|v| v != root && indeg[v] != 1) {
        return Ok(false);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(x) = stack.pop() {
        for &y in &children[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    Ok(seen.into_iter().all(|s| s))
}

/// Step along a tree path: the edge index used and the direction travelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub edge: usize,
    pub from: usize,
    pub to: usize,
}

/// Unique `s -> t` path in the tree `z`, as edge steps.
pub fn tree_path_steps(
    g: &UndirectedGraph,
    z: &TreeIndicator,
    s: usize,
    t: usize,
) -> Result<Vec<PathStep>> {
    if !is_spanning_tree(g, z)? {
        return Err(Error::InvalidTree);
    }
    let n = g.node_count();
    if s >= n || t >= n {
        return Err(Error::InvalidGraph(format!(
            "path endpoints ({s},{t}) out of range"
        )));
    }
    // BFS over tree edges from s, recording the edge each node was reached by.
    let mut via: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([s]);
    seen[s] = true;
    while let Some(x) = queue.pop_front() {
        if x == t {
            break;
        }
        for &k in g.incident_edges(x) {
            if !z.get(k) {
                continue;
            }
            let (u, v) = g.edge(k);
            let y = if u == x { v } else { u };
            if !seen[y] {
                seen[y] = true;
                via[y] = Some(k);
                queue.push_back(y);
            }
        }
    }
    let mut steps = Vec::new();
    let mut cur = t;
    while cur != s {
        let k = via[cur].ok_or(Error::InvalidTree)?;
        let (u, v) = g.edge(k);
        let prev = if u == cur { v } else { u };
        steps.push(PathStep {
            edge: k,
            from: prev,
            to: cur,
        });
        cur = prev;
    }
    steps.reverse();
    Ok(steps)
}

/// Unique `s -> t` path in the tree `z` as directed arcs `(from, to)`.
pub fn tree_path(
    g: &UndirectedGraph,
    z: &TreeIndicator,
    s: usize,
    t: usize,
) -> Result<Vec<(usize, usize)>> {
    Ok(tree_path_steps(g, z, s, t)?
        .into_iter()
        .map(|st| (st.from, st.to))
        .collect())
}

/// Erdős–Rényi `G(n, p)` conditioned on connectivity, seeded.
pub fn generate_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<UndirectedGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_erdos_renyi_with(n, p, &mut rng, DEFAULT_RESAMPLE_CAP)
}

/// Like [`generate_erdos_renyi`] but draws from a caller-owned generator and
/// takes an explicit resample cap. Pairs are visited in lexicographic order,
/// so edge indices come out sorted by `(min, max)` endpoint.
pub fn generate_erdos_renyi_with<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    rng: &mut R,
    resample_cap: usize,
) -> Result<UndirectedGraph> {
    if n < 2 {
        return Err(Error::InvalidGraph(format!("need n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidGraph(format!("need 0 < p <= 1, got {p}")));
    }
    for attempt in 1..=resample_cap {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        let g = UndirectedGraph::new(n, edges)?;
        if g.is_connected() {
            debug!("erdos-renyi n={n} p={p}: connected after {attempt} attempt(s)");
            return Ok(g);
        }
    }
    Err(Error::DisconnectedGraph {
        n,
        p,
        attempts: resample_cap,
    })
}
