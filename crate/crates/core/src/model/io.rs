//! Line-oriented instance text format.
//!
//! ```text
//! nodes 3
//! edge 0 1 1.5
//! edge 1 2 2
//! commodity 0 2
//! hopbound 2
//! tree 0 1        (optional, one line per selected edge)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::{Commodity, Instance};
use crate::error::{Error, Result};
use crate::graph::{TreeIndicator, UndirectedGraph};

pub fn write_instance(inst: &Instance, tree: Option<&TreeIndicator>) -> String {
    let mut out = String::new();
    let g = inst.graph();
    let _ = writeln!(out, "nodes {}", g.node_count());
    for (k, &(u, v)) in g.edges().iter().enumerate() {
        let _ = writeln!(out, "edge {u} {v} {}", inst.costs()[k]);
    }
    for c in inst.commodities() {
        let _ = writeln!(out, "commodity {} {}", c.origin, c.dest);
    }
    let _ = writeln!(out, "hopbound {}", inst.hop_bound());
    if let Some(z) = tree {
        for k in z.selected() {
            let (u, v) = g.edge(k);
            let _ = writeln!(out, "tree {u} {v}");
        }
    }
    out
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {what} `{tok}`"),
    })
}

/// Parses an instance and, when present, its `tree` stanza.
pub fn parse_instance(text: &str) -> Result<(Instance, Option<TreeIndicator>)> {
    let mut nodes: Option<usize> = None;
    let mut edges = Vec::new();
    let mut costs = Vec::new();
    let mut commodities = Vec::new();
    let mut hop: Option<usize> = None;
    let mut tree_edges: Vec<(usize, usize, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let key = toks.next().unwrap_or_default();
        match key {
            "nodes" => nodes = Some(field(toks.next(), line, "node count")?),
            "edge" => {
                let u: usize = field(toks.next(), line, "endpoint")?;
                let v: usize = field(toks.next(), line, "endpoint")?;
                let c: f64 = field(toks.next(), line, "cost")?;
                edges.push((u, v));
                costs.push(c);
            }
            "commodity" => {
                let o = field(toks.next(), line, "origin")?;
                let d = field(toks.next(), line, "destination")?;
                commodities.push(Commodity { origin: o, dest: d });
            }
            "hopbound" => hop = Some(field(toks.next(), line, "hop bound")?),
            "tree" => {
                let u = field(toks.next(), line, "endpoint")?;
                let v = field(toks.next(), line, "endpoint")?;
                tree_edges.push((line, u, v));
            }
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown keyword `{other}`"),
                })
            }
        }
        if let Some(extra) = toks.next() {
            return Err(Error::Parse {
                line,
                msg: format!("trailing token `{extra}`"),
            });
        }
    }
    let n = nodes.ok_or(Error::Parse {
        line: 0,
        msg: "missing `nodes` line".into(),
    })?;
    let hop = hop.ok_or(Error::Parse {
        line: 0,
        msg: "missing `hopbound` line".into(),
    })?;
    let g = UndirectedGraph::new(n, edges)?;
    let tree = if tree_edges.is_empty() {
        None
    } else {
        let mut picked = Vec::with_capacity(tree_edges.len());
        for (line, u, v) in tree_edges {
            let k = g.find_edge(u, v).ok_or_else(|| Error::Parse {
                line,
                msg: format!("tree edge ({u},{v}) not in graph"),
            })?;
            picked.push(k);
        }
        Some(TreeIndicator::from_indices(g.edge_count(), &picked))
    };
    let inst = Instance::new(g, costs, commodities, hop)?;
    Ok((inst, tree))
}
