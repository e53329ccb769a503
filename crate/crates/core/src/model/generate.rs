//! Seeded random instances.

use log::debug;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Commodity, Instance, QuadTerms};
use crate::error::{Error, Result};
use crate::graph::{generate_erdos_renyi_with, DEFAULT_RESAMPLE_CAP};
use crate::qp::{solve_qp, QpStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateParams {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
    /// `None` means `max(1, n / 5)`.
    pub commodities: Option<usize>,
    pub hop_slack: usize,
    pub cost_range: (f64, f64),
}

impl GenerateParams {
    pub fn new(n: usize, p: f64, seed: u64) -> Self {
        Self {
            n,
            p,
            seed,
            commodities: None,
            hop_slack: 2,
            cost_range: (1.0, 10.0),
        }
    }

    pub fn commodity_count(&self) -> usize {
        self.commodities.unwrap_or((self.n / 5).max(1))
    }
}

/// Whether the relaxed set Σ admits any point, by one feasibility solve.
pub fn relaxed_set_nonempty(inst: &Instance) -> Result<bool> {
    let len = inst.layout().total();
    let mut terms = QuadTerms::new(len);
    terms.diag.iter_mut().for_each(|d| *d = 1.0);
    let p = terms.into_program(inst);
    let s = solve_qp(&p, 1e-7, 20_000)?;
    Ok(s.status != QpStatus::InfeasibleDetected && s.eq_residual <= 1e-5 && s.ineq_violation <= 1e-5)
}

/// Graph, then costs, then commodities, all from one ChaCha8 stream. Costs
/// are uniform on `cost_range` rounded to cents. The hop bound starts at the
/// largest shortest-path hop count plus `hop_slack` (capped at `n - 1`) and
/// grows until the relaxed set is nonempty.
pub fn generate_instance(params: &GenerateParams) -> Result<Instance> {
    let n = params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let g = generate_erdos_renyi_with(n, params.p, &mut rng, DEFAULT_RESAMPLE_CAP)?;
    let (lo, hi) = params.cost_range;
    if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::InvalidInstance(format!("bad cost range [{lo}, {hi}]")));
    }
    let costs: Vec<f64> = (0..g.edge_count())
        .map(|_| (rng.gen_range(lo..=hi) * 100.0).round() / 100.0)
        .collect();
    let count = params.commodity_count();
    if count == 0 {
        return Err(Error::InvalidInstance("need at least one commodity".into()));
    }
    let commodities: Vec<Commodity> = (0..count)
        .map(|_| {
            let pair = sample(&mut rng, n, 2);
            Commodity {
                origin: pair.index(0),
                dest: pair.index(1),
            }
        })
        .collect();
    let longest = commodities
        .iter()
        .map(|c| g.bfs_hops(c.origin)[c.dest].expect("graph is connected"))
        .max()
        .unwrap_or(1);
    let mut d = (longest + params.hop_slack).min(n - 1).max(1);
    let mut inst = Instance::new(g, costs, commodities, d)?;
    while !relaxed_set_nonempty(&inst)? {
        if d >= n - 1 {
            return Err(Error::InvalidInstance(format!(
                "relaxed set empty even at hop bound {d}"
            )));
        }
        d += 1;
        inst = inst.with_hop_bound(d)?;
    }
    debug!(
        "instance n={n} m={} |F|={} d={d} seed={}",
        inst.edge_count(),
        inst.commodities().len(),
        params.seed
    );
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let params = GenerateParams::new(8, 0.5, 11);
        let a = generate_instance(&params).unwrap();
        let b = generate_instance(&params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.commodities().len(), 1);
        assert!(a.costs().iter().all(|&c| (1.0..=10.0).contains(&c)));
        assert!(a.hop_bound() <= 7);
        for c in a.commodities() {
            assert_ne!(c.origin, c.dest);
            assert!(a.graph().bfs_hops(c.origin)[c.dest].unwrap() <= a.hop_bound());
        }
    }

    #[test]
    fn commodity_rule() {
        assert_eq!(GenerateParams::new(4, 0.5, 0).commodity_count(), 1);
        assert_eq!(GenerateParams::new(10, 0.5, 0).commodity_count(), 2);
        assert_eq!(GenerateParams::new(14, 0.5, 0).commodity_count(), 2);
    }

    #[test]
    fn relaxed_set_detects_emptiness() {
        use crate::graph::UndirectedGraph;
        // path 0-1-2 with d = 1 cannot route 0 -> 2 at all
        let g = UndirectedGraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let inst = Instance::new(g, vec![1.0, 1.0], vec![Commodity { origin: 0, dest: 2 }], 1).unwrap();
        assert!(!relaxed_set_nonempty(&inst).unwrap());
        assert!(relaxed_set_nonempty(&inst.with_hop_bound(2).unwrap()).unwrap());
    }
}
