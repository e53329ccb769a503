mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use arbor_admm::dsu::DisjointSet;
use arbor_admm::graph::{generate_erdos_renyi, is_spanning_tree, tree_path};
use arbor_admm::oracle::{enumerate_spanning_trees, exact_project, EnumerationBudget};
use arbor_admm::projection::mst_kruskal;
use arbor_admm::{project_binary, project_tree, EdgeWeights, Topology, TreeIndicator, UndirectedGraph};

fn independent_tree_check(g: &UndirectedGraph, bits: &[bool]) -> bool {
    let picked: Vec<usize> = (0..bits.len()).filter(|&k| bits[k]).collect();
    if picked.len() != g.node_count() - 1 {
        return false;
    }
    let mut d = DisjointSet::new(g.node_count());
    for k in picked {
        let (u, v) = g.edge(k);
        d.union(u, v);
    }
    d.components() == 1
}

fn dist2(z: &TreeIndicator, w: &[f64], mu: &[f64]) -> f64 {
    (0..w.len())
        .map(|k| (if z.get(k) { 1.0 } else { 0.0 } - w[k] + mu[k]).powi(2))
        .sum()
}

#[test]
fn spanning_check_agrees_with_independent_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for round in 0..1000u64 {
        let g = generate_erdos_renyi(3 + (round % 5) as usize, 0.6, round).unwrap();
        let bits: Vec<bool> = (0..g.edge_count()).map(|_| rng.gen::<f64>() < 0.6).collect();
        let z = TreeIndicator::from_bits(bits.clone());
        assert_eq!(is_spanning_tree(&g, &z).unwrap(), independent_tree_check(&g, &bits));
    }
}

#[test]
fn generator_is_seed_deterministic_and_connected() {
    for seed in 0..30 {
        let a = generate_erdos_renyi(9, 0.3, seed).unwrap();
        assert_eq!(a, generate_erdos_renyi(9, 0.3, seed).unwrap());
        assert!(a.is_connected());
        let mut sorted = a.edges().to_vec();
        sorted.sort();
        assert_eq!(sorted, a.edges());
    }
}

#[test]
fn projection_expansion_identity() {
    // min ‖z - w + μ‖² = (n-1) + ‖μ - w‖² + 2 min zᵀh with h = μ - w
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for seed in 0..40 {
        let g = generate_erdos_renyi(4 + seed % 4, 0.6, seed as u64).unwrap();
        let m = g.edge_count();
        let w: Vec<f64> = (0..m).map(|_| rng.gen()).collect();
        let mu: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = EdgeWeights::from_iterates(&w, &mu).unwrap();
        let (_, best) = exact_project(&w, &mu, &g, EnumerationBudget::default()).unwrap();
        let min_lin = enumerate_spanning_trees(&g, EnumerationBudget::default())
            .unwrap()
            .iter()
            .map(|t| h.total(t))
            .fold(f64::INFINITY, f64::min);
        let norm2: f64 = h.as_slice().iter().map(|x| x * x).sum();
        let predicted = (g.node_count() - 1) as f64 + norm2 + 2.0 * min_lin;
        assert!((best - predicted).abs() < 1e-12, "{best} vs {predicted}");
    }
}

#[test]
fn projection_is_idempotent_on_trees() {
    let g = generate_erdos_renyi(7, 0.5, 5).unwrap();
    for t in enumerate_spanning_trees(&g, EnumerationBudget::default()).unwrap().iter().take(50) {
        let z = project_tree(&t.to_f64(), &vec![0.0; g.edge_count()], Topology::Undirected(&g)).unwrap();
        assert_eq!(z.bits(), t.bits());
    }
}

proptest! {
    #[test]
    fn kruskal_matches_enumeration(seed in 0u64..5000, n in 3usize..7) {
        let g = generate_erdos_renyi(n, 0.6, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        let w: Vec<f64> = (0..g.edge_count()).map(|_| rng.gen()).collect();
        let mu: Vec<f64> = (0..g.edge_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z = project_tree(&w, &mu, Topology::Undirected(&g)).unwrap();
        prop_assert!(is_spanning_tree(&g, &z).unwrap());
        let (_, best) = exact_project(&w, &mu, &g, EnumerationBudget::default()).unwrap();
        prop_assert!((dist2(&z, &w, &mu) - best).abs() < 1e-9);
    }

    #[test]
    fn shifting_both_iterates_keeps_projection(seed in 0u64..2000, shift in -3.0f64..3.0) {
        let g = generate_erdos_renyi(6, 0.5, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..g.edge_count()).map(|_| rng.gen()).collect();
        let mu: Vec<f64> = (0..g.edge_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z1 = project_tree(&w, &mu, Topology::Undirected(&g)).unwrap();
        let w2: Vec<f64> = w.iter().map(|x| x + shift).collect();
        let mu2: Vec<f64> = mu.iter().map(|x| x + shift).collect();
        let h1 = EdgeWeights::from_iterates(&w, &mu).unwrap();
        let z2 = project_tree(&w2, &mu2, Topology::Undirected(&g)).unwrap();
        // rounding may reorder near-ties, but the optimal weight is unchanged
        prop_assert!((h1.total(&z1) - h1.total(&z2)).abs() < 1e-9);
    }

    #[test]
    fn binary_projection_is_nearest(v in proptest::collection::vec(-2.0f64..3.0, 1..20)) {
        let b = project_binary(&v);
        for (x, p) in v.iter().zip(&b) {
            prop_assert!(*p == 0.0 || *p == 1.0);
            prop_assert!((x - p).abs() <= (x - (1.0 - p)).abs());
        }
    }

    #[test]
    fn tree_paths_are_simple(seed in 0u64..3000) {
        let g = generate_erdos_renyi(7, 0.5, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = EdgeWeights((0..g.edge_count()).map(|_| rng.gen()).collect());
        let z = mst_kruskal(&g, &h).unwrap();
        let (s, t) = (rng.gen_range(0..7), rng.gen_range(0..7));
        let path = tree_path(&g, &z, s, t).unwrap();
        let mut seen = vec![s];
        let mut cur = s;
        for (a, b) in path {
            prop_assert_eq!(a, cur);
            prop_assert!(!seen.contains(&b));
            seen.push(b);
            cur = b;
        }
        prop_assert_eq!(cur, t);
    }
}
