mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use arbor_admm::graph::{generate_erdos_renyi, tree_path};
use arbor_admm::model::{
    build_centralized_subproblem, check_feasible, generate_instance, objective, parse_instance,
    route_on_tree, tree_hops, write_instance, GenerateParams, RouteOutcome,
};
use arbor_admm::oracle::{
    arborescence_count, enumerate_arborescences, enumerate_spanning_trees, exact_solve, kirchhoff_count,
    EnumerationBudget, ExactOutcome,
};
use arbor_admm::{Commodity, DirectedArcSet, FlowAssignment, Instance};

fn random_instance(seed: u64, n: usize, hop: usize) -> Instance {
    let g = generate_erdos_renyi(n, 0.6, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs = (0..g.edge_count()).map(|_| rng.gen_range(1.0..10.0)).collect();
    let commodities = (0..2)
        .map(|_| {
            let o = rng.gen_range(0..n);
            let d = (o + rng.gen_range(1..n)) % n;
            Commodity { origin: o, dest: d }
        })
        .collect();
    Instance::new(g, costs, commodities, hop).unwrap()
}

#[test]
fn routing_feasible_iff_hops_fit_exhaustive() {
    for seed in 0..12u64 {
        let n = 3 + (seed % 4) as usize;
        let inst = random_instance(seed, n, 1 + (seed % 3) as usize);
        for z in enumerate_spanning_trees(inst.graph(), EnumerationBudget::default()).unwrap() {
            let hops = tree_hops(&inst, &z).unwrap();
            let fits = hops.iter().all(|&h| h <= inst.hop_bound());
            let out = route_on_tree(&inst, &z).unwrap();
            assert_eq!(out.is_routed(), fits);
            assert_eq!(check_feasible(&inst, &z, out.flows()).is_feasible(), fits);
        }
    }
}

#[test]
fn feasible_flows_are_simple_paths() {
    for seed in 0..8u64 {
        let inst = random_instance(seed, 5, 4);
        for z in enumerate_spanning_trees(inst.graph(), EnumerationBudget::default()).unwrap() {
            let RouteOutcome::Routed(y) = route_on_tree(&inst, &z).unwrap() else {
                continue;
            };
            assert!(check_feasible(&inst, &z, &y).is_feasible());
            for (f, c) in inst.commodities().iter().enumerate() {
                let path = tree_path(inst.graph(), &z, c.origin, c.dest).unwrap();
                let used = y.commodity(f).iter().filter(|&&v| v != 0.0).count();
                assert_eq!(used, path.len());
                for (a, b) in path {
                    let arc = inst.arcs().arcs().iter().position(|&x| x == (a, b)).unwrap();
                    assert_eq!(y.get(f, arc), 1.0);
                }
            }
        }
    }
}

#[test]
fn binary_points_satisfy_relaxed_rows() {
    for seed in 0..6u64 {
        let inst = random_instance(seed, 5, 4);
        let layout = inst.layout();
        let p = build_centralized_subproblem(
            &inst,
            &vec![0.0; layout.edges],
            &FlowAssignment::for_instance(&inst),
            &vec![0.0; layout.edges],
            &vec![0.0; layout.flow_len()],
            1.0,
        )
        .unwrap();
        for z in enumerate_spanning_trees(inst.graph(), EnumerationBudget::default()).unwrap() {
            if let RouteOutcome::Routed(y) = route_on_tree(&inst, &z).unwrap() {
                assert_eq!(p.feasibility(&layout.stack(&z.to_f64(), y.values())), (0.0, 0.0));
            }
        }
    }
}

#[test]
fn tree_counts_match_float_determinant() {
    for seed in 0..20u64 {
        let g = generate_erdos_renyi(3 + (seed % 6) as usize, 0.5, seed).unwrap();
        let trees = enumerate_spanning_trees(&g, EnumerationBudget::with_max_edges(28)).unwrap();
        assert_eq!(trees.len() as f64, common::float_tree_count(&g));
        assert_eq!(trees.len() as u128, kirchhoff_count(&g).unwrap());
    }
}

#[test]
fn arborescence_counts_match_tutte() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let n = rng.gen_range(2..6);
        let arcs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (0..n).map(move |v| (u, v)))
            .filter(|&(u, v)| u != v)
            .filter(|_| rng.gen::<f64>() < 0.6)
            .collect();
        let a = DirectedArcSet::new(n, arcs).unwrap();
        let listed = enumerate_arborescences(&a, 0, EnumerationBudget::default()).unwrap();
        assert_eq!(listed.len() as u128, arborescence_count(&a, 0).unwrap());
    }
}

#[test]
fn exact_optimum_is_a_lower_bound() {
    for seed in 0..6u64 {
        let inst = generate_instance(&GenerateParams::new(6, 0.5, seed)).unwrap();
        let ExactOutcome::Optimal { z, objective: opt } = exact_solve(&inst, EnumerationBudget::default()).unwrap()
        else {
            panic!("generated instances are feasible");
        };
        assert_eq!(objective(&inst, &z.to_f64()), opt);
        for t in enumerate_spanning_trees(inst.graph(), EnumerationBudget::default()).unwrap() {
            if route_on_tree(&inst, &t).unwrap().is_routed() {
                assert!(objective(&inst, &t.to_f64()) >= opt);
            }
        }
    }
}

#[test]
fn instance_text_round_trip_for_generated() {
    for seed in 0..10 {
        let inst = generate_instance(&GenerateParams::new(7, 0.5, seed)).unwrap();
        let text = write_instance(&inst, None);
        let (back, tree) = parse_instance(&text).unwrap();
        assert!(tree.is_none());
        assert_eq!(back, inst);
        assert_eq!(write_instance(&back, None), text);
    }
}

proptest! {
    #[test]
    fn generated_instances_are_valid(seed in 0u64..10_000, n in 4usize..11) {
        let inst = generate_instance(&GenerateParams::new(n, 0.5, seed)).unwrap();
        prop_assert!(inst.graph().is_connected());
        prop_assert_eq!(inst.commodities().len(), (n / 5).max(1));
        prop_assert!(inst.hop_bound() >= 1 && inst.hop_bound() < n);
        for c in inst.commodities() {
            prop_assert_ne!(c.origin, c.dest);
        }
        prop_assert!(inst.costs().iter().all(|c| (1.0..=10.0).contains(c)));
    }
}
