use arbor_admm::central::{init_state, residual_central, step};
use arbor_admm::distributed::{consensus_gap, sync_round, sync_round_in_order};
use arbor_admm::experiment::{compute_gap, run_experiment, SweepSpec};
use arbor_admm::graph::is_spanning_tree;
use arbor_admm::model::{check_feasible, generate_instance, objective, GenerateParams};
use arbor_admm::oracle::{exact_solve, EnumerationBudget, ExactOutcome};
use arbor_admm::report::{read_rows, SummaryRow};
use arbor_admm::{solve_central, solve_distributed, Mode, SolverConfig, World};

fn instance(n: usize, seed: u64) -> arbor_admm::Instance {
    generate_instance(&GenerateParams::new(n, 0.5, seed)).unwrap()
}

fn cfg(rho: f64, max_iters: usize) -> SolverConfig {
    SolverConfig {
        max_iters,
        ..SolverConfig::with_rho(rho)
    }
}

#[test]
fn central_iterates_keep_their_invariants() {
    for seed in 0..4 {
        let inst = instance(6, seed);
        let c = cfg(1.0, 30);
        let mut s = init_state(&inst, &c).unwrap();
        for _ in 0..30 {
            let next = step(&s, &inst, &c).unwrap();
            assert!(is_spanning_tree(inst.graph(), &next.z).unwrap());
            assert!(next.y.values().iter().all(|&v| v == 0.0 || v == 1.0));
            // scaled dual updates are exact sums of the primal gaps
            for e in 0..inst.edge_count() {
                let z = if next.z.get(e) { 1.0 } else { 0.0 };
                assert_eq!(next.mu[e], s.mu[e] + (z - next.w[e]));
            }
            for (k, &y) in next.y.values().iter().enumerate() {
                assert_eq!(next.eta[k], s.eta[k] + (y - next.u[k]));
            }
            assert_eq!(next.last_residual, Some(residual_central(&s, &next)));
            s = next;
        }
    }
}

#[test]
fn central_runs_are_reproducible() {
    let inst = instance(7, 3);
    let a = solve_central(&inst, &cfg(1.0, 60)).unwrap();
    let b = solve_central(&inst, &cfg(1.0, 60)).unwrap();
    assert_eq!(a.z, b.z);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
}

#[test]
fn reported_objective_matches_recomputation() {
    for seed in 0..4 {
        let inst = instance(6, seed);
        for r in [solve_central(&inst, &cfg(1.0, 80)).unwrap(), solve_distributed(&inst, &cfg(1.0, 40)).unwrap()] {
            if r.feasible {
                assert!(check_feasible(&inst, &r.z, &r.y).is_feasible());
                assert_eq!(r.objective, objective(&inst, &r.z.to_f64()));
            }
        }
    }
}

#[test]
fn feasible_heuristic_never_beats_the_optimum() {
    for seed in 0..5 {
        let inst = instance(6, seed);
        let ExactOutcome::Optimal { objective: opt, .. } = exact_solve(&inst, EnumerationBudget::default()).unwrap()
        else {
            unreachable!()
        };
        let r = solve_central(&inst, &cfg(1.0, 200)).unwrap();
        if r.feasible {
            assert!(compute_gap(r.objective, opt).unwrap() >= -1e-9);
        }
    }
}

#[test]
fn agent_execution_order_does_not_matter() {
    let inst = instance(6, 11);
    let mut world = World::new(inst, cfg(1.0, 10)).unwrap();
    for _ in 0..5 {
        let forward = sync_round_in_order(&world, &[0, 1, 2, 3, 4, 5]).unwrap();
        let shuffled = sync_round_in_order(&world, &[3, 5, 0, 4, 2, 1]).unwrap();
        let parallel = sync_round(&world).unwrap();
        assert_eq!(forward, shuffled);
        assert_eq!(forward, parallel);
        world = forward;
    }
}

#[test]
fn identical_agents_stay_identical_in_the_first_round() {
    // with no neighbour disagreement the consensus duals stay at zero
    let inst = instance(6, 2);
    let world = World::new(inst, cfg(1.0, 10)).unwrap();
    assert_eq!(consensus_gap(&world), 0.0);
    let next = sync_round(&world).unwrap();
    for a in &next.agents {
        assert!(a.nu.iter().chain(&a.xi).all(|&v| v.is_finite()));
        assert_eq!(a.k, 1);
    }
}

#[test]
fn missing_agent_in_order_is_an_error() {
    let world = World::new(instance(6, 0), cfg(1.0, 10)).unwrap();
    assert!(sync_round_in_order(&world, &[0, 1, 2, 3, 4]).is_err());
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SweepSpec::new(dir.path());
    spec.ns = vec![6];
    spec.seeds = vec![0, 1];
    spec.rhos = vec![0.1, 1.0, 10.0];
    spec.solver.max_iters = 20;
    spec.record_wall_time = false;
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 12);
    let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let back: Vec<SummaryRow> = read_rows(text.as_bytes()).unwrap();
    assert_eq!(back, rows);
    for r in &rows {
        assert!(dir.path().join(&r.trace_path).exists(), "{}", r.trace_path);
        assert_eq!(r.wall_ms, 0);
        if r.status == "ok" {
            assert!(r.feasible && r.gap_pct.unwrap() >= -1e-9);
        }
    }
    assert_eq!(rows.iter().filter(|r| r.mode == Mode::Distributed).count(), 6);
}

#[test]
fn sweep_output_is_byte_identical() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = SweepSpec::new(dir.path());
        spec.rhos = vec![1.0];
        spec.solver.max_iters = 15;
        spec.record_wall_time = false;
        run_experiment(&spec).unwrap();
        let mut files = vec![std::fs::read(dir.path().join("summary.csv")).unwrap()];
        let mut traces: Vec<_> = std::fs::read_dir(dir.path().join("traces"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        traces.sort();
        files.extend(traces.iter().map(|p| std::fs::read(p).unwrap()));
        files
    };
    assert_eq!(run(), run());
}

#[test]
fn sweep_without_oracle_has_no_gap() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SweepSpec::new(dir.path());
    spec.rhos = vec![1.0];
    spec.modes = vec![Mode::Central];
    spec.oracle = false;
    spec.solver.max_iters = 10;
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].gap_pct.is_none() && rows[0].oracle_obj.is_none());
    if rows[0].feasible {
        assert_eq!(rows[0].status, "ok");
    }
}

#[test]
fn oracle_over_budget_is_skipped_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SweepSpec::new(dir.path());
    spec.ns = vec![9];
    spec.rhos = vec![10.0];
    spec.modes = vec![Mode::Central];
    spec.budget = EnumerationBudget::with_max_edges(3);
    spec.solver.max_iters = 10;
    let rows = run_experiment(&spec).unwrap();
    assert!(rows[0].oracle_obj.is_none());
    if rows[0].feasible {
        assert_eq!(rows[0].status, "oracle-skipped");
    }
}
