//! Test-only reference solvers and fixtures.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use arbor_admm::qp::{QuadraticProgram, SparseRows};

/// Random diagonal QP with a known feasible point: equality right-hand
/// sides are evaluated at an interior point, inequality sides get a slack.
pub fn random_qp(seed: u64, dim: usize, n_eq: usize, n_in: usize) -> QuadraticProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..0.9)).collect();
    let row = |rng: &mut ChaCha8Rng| -> Vec<(usize, f64)> {
        let mut r: Vec<(usize, f64)> = Vec::new();
        for j in 0..dim {
            if rng.gen::<f64>() < 0.4 {
                r.push((j, rng.gen_range(-1.0..1.0)));
            }
        }
        if r.is_empty() {
            r.push((rng.gen_range(0..dim), 1.0));
        }
        r
    };
    let dot = |r: &[(usize, f64)]| r.iter().map(|&(j, a)| a * x0[j]).sum::<f64>();
    let mut eq = SparseRows::new();
    let mut eq_rhs = Vec::new();
    for _ in 0..n_eq {
        let r = row(&mut rng);
        eq_rhs.push(dot(&r));
        eq.push(r);
    }
    let mut ineq = SparseRows::new();
    let mut ineq_rhs = Vec::new();
    for _ in 0..n_in {
        let r = row(&mut rng);
        let slack = if rng.gen::<f64>() < 0.5 { 0.0 } else { rng.gen_range(0.0..0.3) };
        ineq_rhs.push(dot(&r) + slack);
        ineq.push(r);
    }
    QuadraticProgram {
        diag: (0..dim).map(|_| rng.gen_range(0.5..2.0)).collect(),
        linear: (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        eq,
        eq_rhs,
        ineq,
        ineq_rhs,
        lower: vec![0.0; dim],
        upper: vec![1.0; dim],
    }
}

/// Long-run accelerated projected gradient on the dual of a strictly convex
/// diagonal QP. The inner minimisation over the box is closed form, so the
/// dual is smooth with Lipschitz constant `‖A‖² / min d`.
pub fn dual_gradient_oracle(p: &QuadraticProgram, max_steps: usize) -> Vec<f64> {
    let n = p.diag.len();
    let rows: Vec<&[(usize, f64)]> = p.eq.rows().iter().chain(p.ineq.rows()).map(|r| r.as_slice()).collect();
    let rhs: Vec<f64> = p.eq_rhs.iter().chain(&p.ineq_rhs).copied().collect();
    let n_eq = p.eq.len();
    let k = rows.len();
    let dmin = p.diag.iter().cloned().fold(f64::INFINITY, f64::min);
    // Frobenius norm bounds the spectral norm
    let fro: f64 = rows.iter().flat_map(|r| r.iter()).map(|&(_, a)| a * a).sum();
    let step = dmin / fro.max(1e-12);

    let primal = |lam: &[f64]| -> Vec<f64> {
        let mut g = p.linear.clone();
        for (r, &l) in rows.iter().zip(lam) {
            for &(j, a) in r.iter() {
                g[j] += a * l;
            }
        }
        (0..n).map(|j| (-g[j] / p.diag[j]).clamp(p.lower[j], p.upper[j])).collect()
    };
    let mut lam = vec![0.0; k];
    let mut prev = lam.clone();
    let mut t = 1.0f64;
    let mut v = primal(&lam);
    for it in 0..max_steps {
        let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / tn;
        let look: Vec<f64> = lam.iter().zip(&prev).map(|(a, b)| a + beta * (a - b)).collect();
        let vl = primal(&look);
        let mut next = look.clone();
        for (i, r) in rows.iter().enumerate() {
            let ax: f64 = r.iter().map(|&(j, a)| a * vl[j]).sum();
            next[i] += step * (ax - rhs[i]);
            if i >= n_eq {
                next[i] = next[i].max(0.0);
            }
        }
        prev = std::mem::replace(&mut lam, next);
        t = tn;
        if it % 1000 == 999 {
            let vn = primal(&lam);
            let moved = vn.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = vn;
            if moved < 1e-13 {
                break;
            }
        }
    }
    primal(&lam)
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Matrix-tree count computed with a floating-point determinant.
pub fn float_tree_count(g: &arbor_admm::UndirectedGraph) -> f64 {
    let n = g.node_count();
    let mut lap = nalgebra::DMatrix::<f64>::zeros(n - 1, n - 1);
    for &(u, v) in g.edges() {
        for (a, b) in [(u, v), (v, u)] {
            if a > 0 {
                lap[(a - 1, a - 1)] += 1.0;
                if b > 0 {
                    lap[(a - 1, b - 1)] -= 1.0;
                }
            }
        }
    }
    lap.determinant().round()
}
