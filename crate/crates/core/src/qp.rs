//! Diagonal-Hessian quadratic programs.
//!
//! ```text
//!   minimize   ½ vᵀ diag(d) v + qᵀ v
//!   subject to A_eq v = b_eq,  A_in v ≤ b_in,  lo ≤ v ≤ hi
//! ```
//!
//! Solved by an operator-splitting iteration on the stacked constraint
//! `l ≤ A v ≤ u` (equalities, inequalities, then one identity row per
//! variable for the box): a regularised linear solve on the smooth part,
//! projection onto `[l, u]`, and a scaled dual update, with over-relaxation
//! and an adaptive penalty. Constraint rows are normalised to unit ∞-norm
//! before iterating. Once the residuals are small the active set is guessed
//! from the duals and the reduced KKT system is solved directly ("polish");
//! the polished point is kept only if it passes the full KKT check.
//!
//! Reported residuals are always measured on the unscaled problem.

use std::fmt::Write as _;

use log::trace;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Sparse row lists of `(column, coefficient)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: Vec<(usize, f64)>) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn dot(&self, r: usize, v: &[f64]) -> f64 {
        self.rows[r].iter().map(|&(c, a)| a * v[c]).sum()
    }

    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows.len()).map(|r| self.dot(r, v)).collect()
    }

    /// `out += Aᵀ y`.
    pub fn add_transpose_mul(&self, y: &[f64], out: &mut [f64]) {
        for (row, &yr) in self.rows.iter().zip(y) {
            if yr != 0.0 {
                for &(c, a) in row {
                    out[c] += a * yr;
                }
            }
        }
    }
}

impl From<Vec<Vec<(usize, f64)>>> for SparseRows {
    fn from(rows: Vec<Vec<(usize, f64)>>) -> Self {
        Self { rows }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub diag: Vec<f64>,
    pub linear: Vec<f64>,
    pub eq: SparseRows,
    pub eq_rhs: Vec<f64>,
    pub ineq: SparseRows,
    pub ineq_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QuadraticProgram {
    /// Box-constrained program with no linear rows.
    pub fn boxed(diag: Vec<f64>, linear: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            diag,
            linear,
            eq: SparseRows::new(),
            eq_rhs: Vec::new(),
            ineq: SparseRows::new(),
            ineq_rhs: Vec::new(),
            lower,
            upper,
        }
    }

    pub fn dimension(&self) -> usize {
        self.diag.len()
    }

    pub fn objective(&self, v: &[f64]) -> f64 {
        v.iter()
            .zip(&self.diag)
            .zip(&self.linear)
            .map(|((x, d), q)| 0.5 * d * x * x + q * x)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.diag.len();
        for (name, len) in [
            ("linear", self.linear.len()),
            ("lower", self.lower.len()),
            ("upper", self.upper.len()),
        ] {
            if len != n {
                return Err(Error::QpFailed(format!(
                    "{name} has length {len}, expected {n}"
                )));
            }
        }
        if self.eq.len() != self.eq_rhs.len() || self.ineq.len() != self.ineq_rhs.len() {
            return Err(Error::QpFailed("constraint rows and rhs differ in length".into()));
        }
        if self.diag.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::QpFailed("diagonal must be finite and nonnegative".into()));
        }
        if self.linear.iter().any(|q| !q.is_finite()) {
            return Err(Error::QpFailed("linear cost must be finite".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u) {
            return Err(Error::QpFailed("box has lo > hi".into()));
        }
        for rows in [&self.eq, &self.ineq] {
            if rows.rows().iter().flatten().any(|&(c, a)| c >= n || !a.is_finite()) {
                return Err(Error::QpFailed("constraint entry out of range".into()));
            }
        }
        Ok(())
    }

    /// Equality residual, inequality/box violation, each as an ∞-norm.
    pub fn feasibility(&self, v: &[f64]) -> (f64, f64) {
        let eq = (0..self.eq.len())
            .map(|r| (self.eq.dot(r, v) - self.eq_rhs[r]).abs())
            .fold(0.0, f64::max);
        let ineq = (0..self.ineq.len())
            .map(|r| (self.ineq.dot(r, v) - self.ineq_rhs[r]).max(0.0))
            .chain(
                v.iter()
                    .zip(self.lower.iter().zip(&self.upper))
                    .map(|(x, (l, u))| (l - x).max(x - u).max(0.0)),
            )
            .fold(0.0, f64::max);
        (eq, ineq)
    }

    /// Plain-text matrix listing, one section per block.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let n = self.dimension();
        let _ = writeln!(s, "variables {n}");
        let _ = writeln!(s, "# j diag linear lower upper");
        for j in 0..n {
            let _ = writeln!(
                s,
                "var {j} {} {} {} {}",
                self.diag[j], self.linear[j], self.lower[j], self.upper[j]
            );
        }
        let dump_rows = |s: &mut String, tag: &str, rows: &SparseRows, rhs: &[f64], rel: &str| {
            let _ = writeln!(s, "{tag}s {}", rows.len());
            for (r, row) in rows.rows().iter().enumerate() {
                let terms: Vec<String> = row.iter().map(|(c, a)| format!("{a}*v{c}")).collect();
                let _ = writeln!(s, "{tag} {r}: {} {rel} {}", terms.join(" + "), rhs[r]);
            }
        };
        dump_rows(&mut s, "eq", &self.eq, &self.eq_rhs, "=");
        dump_rows(&mut s, "ineq", &self.ineq, &self.ineq_rhs, "<=");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIters,
    InfeasibleDetected,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Solved => "solved",
            QpStatus::MaxIters => "max-iters",
            QpStatus::InfeasibleDetected => "infeasible-detected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub v: Vec<f64>,
    /// Multipliers of the equality rows.
    pub y_eq: Vec<f64>,
    /// Multipliers of the inequality rows (nonnegative).
    pub y_ineq: Vec<f64>,
    /// Multipliers of the box (negative at the lower bound, positive at the upper).
    pub y_box: Vec<f64>,
    pub eq_residual: f64,
    pub ineq_violation: f64,
    pub stationarity: f64,
    pub iterations: usize,
    pub status: QpStatus,
    pub polished: bool,
    pub rho: f64,
}

impl QpSolution {
    pub fn max_residual(&self) -> f64 {
        self.eq_residual.max(self.ineq_violation).max(self.stationarity)
    }

    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            v: self.v.clone(),
            y_eq: self.y_eq.clone(),
            y_ineq: self.y_ineq.clone(),
            y_box: self.y_box.clone(),
            rho: self.rho,
        }
    }
}

/// Primal/dual starting point carried between related solves.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub v: Vec<f64>,
    pub y_eq: Vec<f64>,
    pub y_ineq: Vec<f64>,
    pub y_box: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub sigma: f64,
    pub relaxation: f64,
    pub rho: f64,
    /// Equality rows use `rho * eq_rho_scale`.
    pub eq_rho_scale: f64,
    pub check_every: usize,
    pub adapt_rho: bool,
    /// Iterations between penalty updates.
    pub adapt_every: usize,
    /// Penalty updates allowed per solve; later proposals are ignored.
    pub max_adaptations: usize,
    pub polish: bool,
    pub polish_below: f64,
    pub infeasibility_tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 20_000,
            sigma: 1e-6,
            relaxation: 1.6,
            rho: 0.1,
            eq_rho_scale: 1e3,
            check_every: 10,
            adapt_rho: true,
            adapt_every: 100,
            max_adaptations: 6,
            polish: true,
            polish_below: 1e-3,
            infeasibility_tol: 1e-7,
        }
    }
}

/// Solves `p` to absolute tolerance `tol` with default settings otherwise.
pub fn solve_qp(p: &QuadraticProgram, tol: f64, max_iters: usize) -> Result<QpSolution> {
    let settings = QpSettings {
        tol,
        max_iters,
        ..QpSettings::default()
    };
    solve_qp_with(p, &settings, None)
}

/// Stacked, row-normalised constraint system `l ≤ A v ≤ u`.
struct Stacked {
    rows: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    // scaled row = scale * original row
    scale: Vec<f64>,
    n_eq: usize,
    n_in: usize,
}

impl Stacked {
    fn new(p: &QuadraticProgram) -> Self {
        let n = p.dimension();
        let total = p.eq.len() + p.ineq.len() + n;
        let mut rows = Vec::with_capacity(total);
        let mut lower = Vec::with_capacity(total);
        let mut upper = Vec::with_capacity(total);
        let mut scale = Vec::with_capacity(total);
        let mut push_scaled = |row: &[(usize, f64)], lo: f64, hi: f64| {
            let norm = row.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
            let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
            rows.push(row.iter().map(|&(c, a)| (c, a * s)).collect());
            lower.push(lo * s);
            upper.push(hi * s);
            scale.push(s);
        };
        for (r, row) in p.eq.rows().iter().enumerate() {
            push_scaled(row, p.eq_rhs[r], p.eq_rhs[r]);
        }
        for (r, row) in p.ineq.rows().iter().enumerate() {
            push_scaled(row, f64::NEG_INFINITY, p.ineq_rhs[r]);
        }
        for j in 0..n {
            push_scaled(&[(j, 1.0)], p.lower[j], p.upper[j]);
        }
        Self {
            rows,
            lower,
            upper,
            scale,
            n_eq: p.eq.len(),
            n_in: p.ineq.len(),
        }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn is_equality(&self, r: usize) -> bool {
        self.lower[r] == self.upper[r]
    }

    fn dot(&self, r: usize, v: &[f64]) -> f64 {
        self.rows[r].iter().map(|&(c, a)| a * v[c]).sum()
    }

    fn mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|r| self.dot(r, v)).collect()
    }

    fn transpose_mul(&self, y: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (row, &yr) in self.rows.iter().zip(y) {
            if yr != 0.0 {
                for &(c, a) in row {
                    out[c] += a * yr;
                }
            }
        }
        out
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Residuals of a candidate `(v, y)` (scaled duals) on the unscaled problem.
struct Residuals {
    eq: f64,
    ineq: f64,
    stationarity: f64,
}

fn measure(p: &QuadraticProgram, st: &Stacked, v: &[f64], y: &[f64]) -> Residuals {
    let (eq, ineq) = p.feasibility(v);
    let mut grad: Vec<f64> = v
        .iter()
        .zip(&p.diag)
        .zip(&p.linear)
        .map(|((x, d), q)| d * x + q)
        .collect();
    for (row, &yr) in st.rows.iter().zip(y) {
        for &(c, a) in row {
            grad[c] += a * yr;
        }
    }
    Residuals {
        eq,
        ineq,
        stationarity: inf_norm(&grad),
    }
}

fn factor(p: &QuadraticProgram, st: &Stacked, sigma: f64, rho_rows: &[f64]) -> Result<Cholesky<f64, Dyn>> {
    let n = p.dimension();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = p.diag[j] + sigma;
    }
    for (row, &rho) in st.rows.iter().zip(rho_rows) {
        for &(a, va) in row {
            for &(b, vb) in row {
                m[(a, b)] += rho * va * vb;
            }
        }
    }
    Cholesky::new(m).ok_or_else(|| Error::QpFailed("splitting matrix is not positive definite".into()))
}

fn row_rhos(st: &Stacked, rho: f64, eq_scale: f64) -> Vec<f64> {
    (0..st.len())
        .map(|r| if st.is_equality(r) { rho * eq_scale } else { rho })
        .collect()
}

/// Solves the reduced KKT system on the active set guessed from `(z, y)`.
/// Inequality rows whose multiplier comes out with the wrong sign are
/// released and the system re-solved, a few times at most (degenerate
/// vertices can carry more active rows than variables). Returns `(v, y)` in
/// scaled dual coordinates, or `None` if no guess passes the KKT check.
fn polish(
    p: &QuadraticProgram,
    st: &Stacked,
    z: &[f64],
    y: &[f64],
    tol: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    // active rows with their target value and side (-1 lower, +1 upper, 0 equality)
    let mut active: Vec<(usize, f64, i8)> = Vec::new();
    for r in 0..st.len() {
        if st.is_equality(r) {
            active.push((r, st.lower[r], 0));
        } else if z[r] - st.lower[r] < -y[r] {
            active.push((r, st.lower[r], -1));
        } else if st.upper[r] - z[r] < y[r] {
            active.push((r, st.upper[r], 1));
        }
    }
    for _ in 0..4 {
        match polish_on(p, st, &active, tol) {
            Ok(found) => return found,
            Err(wrong) => active.retain(|a| !wrong.contains(&a.0)),
        }
    }
    None
}

/// `Ok(Some)` on success, `Ok(None)` on a failed check, `Err(rows)` when the
/// listed rows have wrong-signed multipliers. Box-active variables are pinned
/// to their bound, so the KKT system only spans free variables and active
/// general rows; box multipliers are recovered from stationarity.
fn polish_on(
    p: &QuadraticProgram,
    st: &Stacked,
    active: &[(usize, f64, i8)],
    tol: f64,
) -> std::result::Result<Option<(Vec<f64>, Vec<f64>)>, Vec<usize>> {
    let n = p.dimension();
    let box0 = st.n_eq + st.n_in;
    let mut v: Vec<f64> = vec![0.0; n];
    let mut pinned = vec![false; n];
    let mut general: Vec<(usize, f64, i8)> = Vec::new();
    for &(r, target, side) in active {
        if r >= box0 {
            pinned[r - box0] = true;
            v[r - box0] = target / st.scale[r];
        } else {
            general.push((r, target, side));
        }
    }
    let free: Vec<usize> = (0..n).filter(|&j| !pinned[j]).collect();
    let mut pos = vec![usize::MAX; n];
    for (a, &j) in free.iter().enumerate() {
        pos[j] = a;
    }
    let nf = free.len();
    let k = general.len();
    let dim = nf + k;
    let delta = 1e-9;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (a, &j) in free.iter().enumerate() {
        kkt[(a, a)] = p.diag[j];
        rhs[a] = -p.linear[j];
    }
    for (i, &(r, target, _)) in general.iter().enumerate() {
        rhs[nf + i] = target;
        for &(c, a) in &st.rows[r] {
            if pinned[c] {
                rhs[nf + i] -= a * v[c];
            } else {
                kkt[(nf + i, pos[c])] += a;
                kkt[(pos[c], nf + i)] += a;
            }
        }
    }
    let mut reg = kkt.clone();
    for a in 0..nf {
        reg[(a, a)] += delta;
    }
    for i in 0..k {
        reg[(nf + i, nf + i)] -= delta;
    }
    let mut sol = DVector::<f64>::zeros(dim);
    if dim > 0 {
        let lu = reg.lu();
        let Some(first) = lu.solve(&rhs) else {
            return Ok(None);
        };
        sol = first;
        for _ in 0..25 {
            let resid = &rhs - &kkt * &sol;
            if resid.amax() < 1e-14 {
                break;
            }
            let Some(step) = lu.solve(&resid) else {
                return Ok(None);
            };
            sol += step;
        }
    }
    if sol.iter().any(|x| !x.is_finite()) {
        return Ok(None);
    }
    for (a, &j) in free.iter().enumerate() {
        v[j] = sol[a].clamp(p.lower[j], p.upper[j]);
    }

    let mut y_new = vec![0.0; st.len()];
    let mut grad: Vec<f64> = (0..n).map(|j| p.diag[j] * v[j] + p.linear[j]).collect();
    for (i, &(r, _, _)) in general.iter().enumerate() {
        y_new[r] = sol[nf + i];
        for &(c, a) in &st.rows[r] {
            grad[c] += a * y_new[r];
        }
    }
    for &(r, _, _) in active.iter().filter(|a| a.0 >= box0) {
        let j = r - box0;
        y_new[r] = -grad[j] / st.rows[r][0].1;
    }
    let wrong: Vec<usize> = active
        .iter()
        .filter(|&&(r, _, side)| (side < 0 && y_new[r] > tol) || (side > 0 && y_new[r] < -tol))
        .map(|&(r, _, _)| r)
        .collect();
    if !wrong.is_empty() {
        return Err(wrong);
    }
    for &(r, _, side) in active {
        y_new[r] = match side {
            -1 => y_new[r].min(0.0),
            1 => y_new[r].max(0.0),
            _ => y_new[r],
        };
    }
    let res = measure(p, st, &v, &y_new);
    Ok((res.eq <= tol && res.ineq <= tol && res.stationarity <= tol).then_some((v, y_new)))
}

/// Full solver entry point with explicit settings and optional warm start.
pub fn solve_qp_with(
    p: &QuadraticProgram,
    settings: &QpSettings,
    warm: Option<&WarmStart>,
) -> Result<QpSolution> {
    p.validate()?;
    let n = p.dimension();
    let st = Stacked::new(p);
    let nr = st.len();
    let tol = settings.tol;

    let mut x: Vec<f64> = match warm {
        Some(w) if w.v.len() == n => w.v.clone(),
        _ => (0..n).map(|j| 0.0f64.clamp(p.lower[j], p.upper[j])).collect(),
    };
    let mut y = vec![0.0; nr];
    let mut rho = settings.rho;
    if let Some(w) = warm {
        if w.y_eq.len() == st.n_eq && w.y_ineq.len() == st.n_in && w.y_box.len() == n {
            let unscaled = w.y_eq.iter().chain(&w.y_ineq).chain(&w.y_box);
            for (r, &yr) in unscaled.enumerate() {
                y[r] = yr / st.scale[r];
            }
        }
        if w.rho.is_finite() && w.rho > 0.0 {
            rho = w.rho;
        }
    }
    let mut z: Vec<f64> = st
        .mul(&x)
        .iter()
        .enumerate()
        .map(|(r, &ax)| ax.clamp(st.lower[r], st.upper[r]))
        .collect();

    let mut rho_rows = row_rhos(&st, rho, settings.eq_rho_scale);
    let mut chol = factor(p, &st, settings.sigma, &rho_rows)?;
    let alpha = settings.relaxation;
    let mut best_polish_at = f64::INFINITY;
    let mut adaptations = 0;

    let finish = |x: Vec<f64>, y: Vec<f64>, iterations: usize, status: QpStatus, polished: bool, rho: f64| {
        let res = measure(p, &st, &x, &y);
        let unscale = |r: usize| y[r] * st.scale[r];
        QpSolution {
            y_eq: (0..st.n_eq).map(unscale).collect(),
            y_ineq: (st.n_eq..st.n_eq + st.n_in).map(unscale).collect(),
            y_box: (st.n_eq + st.n_in..nr).map(unscale).collect(),
            v: x,
            eq_residual: res.eq,
            ineq_violation: res.ineq,
            stationarity: res.stationarity,
            iterations,
            status,
            polished,
            rho,
        }
    };

    for iter in 1..=settings.max_iters {
        // linear step
        let mut rhs: Vec<f64> = (0..n).map(|j| settings.sigma * x[j] - p.linear[j]).collect();
        let shifted: Vec<f64> = (0..nr).map(|r| rho_rows[r] * z[r] - y[r]).collect();
        for (row, &s) in st.rows.iter().zip(&shifted) {
            for &(c, a) in row {
                rhs[c] += a * s;
            }
        }
        let mut xt = DVector::from_vec(rhs);
        chol.solve_mut(&mut xt);
        let zt = st.mul(xt.as_slice());

        let y_prev = y.clone();
        for j in 0..n {
            x[j] = alpha * xt[j] + (1.0 - alpha) * x[j];
        }
        for r in 0..nr {
            let zh = alpha * zt[r] + (1.0 - alpha) * z[r];
            let zn = (zh + y[r] / rho_rows[r]).clamp(st.lower[r], st.upper[r]);
            y[r] += rho_rows[r] * (zh - zn);
            z[r] = zn;
        }

        if iter % settings.check_every != 0 && iter != settings.max_iters {
            continue;
        }

        let xc: Vec<f64> = (0..n).map(|j| x[j].clamp(p.lower[j], p.upper[j])).collect();
        let res = measure(p, &st, &xc, &y);
        let worst = res.eq.max(res.ineq).max(res.stationarity);
        trace!("qp iter {iter}: eq {:.2e} ineq {:.2e} stat {:.2e} rho {rho:.2e}", res.eq, res.ineq, res.stationarity);
        if worst <= tol {
            if settings.polish {
                if let Some((xp, yp)) = polish(p, &st, &z, &y, tol) {
                    return Ok(finish(xp, yp, iter, QpStatus::Solved, true, rho));
                }
            }
            return Ok(finish(xc, y, iter, QpStatus::Solved, false, rho));
        }

        if settings.polish && worst <= settings.polish_below && worst < 0.1 * best_polish_at {
            best_polish_at = worst;
            if let Some((xp, yp)) = polish(p, &st, &z, &y, tol) {
                return Ok(finish(xp, yp, iter, QpStatus::Solved, true, rho));
            }
        }

        // primal infeasibility certificate on the dual increment
        let dy: Vec<f64> = y.iter().zip(&y_prev).map(|(a, b)| a - b).collect();
        let dy_norm = inf_norm(&dy);
        if dy_norm > 0.0 {
            let at_dy = st.transpose_mul(&dy, n);
            let eps = settings.infeasibility_tol;
            let mut support = 0.0;
            let mut bounded = true;
            for r in 0..nr {
                if dy[r] > 0.0 {
                    if st.upper[r].is_finite() {
                        support += st.upper[r] * dy[r];
                    } else {
                        bounded = false;
                    }
                } else if dy[r] < 0.0 {
                    if st.lower[r].is_finite() {
                        support += st.lower[r] * dy[r];
                    } else {
                        bounded = false;
                    }
                }
            }
            if bounded && inf_norm(&at_dy) <= eps * dy_norm && support <= -eps * dy_norm {
                return Ok(finish(xc, y, iter, QpStatus::InfeasibleDetected, false, rho));
            }
        }

        if settings.adapt_rho && adaptations < settings.max_adaptations && iter % settings.adapt_every == 0 {
            let ax = st.mul(&x);
            let prim: f64 = (0..nr).fold(0.0, |acc, r| acc.max((ax[r] - z[r]).abs()));
            let mut dual_vec: Vec<f64> = (0..n).map(|j| p.diag[j] * x[j] + p.linear[j]).collect();
            let aty = st.transpose_mul(&y, n);
            for j in 0..n {
                dual_vec[j] += aty[j];
            }
            let dual = inf_norm(&dual_vec);
            let prim_scale = inf_norm(&ax).max(inf_norm(&z)).max(1e-12);
            let px: Vec<f64> = (0..n).map(|j| p.diag[j] * x[j]).collect();
            let dual_scale = inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&p.linear)).max(1e-12);
            if prim > 0.0 && dual > 0.0 {
                let proposal = (rho * ((prim / prim_scale) / (dual / dual_scale)).sqrt()).clamp(1e-6, 1e6);
                if proposal > 5.0 * rho || proposal < 0.2 * rho {
                    rho = proposal;
                    adaptations += 1;
                    rho_rows = row_rhos(&st, rho, settings.eq_rho_scale);
                    chol = factor(p, &st, settings.sigma, &rho_rows)?;
                }
            }
        }
    }

    let xc: Vec<f64> = (0..n).map(|j| x[j].clamp(p.lower[j], p.upper[j])).collect();
    if settings.polish {
        if let Some((xp, yp)) = polish(p, &st, &z, &y, tol) {
            return Ok(finish(xp, yp, settings.max_iters, QpStatus::Solved, true, rho));
        }
    }
    Ok(finish(xc, y, settings.max_iters, QpStatus::MaxIters, false, rho))
}
