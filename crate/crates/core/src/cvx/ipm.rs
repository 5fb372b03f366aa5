//! Primal-dual interior-point method, Mehrotra predictor-corrector.
//!
//! Every inequality `c_i(x) <= 0` (linear rows, quadratic rows and finite
//! bounds) gets a slack `s_i > 0` with `c_i(x) + s_i = 0` and a multiplier
//! `z_i > 0`. Equalities, including variables whose bounds coincide, carry a
//! free multiplier `y`. Each Newton step solves the reduced system
//!
//! ```text
//! [ H + Σ (z_i/s_i) ∇c_i ∇c_iᵀ   Aᵀ ] [dx]   [ -r_d + Σ ∇c_i (r_sz,i - z_i r_c,i)/s_i ]
//! [ A                            0  ] [dy] = [ -r_p                                   ]
//! ```
//!
//! with `H = Q + Σ_k z_k P_k`, then recovers `ds = -r_c - ∇c dx` and
//! `dz = (-r_sz - z ds) / s`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::kkt::KktFactor;
use super::{ConvexProgram, KktSolution, SolveStatus};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target for feasibility and complementarity; stationarity is measured relative to the gradient size.
    pub tol: f64,
    /// Residual accepted as optimal once progress stalls above `tol`.
    pub acceptable: f64,
    pub max_iter: usize,
    /// Static regularisation of the reduced KKT matrix.
    pub reg: f64,
    pub refine_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            acceptable: 1e-8,
            max_iter: 100,
            reg: 1e-10,
            refine_steps: 3,
        }
    }
}

type Sparse = Vec<(usize, f64)>;

enum Row {
    Lin { grad: Sparse, h: f64 },
    Quad { k: usize, trip: Vec<(usize, usize, f64)>, pattern: Vec<usize> },
    Lower(usize, f64),
    Upper(usize, f64),
}

struct Setup<'a> {
    p: &'a ConvexProgram,
    q_trip: Vec<(usize, usize, f64)>,
    eq: Vec<(Sparse, f64)>,
    /// Variable index of each equality row appended for a fixed variable.
    fixed: Vec<usize>,
    rows: Vec<Row>,
}

fn sparse_row(m: &nalgebra::DMatrix<f64>, r: usize) -> Sparse {
    (0..m.ncols()).filter(|&j| m[(r, j)] != 0.0).map(|j| (j, m[(r, j)])).collect()
}

fn triplets(m: &nalgebra::DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                out.push((i, j, m[(i, j)]));
            }
        }
    }
    out
}

impl<'a> Setup<'a> {
    fn new(p: &'a ConvexProgram) -> Self {
        let mut eq: Vec<(Sparse, f64)> = (0..p.a.nrows()).map(|r| (sparse_row(&p.a, r), p.b[r])).collect();
        let mut fixed = Vec::new();
        let mut rows: Vec<Row> = (0..p.g.nrows())
            .map(|r| Row::Lin { grad: sparse_row(&p.g, r), h: p.h[r] })
            .collect();
        for (k, qc) in p.qineq.iter().enumerate() {
            let trip = triplets(&qc.p);
            let mut pattern: Vec<usize> = trip.iter().map(|t| t.0).collect();
            pattern.extend((0..p.n).filter(|&j| qc.q[j] != 0.0));
            pattern.sort_unstable();
            pattern.dedup();
            rows.push(Row::Quad { k, trip, pattern });
        }
        for j in 0..p.n {
            let (l, u) = (p.lower[j], p.upper[j]);
            if l == u {
                eq.push((vec![(j, 1.0)], l));
                fixed.push(j);
                continue;
            }
            if l.is_finite() {
                rows.push(Row::Lower(j, l));
            }
            if u.is_finite() {
                rows.push(Row::Upper(j, u));
            }
        }
        Setup {
            p,
            q_trip: triplets(&p.q),
            eq,
            fixed,
            rows,
        }
    }

    /// Constraint values and sparse gradients at `x`.
    fn eval(&self, x: &[f64], vals: &mut [f64], grads: &mut [Sparse], scratch: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let g = &mut grads[i];
            g.clear();
            match row {
                Row::Lin { grad, h } => {
                    vals[i] = grad.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - h;
                    g.extend_from_slice(grad);
                }
                Row::Quad { k, trip, pattern } => {
                    let qc = &self.p.qineq[*k];
                    for &j in pattern {
                        scratch[j] = qc.q[j];
                    }
                    for &(a, b, v) in trip {
                        scratch[a] += v * x[b];
                    }
                    let mut val = qc.r;
                    for &j in pattern {
                        // ½xᵀPx + qᵀx = ½xᵀ(∇c + q)
                        val += 0.5 * x[j] * (scratch[j] + qc.q[j]);
                        g.push((j, scratch[j]));
                        scratch[j] = 0.0;
                    }
                    vals[i] = val;
                }
                Row::Lower(j, l) => {
                    vals[i] = l - x[*j];
                    g.push((*j, -1.0));
                }
                Row::Upper(j, u) => {
                    vals[i] = x[*j] - u;
                    g.push((*j, 1.0));
                }
            }
        }
    }
}

fn initial_point(p: &ConvexProgram) -> Vec<f64> {
    (0..p.n)
        .map(|j| {
            let (l, u) = (p.lower[j], p.upper[j]);
            match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l + 1.0,
                (false, true) => u - 1.0,
                (false, false) => 0.0,
            }
        })
        .collect()
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut a = 1.0f64;
    for (x, d) in v.iter().zip(dv) {
        if *d < 0.0 {
            a = a.min(-x / d);
        }
    }
    a
}

fn mu_of(s: &[f64], z: &[f64]) -> f64 {
    if s.is_empty() { 0.0 } else { s.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / s.len() as f64 }
}

fn blocking_row(s: &[f64], ds: &[f64], z: &[f64], dz: &[f64]) -> Option<(usize, bool)> {
    let mut best = (1.0, None);
    for i in 0..s.len() {
        if ds[i] < 0.0 && -s[i] / ds[i] < best.0 {
            best = (-s[i] / ds[i], Some((i, true)));
        }
        if dz[i] < 0.0 && -z[i] / dz[i] < best.0 {
            best = (-z[i] / dz[i], Some((i, false)));
        }
    }
    best.1
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Largest absolute KKT residual of `(x, y, z)`, unscaled.
fn abs_residual(st: &Setup, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    let n = st.p.n;
    let m = st.rows.len();
    let mut vals = vec![0.0; m];
    let mut grads: Vec<Sparse> = (0..m).map(|_| Vec::new()).collect();
    let mut scratch = vec![0.0; n];
    st.eval(x, &mut vals, &mut grads, &mut scratch);
    let mut rd: Vec<f64> = st.p.c.iter().copied().collect();
    for &(a, b, v) in &st.q_trip {
        rd[a] += v * x[b];
    }
    let mut res = 0.0f64;
    for (r, (row, rhs)) in st.eq.iter().enumerate() {
        let mut ax = -rhs;
        for &(j, v) in row {
            rd[j] += y[r] * v;
            ax += v * x[j];
        }
        res = res.max(ax.abs());
    }
    for i in 0..m {
        for &(j, v) in &grads[i] {
            rd[j] += z[i] * v;
        }
        res = res.max(vals[i]).max((vals[i] * z[i]).abs()).max(-z[i]);
    }
    res.max(inf_norm(&rd))
}

/// Newton on the KKT equations of the active set read off the interior
/// iterate (rows with `z > s`). Interior-point iterates stall a few digits
/// short of machine precision because `z/s` spreads over many orders of
/// magnitude; the reduced system has no such spread. Rows that come back
/// with a negative multiplier are dropped one at a time, most negative
/// first, and the solve repeated. Returns
/// `None` unless the result has nonnegative multipliers and a smaller
/// residual.
fn polish(st: &Setup, x0: &[f64], y0: &[f64], s0: &[f64], z0: &[f64]) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    let before = abs_residual(st, x0, y0, z0);
    let mut active: Vec<usize> = (0..st.rows.len()).filter(|&i| z0[i] > s0[i]).collect();
    for _ in 0..5 {
        let (x, y, z) = polish_on(st, &active, x0, y0, z0)?;
        let worst = active.iter().copied().filter(|&i| z[i] < 0.0).min_by(|&a, &b| z[a].total_cmp(&z[b]));
        match worst {
            None => {
                let after = abs_residual(st, &x, &y, &z);
                return (after < before).then_some((x, y, z, after));
            }
            Some(w) => active.retain(|&i| i != w),
        }
    }
    None
}

fn polish_on(st: &Setup, active: &[usize], x0: &[f64], y0: &[f64], z0: &[f64]) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    // keeps the matrix nonsingular when active gradients are dependent or a
    // variable has no curvature; the Newton iterations remove its effect on
    // consistent systems
    const DELTA: f64 = 1e-11;
    let p = st.p;
    let n = p.n;
    let me = st.eq.len();
    let m = st.rows.len();
    let dim = n + me + active.len();
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut z = vec![0.0; m];
    for &i in active {
        z[i] = z0[i];
    }
    let mut vals = vec![0.0; m];
    let mut grads: Vec<Sparse> = (0..m).map(|_| Vec::new()).collect();
    let mut scratch = vec![0.0; n];
    for _ in 0..8 {
        st.eval(&x, &mut vals, &mut grads, &mut scratch);
        let mut jac = DMatrix::zeros(dim, dim);
        let mut f = DVector::zeros(dim);
        for i in 0..n {
            f[i] = p.c[i];
            jac[(i, i)] = DELTA;
        }
        for &(a, b, v) in &st.q_trip {
            jac[(a, b)] += v;
            f[a] += v * x[b];
        }
        for (r, (row, rhs)) in st.eq.iter().enumerate() {
            f[n + r] = -rhs;
            jac[(n + r, n + r)] = -DELTA;
            for &(j, v) in row {
                jac[(j, n + r)] += v;
                jac[(n + r, j)] += v;
                f[j] += y[r] * v;
                f[n + r] += v * x[j];
            }
        }
        for (k, &i) in active.iter().enumerate() {
            if let Row::Quad { trip, .. } = &st.rows[i] {
                for &(a, b, v) in trip {
                    jac[(a, b)] += z[i] * v;
                }
            }
            let c = n + me + k;
            f[c] = vals[i];
            jac[(c, c)] = -DELTA;
            for &(j, v) in &grads[i] {
                jac[(j, c)] += v;
                jac[(c, j)] += v;
                f[j] += z[i] * v;
            }
        }
        if f.amax() < 1e-14 {
            break;
        }
        let d = jac.lu().solve(&(-f))?;
        if !d.iter().all(|v| v.is_finite()) {
            return None;
        }
        for i in 0..n {
            x[i] += d[i];
        }
        for r in 0..me {
            y[r] += d[n + r];
        }
        for (k, &i) in active.iter().enumerate() {
            z[i] += d[n + me + k];
        }
    }
    Some((x, y, z))
}

pub fn solve(p: &ConvexProgram) -> Result<KktSolution> {
    solve_with(p, &SolverOptions::default())
}

/// Same engine restricted to linear programs; rejects quadratic terms.
pub fn solve_lp(p: &ConvexProgram) -> Result<KktSolution> {
    if !p.is_lp() {
        return Err(Error::InvalidArgument("solve_lp called on a program with quadratic terms".into()));
    }
    solve_with(p, &SolverOptions::default())
}

/// Progress of one interior-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterLog {
    pub iteration: usize,
    pub stationarity: f64,
    pub eq_infeasibility: f64,
    pub ineq_infeasibility: f64,
    pub complementarity: f64,
    /// Mean `s z`.
    pub mu: f64,
    /// Step length taken after this check, 0 if none.
    pub alpha: f64,
    /// Inequality row that limited the step, and whether its slack (rather
    /// than its multiplier) hit zero.
    pub blocking: Option<(usize, bool)>,
}

pub fn solve_with(p: &ConvexProgram, opts: &SolverOptions) -> Result<KktSolution> {
    run(p, opts, None)
}

/// [`solve_with`], also returning one record per iteration.
pub fn solve_logged(p: &ConvexProgram, opts: &SolverOptions) -> Result<(KktSolution, Vec<IterLog>)> {
    let mut log = Vec::new();
    let s = run(p, opts, Some(&mut log))?;
    Ok((s, log))
}

fn run(p: &ConvexProgram, opts: &SolverOptions, mut log: Option<&mut Vec<IterLog>>) -> Result<KktSolution> {
    p.check()?;
    let st = Setup::new(p);
    let n = p.n;
    let me = st.eq.len();
    let m = st.rows.len();
    let nk = n + me;

    let mut x = initial_point(p);
    let mut y = vec![0.0; me];
    let mut vals = vec![0.0; m];
    let mut grads: Vec<Sparse> = (0..m).map(|_| Vec::new()).collect();
    let mut scratch = vec![0.0; n];
    st.eval(&x, &mut vals, &mut grads, &mut scratch);
    let mut s: Vec<f64> = vals.iter().map(|c| (-c).max(1.0)).collect();
    let mut z = vec![1.0; m];

    let mut rd = vec![0.0; n];
    let mut rp = vec![0.0; me];
    let mut rc = vec![0.0; m];
    let mut kkt = DMatrix::zeros(nk, nk);
    let mut status = SolveStatus::IterationLimit;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    // (residual, iteration, x, y, s, z) of the best iterate so far
    let mut best: Option<(f64, usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = None;

    for it in 0..=opts.max_iter {
        iterations = it;
        st.eval(&x, &mut vals, &mut grads, &mut scratch);
        // residuals
        for i in 0..n {
            rd[i] = p.c[i];
        }
        for &(a, b, v) in &st.q_trip {
            rd[a] += v * x[b];
        }
        // stationarity is measured relative to the size of the objective gradient
        let grad_scale = 1.0 + inf_norm(&rd).max(p.c.amax());
        for (r, (row, rhs)) in st.eq.iter().enumerate() {
            let mut ax = -rhs;
            for &(j, v) in row {
                rd[j] += y[r] * v;
                ax += v * x[j];
            }
            rp[r] = ax;
        }
        for i in 0..m {
            for &(j, v) in &grads[i] {
                rd[j] += z[i] * v;
            }
            rc[i] = vals[i] + s[i];
        }
        let stat = inf_norm(&rd) / grad_scale;
        let feas_eq = inf_norm(&rp);
        let feas_in = vals.iter().fold(0.0f64, |a, &c| a.max(c));
        let comp = vals.iter().zip(&z).fold(0.0f64, |a, (c, zi)| a.max((c * zi).abs()));
        residual = stat.max(feas_eq).max(feas_in).max(comp);
        if let Some(l) = log.as_deref_mut() {
            l.push(IterLog {
                iteration: it,
                stationarity: stat,
                eq_infeasibility: feas_eq,
                ineq_infeasibility: feas_in,
                complementarity: comp,
                mu: mu_of(&s, &z),
                alpha: 0.0,
                blocking: None,
            });
        }
        if residual <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, it, x.clone(), y.clone(), s.clone(), z.clone()));
        }
        // stalled just above the target: further steps only lose accuracy
        if let Some(b) = &best {
            if b.0 <= opts.acceptable && (it >= b.1 + 5 || mu_of(&s, &z) < 1e-16) {
                break;
            }
        }
        if inf_norm(&x) > 1e10 {
            status = SolveStatus::Unbounded;
            break;
        }
        // Farkas-style test on the normalised multipliers
        let tau = inf_norm(&y).max(inf_norm(&z));
        if tau > 1e8 {
            let mut g = vec![0.0; n];
            let mut val = 0.0;
            for (r, (row, _)) in st.eq.iter().enumerate() {
                for &(j, v) in row {
                    g[j] += y[r] / tau * v;
                }
                val += y[r] / tau * rp[r];
            }
            for i in 0..m {
                for &(j, v) in &grads[i] {
                    g[j] += z[i] / tau * v;
                }
                val += z[i] / tau * vals[i];
            }
            let cert = inf_norm(&g);
            if cert < 1e-6 && val > 1e-6 {
                status = SolveStatus::Infeasible;
                residual = cert;
                break;
            }
        }
        if it == opts.max_iter {
            break;
        }

        // reduced KKT matrix
        kkt.fill(0.0);
        for &(a, b, v) in &st.q_trip {
            kkt[(a, b)] += v;
        }
        for (i, row) in st.rows.iter().enumerate() {
            if let Row::Quad { trip, .. } = row {
                for &(a, b, v) in trip {
                    kkt[(a, b)] += z[i] * v;
                }
            }
            let w = z[i] / s[i];
            for &(a, ga) in &grads[i] {
                for &(b, gb) in &grads[i] {
                    kkt[(a, b)] += w * ga * gb;
                }
            }
        }
        for (r, (row, _)) in st.eq.iter().enumerate() {
            for &(j, v) in row {
                kkt[(n + r, j)] += v;
                kkt[(j, n + r)] += v;
            }
        }

        let mu = mu_of(&s, &z);
        let factor = KktFactor::new(kkt.clone(), n, opts.reg);
        let newton = |rsz: &[f64]| -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
            let mut rhs = vec![0.0; nk];
            for i in 0..n {
                rhs[i] = -rd[i];
            }
            for i in 0..m {
                let f = (rsz[i] - z[i] * rc[i]) / s[i];
                for &(j, v) in &grads[i] {
                    rhs[j] += v * f;
                }
            }
            for r in 0..me {
                rhs[n + r] = -rp[r];
            }
            let sol = factor.solve(&rhs, opts.refine_steps)?;
            let mut ds = vec![0.0; m];
            let mut dz = vec![0.0; m];
            for i in 0..m {
                let gdx: f64 = grads[i].iter().map(|&(j, v)| v * sol[j]).sum();
                ds[i] = -rc[i] - gdx;
                dz[i] = (-rsz[i] - z[i] * ds[i]) / s[i];
            }
            Some((sol, ds, dz))
        };

        // predictor
        let rsz: Vec<f64> = s.iter().zip(&z).map(|(a, b)| a * b).collect();
        let Some((dxa, dsa, dza)) = newton(&rsz) else { break };
        let alpha_aff = max_step(&s, &dsa).min(max_step(&z, &dza));
        let sigma = if m > 0 {
            let mu_aff = (0..m)
                .map(|i| (s[i] + alpha_aff * dsa[i]) * (z[i] + alpha_aff * dza[i]))
                .sum::<f64>()
                / m as f64;
            (mu_aff / mu).powi(3).clamp(0.0, 1.0)
        } else {
            0.0
        };
        // corrector, falling back to a plain centring step when the
        // second-order term cuts the step short
        let step_len = |ds: &[f64], dz: &[f64]| max_step(&s, ds).min(max_step(&z, dz));
        let (dx, ds, dz) = if m > 0 {
            let rsz: Vec<f64> = (0..m).map(|i| s[i] * z[i] + dsa[i] * dza[i] - sigma * mu).collect();
            let Some(step) = newton(&rsz) else { break };
            if step_len(&step.1, &step.2) < 0.1 {
                let sc = sigma.max(0.5);
                let rsz: Vec<f64> = (0..m).map(|i| s[i] * z[i] - sc * mu).collect();
                match newton(&rsz) {
                    Some(alt) if step_len(&alt.1, &alt.2) > step_len(&step.1, &step.2) => alt,
                    _ => step,
                }
            } else {
                step
            }
        } else {
            (dxa, dsa, dza)
        };
        let alpha = (0.99 * step_len(&ds, &dz)).min(1.0);
        if let Some(last) = log.as_deref_mut().and_then(|l| l.last_mut()) {
            last.alpha = alpha;
            last.blocking = blocking_row(&s, &ds, &z, &dz);
        }
        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        for r in 0..me {
            y[r] += alpha * dx[n + r];
        }
        for i in 0..m {
            s[i] = (s[i] + alpha * ds[i]).max(1e-300);
            z[i] = (z[i] + alpha * dz[i]).max(1e-300);
        }
    }

    if status == SolveStatus::IterationLimit {
        if let Some((r, _, bx, by, bs, bz)) = best.take() {
            if r <= opts.acceptable {
                (x, y, s, z, residual) = (bx, by, bs, bz, r);
                status = SolveStatus::Optimal;
            }
        }
    }
    if status == SolveStatus::Optimal {
        if let Some((px, py, pz, r)) = polish(&st, &x, &y, &s, &z) {
            (x, y, z, residual) = (px, py, pz, r);
        }
    }

    // unpack multipliers
    let n_lin = p.g.nrows();
    let n_quad = p.qineq.len();
    let mut z_ineq = DVector::zeros(n_lin);
    let mut z_quad = DVector::zeros(n_quad);
    let mut z_lower = DVector::zeros(n);
    let mut z_upper = DVector::zeros(n);
    for (i, row) in st.rows.iter().enumerate() {
        match row {
            Row::Lin { .. } => z_ineq[i] = z[i],
            Row::Quad { k, .. } => z_quad[*k] = z[i],
            Row::Lower(j, _) => z_lower[*j] = z[i],
            Row::Upper(j, _) => z_upper[*j] = z[i],
        }
    }
    let me0 = p.a.nrows();
    for (f, &j) in st.fixed.iter().enumerate() {
        let v = y[me0 + f];
        z_upper[j] = v.max(0.0);
        z_lower[j] = (-v).max(0.0);
    }
    let xv = DVector::from_vec(x);
    Ok(KktSolution {
        objective: p.objective(&xv),
        x: xv,
        y: DVector::from_vec(y[..me0].to_vec()),
        z_ineq,
        z_quad,
        z_lower,
        z_upper,
        status,
        kkt_residual: residual,
        iterations,
    })
}
