//! Dense convex quadratic programming with convex quadratic inequalities.
//!
//! ```text
//! minimize    ½ xᵀQx + cᵀx
//! subject to  A x  = b
//!             G x <= h
//!             ½ xᵀP_k x + q_kᵀx + r_k <= 0      for every k
//!             lower <= x <= upper               (infinite entries allowed)
//! ```
//!
//! Solved by a primal-dual interior-point method with Mehrotra
//! predictor-corrector steps (see [`solve`]). Problem sizes in this crate
//! are a few hundred variables at most, so everything is dense.

mod ipm;
mod kkt;
mod verify;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use nalgebra::{DMatrix, DVector};

pub use ipm::{solve, solve_logged, solve_lp, solve_with, IterLog, SolverOptions};
pub use verify::{verify_kkt, KktReport};

use crate::{Error, Result};

/// `½ xᵀ P x + qᵀ x + r <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadConstraint {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub r: f64,
}

impl QuadConstraint {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x) + self.r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub n: usize,
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub qineq: Vec<QuadConstraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Optional variable names, used only by [`ConvexProgram::listing`].
    pub names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub x: DVector<f64>,
    /// Multipliers of `A x = b`.
    pub y: DVector<f64>,
    /// Multipliers of `G x <= h`.
    pub z_ineq: DVector<f64>,
    /// Multipliers of the quadratic inequalities.
    pub z_quad: DVector<f64>,
    pub z_lower: DVector<f64>,
    pub z_upper: DVector<f64>,
    pub status: SolveStatus,
    /// Largest of the stationarity, feasibility and complementarity norms.
    pub kkt_residual: f64,
    pub objective: f64,
    pub iterations: usize,
}

impl KktSolution {
    /// Turns any non-optimal status into an error carrying `context`.
    pub fn into_optimal(self, context: impl Into<String>) -> Result<KktSolution> {
        if self.status == SolveStatus::Optimal {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: self.status,
                residual: self.kkt_residual,
                context: context.into(),
            })
        }
    }
}

impl ConvexProgram {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    pub fn is_lp(&self) -> bool {
        self.qineq.is_empty() && self.q.iter().all(|&v| v == 0.0)
    }

    /// Checks dimensions, symmetry and positive semidefiniteness.
    pub fn check(&self) -> Result<()> {
        let n = self.n;
        let dims_ok = self.q.shape() == (n, n)
            && self.c.len() == n
            && self.a.ncols() == n
            && self.a.nrows() == self.b.len()
            && self.g.ncols() == n
            && self.g.nrows() == self.h.len()
            && self.lower.len() == n
            && self.upper.len() == n
            && self
                .qineq
                .iter()
                .all(|k| k.p.shape() == (n, n) && k.q.len() == n);
        if !dims_ok {
            return Err(Error::InvalidArgument("inconsistent program dimensions".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(Error::InvalidArgument("variable with lower > upper".into()));
        }
        if !is_psd(&self.q, 1e-10) {
            return Err(Error::InvalidArgument("objective matrix is not symmetric PSD".into()));
        }
        for (k, quad) in self.qineq.iter().enumerate() {
            if !is_psd(&quad.p, 1e-10) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "quadratic constraint {k} is not convex"
                )));
            }
        }
        Ok(())
    }

    fn name(&self, i: usize) -> String {
        match self.names.get(i) {
            Some(s) if !s.is_empty() => s.clone(),
            _ => alloc::format!("x{i}"),
        }
    }

    /// Plain-text listing in an LP-file-like layout:
    ///
    /// ```text
    /// minimize
    ///   obj: <linear terms> + [ <quadratic terms> ] / 2
    /// subject to
    ///   e0: <terms> = <rhs>
    ///   g0: <terms> <= <rhs>
    ///   q0: <terms> + [ <quadratic terms> ] / 2 <= <rhs>
    /// bounds
    ///   <lo> <= name <= <hi>
    /// end
    /// ```
    pub fn listing(&self) -> String {
        let mut out = String::new();
        let lin = |out: &mut String, coefs: &mut dyn Iterator<Item = (usize, f64)>| {
            let mut any = false;
            for (j, v) in coefs {
                if v != 0.0 {
                    let _ = write!(out, " {} {} {}", if v < 0.0 { "-" } else { "+" }, v.abs(), self.name(j));
                    any = true;
                }
            }
            if !any {
                out.push_str(" 0");
            }
        };
        let quad = |out: &mut String, m: &DMatrix<f64>| {
            let mut terms = String::new();
            for i in 0..self.n {
                for j in i..self.n {
                    let v = if i == j { m[(i, i)] } else { m[(i, j)] + m[(j, i)] };
                    if v != 0.0 {
                        let sign = if v < 0.0 { "-" } else { "+" };
                        if i == j {
                            let _ = write!(terms, " {sign} {} {} ^ 2", v.abs(), self.name(i));
                        } else {
                            let _ = write!(terms, " {sign} {} {} * {}", v.abs(), self.name(i), self.name(j));
                        }
                    }
                }
            }
            if !terms.is_empty() {
                let _ = write!(out, " + [{terms} ] / 2");
            }
        };
        out.push_str("minimize\n  obj:");
        lin(&mut out, &mut self.c.iter().copied().enumerate());
        quad(&mut out, &self.q);
        out.push_str("\nsubject to\n");
        for r in 0..self.a.nrows() {
            let _ = write!(out, "  e{r}:");
            lin(&mut out, &mut (0..self.n).map(|j| (j, self.a[(r, j)])));
            let _ = writeln!(out, " = {}", self.b[r]);
        }
        for r in 0..self.g.nrows() {
            let _ = write!(out, "  g{r}:");
            lin(&mut out, &mut (0..self.n).map(|j| (j, self.g[(r, j)])));
            let _ = writeln!(out, " <= {}", self.h[r]);
        }
        for (k, qc) in self.qineq.iter().enumerate() {
            let _ = write!(out, "  q{k}:");
            lin(&mut out, &mut qc.q.iter().copied().enumerate());
            quad(&mut out, &qc.p);
            let _ = writeln!(out, " <= {}", -qc.r);
        }
        out.push_str("bounds\n");
        for j in 0..self.n {
            let (l, u) = (self.lower[j], self.upper[j]);
            let name = self.name(j);
            let _ = match (l.is_finite(), u.is_finite()) {
                (false, false) => writeln!(out, "  {name} free"),
                (true, false) => writeln!(out, "  {name} >= {l}"),
                (false, true) => writeln!(out, "  {name} <= {u}"),
                (true, true) if l == u => writeln!(out, "  {name} = {l}"),
                (true, true) => writeln!(out, "  {l} <= {name} <= {u}"),
            };
        }
        out.push_str("end\n");
        out
    }
}

/// Symmetric positive-semidefinite test by Cholesky with diagonal pivoting.
pub fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    let n = m.nrows();
    if m.ncols() != n {
        return false;
    }
    let scale = m.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
    let eps = tol * scale;
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > eps {
                return false;
            }
        }
    }
    let mut a = m.clone();
    let mut remaining: Vec<usize> = (0..n).collect();
    while !remaining.is_empty() {
        let (pos, &p) = remaining
            .iter()
            .enumerate()
            .max_by(|x, y| a[(*x.1, *x.1)].total_cmp(&a[(*y.1, *y.1)]))
            .unwrap_or((0, &0));
        let d = a[(p, p)];
        if d <= eps {
            // what is left must vanish for a PSD matrix
            return remaining
                .iter()
                .all(|&i| remaining.iter().all(|&j| a[(i, j)].abs() <= eps.max(1e-300) * 10.0));
        }
        remaining.swap_remove(pos);
        for &i in &remaining {
            let f = a[(i, p)] / d;
            for &j in &remaining {
                a[(i, j)] -= f * a[(p, j)];
            }
        }
    }
    true
}

/// Incremental construction of a [`ConvexProgram`] from sparse rows.
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    lower: Vec<f64>,
    upper: Vec<f64>,
    names: Vec<String>,
    c: Vec<f64>,
    q: Vec<(usize, usize, f64)>,
    eq: Vec<(Vec<(usize, f64)>, f64)>,
    le: Vec<(Vec<(usize, f64)>, f64)>,
    quad: Vec<(Vec<(usize, usize, f64)>, Vec<(usize, f64)>, f64)>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n(&self) -> usize {
        self.lower.len()
    }

    pub fn var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(name.into());
        self.c.push(0.0);
        self.lower.len() - 1
    }

    pub fn free(&mut self, name: impl Into<String>) -> usize {
        self.var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_linear_cost(&mut self, i: usize, v: f64) {
        self.c[i] += v;
    }

    /// Adds `½ v x_i x_j` (and its mirror when `i != j`) to the objective.
    pub fn add_quad_cost(&mut self, i: usize, j: usize, v: f64) {
        self.q.push((i, j, v));
        if i != j {
            self.q.push((j, i, v));
        }
    }

    pub fn eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.eq.push((terms, rhs));
    }

    pub fn le(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.le.push((terms, rhs));
    }

    /// `½ Σ v x_i x_j + Σ a x + r <= 0`, quadratic terms given symmetric-complete.
    pub fn quad_le(&mut self, quad: Vec<(usize, usize, f64)>, lin: Vec<(usize, f64)>, r: f64) {
        self.quad.push((quad, lin, r));
    }

    pub fn n_eq(&self) -> usize {
        self.eq.len()
    }

    pub fn build(self) -> ConvexProgram {
        let n = self.lower.len();
        let mut q = DMatrix::zeros(n, n);
        for (i, j, v) in self.q {
            q[(i, j)] += v;
        }
        let mut a = DMatrix::zeros(self.eq.len(), n);
        let mut b = DVector::zeros(self.eq.len());
        for (r, (terms, rhs)) in self.eq.into_iter().enumerate() {
            for (j, v) in terms {
                a[(r, j)] += v;
            }
            b[r] = rhs;
        }
        let mut g = DMatrix::zeros(self.le.len(), n);
        let mut h = DVector::zeros(self.le.len());
        for (r, (terms, rhs)) in self.le.into_iter().enumerate() {
            for (j, v) in terms {
                g[(r, j)] += v;
            }
            h[r] = rhs;
        }
        let qineq = self
            .quad
            .into_iter()
            .map(|(quad, lin, r)| {
                let mut p = DMatrix::zeros(n, n);
                for (i, j, v) in quad {
                    p[(i, j)] += v;
                }
                let mut qv = DVector::zeros(n);
                for (j, v) in lin {
                    qv[j] += v;
                }
                QuadConstraint { p, q: qv, r }
            })
            .collect();
        ConvexProgram {
            n,
            q,
            c: DVector::from_vec(self.c),
            a,
            b,
            g,
            h,
            qineq,
            lower: self.lower,
            upper: self.upper,
            names: self.names,
        }
    }
}

impl ConvexProgram {
    /// An unconstrained program in `n` variables with zero objective.
    pub fn empty(n: usize) -> Self {
        ConvexProgram {
            n,
            q: DMatrix::zeros(n, n),
            c: DVector::zeros(n),
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
            qineq: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            names: Vec::new(),
        }
    }
}
