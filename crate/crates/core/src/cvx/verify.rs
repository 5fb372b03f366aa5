//! KKT check computed straight from the program data, sharing nothing with
//! the solver's internal row bookkeeping.

use nalgebra::DVector;

use super::{ConvexProgram, KktSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal_eq: f64,
    pub primal_ineq: f64,
    /// Most negative multiplier, as a positive number.
    pub dual_sign: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_eq)
            .max(self.primal_ineq)
            .max(self.dual_sign)
            .max(self.complementarity)
    }
}

pub fn verify_kkt(p: &ConvexProgram, s: &KktSolution) -> KktReport {
    let x = &s.x;
    let mut grad: DVector<f64> = &p.q * x + &p.c;
    grad += p.a.transpose() * &s.y;
    grad += p.g.transpose() * &s.z_ineq;
    for (k, qc) in p.qineq.iter().enumerate() {
        grad += (&qc.p * x + &qc.q) * s.z_quad[k];
    }
    grad -= &s.z_lower;
    grad += &s.z_upper;
    let stationarity = grad.amax();

    let primal_eq = if p.a.nrows() > 0 { (&p.a * x - &p.b).amax() } else { 0.0 };

    let mut primal_ineq = 0.0f64;
    let mut complementarity = 0.0f64;
    let mut dual_sign = 0.0f64;
    let mut row = |c: f64, z: f64| {
        primal_ineq = primal_ineq.max(c);
        dual_sign = dual_sign.max(-z);
        complementarity = complementarity.max((z * c).abs());
    };
    let gx = &p.g * x - &p.h;
    for r in 0..gx.len() {
        row(gx[r], s.z_ineq[r]);
    }
    for (k, qc) in p.qineq.iter().enumerate() {
        row(qc.eval(x), s.z_quad[k]);
    }
    for j in 0..p.n {
        if p.lower[j].is_finite() {
            row(p.lower[j] - x[j], s.z_lower[j]);
        }
        if p.upper[j].is_finite() {
            row(x[j] - p.upper[j], s.z_upper[j]);
        }
    }
    KktReport {
        stationarity,
        primal_eq,
        primal_ineq,
        dual_sign,
        complementarity,
    }
}
