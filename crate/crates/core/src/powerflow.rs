//! Newton-Raphson AC power flow in polar form, the power-flow Jacobian and
//! the voltage sensitivities to microgrid injections derived from it.
//!
//! The Jacobian is ordered PQ-first with the slack bus removed: rows are
//! `[dP; dQ]` and columns `[d_delta; dV]`, each block in bus order.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::network::{Injections, Network};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfOptions {
    /// Convergence threshold on the largest power mismatch [p.u.].
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PfOptions {
    fn default() -> Self {
        PfOptions {
            tol: 1e-8,
            max_iter: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchFlow {
    /// Sending-end active power at `from` [kW].
    pub p_from: f64,
    pub q_from: f64,
    /// Power leaving the `to` end back into the branch [kW].
    pub p_to: f64,
    pub q_to: f64,
    /// Series loss [kW].
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfSolution {
    pub v: Vec<f64>,
    pub delta: Vec<f64>,
    pub branch_flows: Vec<BranchFlow>,
    /// Total series loss [kW].
    pub losses: f64,
    /// Largest power mismatch at the returned state [p.u.].
    pub mismatch: f64,
    pub iterations: usize,
    /// Power drawn from the slack bus [kW, kvar].
    pub slack_p: f64,
    pub slack_q: f64,
}

impl PfSolution {
    pub fn min_voltage(&self) -> f64 {
        self.v.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Mean of |V - 1| over all buses.
    pub fn mean_voltage_deviation(&self) -> f64 {
        self.v.iter().map(|v| (v - 1.0).abs()).sum::<f64>() / self.v.len() as f64
    }
}

/// Dense bus admittance matrix split into conductance and susceptance.
#[derive(Debug, Clone)]
pub struct Admittance {
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl Admittance {
    pub fn build(net: &Network) -> Result<Self> {
        let n = net.n_buses();
        let mut g = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        for br in &net.branches {
            let (i, j) = endpoints(net, br.from, br.to)?;
            let den = br.r * br.r + br.x * br.x;
            let (gs, bs) = (br.r / den, -br.x / den);
            g[(i, i)] += gs;
            g[(j, j)] += gs;
            g[(i, j)] -= gs;
            g[(j, i)] -= gs;
            b[(i, i)] += bs;
            b[(j, j)] += bs;
            b[(i, j)] -= bs;
            b[(j, i)] -= bs;
        }
        Ok(Admittance { g, b })
    }

    /// Calculated injections (P_i, Q_i) in p.u. at the given state.
    pub fn injections(&self, v: &[f64], delta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = v.len();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            for k in 0..n {
                let (gik, bik) = (self.g[(i, k)], self.b[(i, k)]);
                if gik == 0.0 && bik == 0.0 {
                    continue;
                }
                let (s, c) = (delta[i] - delta[k]).sin_cos();
                p[i] += v[i] * v[k] * (gik * c + bik * s);
                q[i] += v[i] * v[k] * (gik * s - bik * c);
            }
        }
        (p, q)
    }
}

fn endpoints(net: &Network, from: usize, to: usize) -> Result<(usize, usize)> {
    match (net.index_of(from), net.index_of(to)) {
        (Some(i), Some(j)) => Ok((i, j)),
        _ => Err(Error::InvalidArgument(alloc::format!(
            "branch {from}-{to} references an unknown bus"
        ))),
    }
}

fn pq_buses(net: &Network) -> Result<(usize, Vec<usize>)> {
    let slack = net
        .slack()
        .ok_or_else(|| Error::InvalidArgument("network has no slack bus".into()))?;
    Ok((slack, (0..net.n_buses()).filter(|&i| i != slack).collect()))
}

pub fn solve_pf(net: &Network, inj: &Injections) -> Result<PfSolution> {
    solve_pf_with(net, inj, &PfOptions::default())
}

pub fn solve_pf_with(net: &Network, inj: &Injections, opts: &PfOptions) -> Result<PfSolution> {
    let n = net.n_buses();
    if inj.p.len() != n || inj.q.len() != n {
        return Err(Error::InvalidArgument(
            "injection vectors must have one entry per bus".into(),
        ));
    }
    let (slack, pq) = pq_buses(net)?;
    let ybus = Admittance::build(net)?;
    let p_spec: Vec<f64> = inj.p.iter().map(|&x| net.kw_to_pu(x)).collect();
    let q_spec: Vec<f64> = inj.q.iter().map(|&x| net.kw_to_pu(x)).collect();

    let mut v = vec![net.v_ref; n];
    let mut delta = vec![0.0; n];
    let np = pq.len();
    let mut iterations = 0;
    loop {
        let (p, q) = ybus.injections(&v, &delta);
        let mut rhs = DVector::zeros(2 * np);
        let mut mismatch = 0.0f64;
        for (k, &i) in pq.iter().enumerate() {
            rhs[k] = p_spec[i] - p[i];
            rhs[np + k] = q_spec[i] - q[i];
            mismatch = mismatch.max(rhs[k].abs()).max(rhs[np + k].abs());
        }
        if mismatch <= opts.tol {
            return Ok(finish(net, &ybus, v, delta, mismatch, iterations, slack));
        }
        if iterations >= opts.max_iter || !mismatch.is_finite() {
            return Err(Error::PowerFlowDiverged {
                iterations,
                mismatch,
            });
        }
        iterations += 1;
        let jac = jacobian_at(&ybus, &pq, &v, &delta, &p, &q);
        let lu = jac.lu();
        let step = lu
            .solve(&rhs)
            .filter(|s| s.iter().all(|x| x.is_finite()))
            .ok_or(Error::SingularJacobian {
                iteration: iterations,
            })?;
        for (k, &i) in pq.iter().enumerate() {
            delta[i] += step[k];
            v[i] += step[np + k];
        }
    }
}

fn finish(
    net: &Network,
    ybus: &Admittance,
    v: Vec<f64>,
    delta: Vec<f64>,
    mismatch: f64,
    iterations: usize,
    slack: usize,
) -> PfSolution {
    let base_kw = net.pu_to_kw(1.0);
    let mut branch_flows = Vec::with_capacity(net.branches.len());
    let mut losses = 0.0;
    for br in &net.branches {
        // endpoints were checked when the admittance matrix was built
        let i = net.index_of(br.from).unwrap_or(0);
        let j = net.index_of(br.to).unwrap_or(0);
        let (vi_re, vi_im) = (v[i] * delta[i].cos(), v[i] * delta[i].sin());
        let (vj_re, vj_im) = (v[j] * delta[j].cos(), v[j] * delta[j].sin());
        let den = br.r * br.r + br.x * br.x;
        let (gs, bs) = (br.r / den, -br.x / den);
        let (dr, di) = (vi_re - vj_re, vi_im - vj_im);
        // I = (Vi - Vj) * y
        let (ir, ii) = (dr * gs - di * bs, dr * bs + di * gs);
        // S = V * conj(I)
        let s_from = (vi_re * ir + vi_im * ii, vi_im * ir - vi_re * ii);
        let s_to = (-(vj_re * ir + vj_im * ii), -(vj_im * ir - vj_re * ii));
        let loss = (ir * ir + ii * ii) * br.r;
        losses += loss;
        branch_flows.push(BranchFlow {
            p_from: s_from.0 * base_kw,
            q_from: s_from.1 * base_kw,
            p_to: s_to.0 * base_kw,
            q_to: s_to.1 * base_kw,
            loss: loss * base_kw,
        });
    }
    let (p, q) = ybus.injections(&v, &delta);
    PfSolution {
        v,
        delta,
        branch_flows,
        losses: losses * base_kw,
        mismatch,
        iterations,
        slack_p: p[slack] * base_kw,
        slack_q: q[slack] * base_kw,
    }
}

fn jacobian_at(
    ybus: &Admittance,
    pq: &[usize],
    v: &[f64],
    delta: &[f64],
    p: &[f64],
    q: &[f64],
) -> DMatrix<f64> {
    let np = pq.len();
    let mut j = DMatrix::zeros(2 * np, 2 * np);
    for (r, &i) in pq.iter().enumerate() {
        for (c, &k) in pq.iter().enumerate() {
            let (g, b) = (ybus.g[(i, k)], ybus.b[(i, k)]);
            if i == k {
                j[(r, c)] = -q[i] - b * v[i] * v[i];
                j[(r, np + c)] = p[i] / v[i] + g * v[i];
                j[(np + r, c)] = p[i] - g * v[i] * v[i];
                j[(np + r, np + c)] = q[i] / v[i] - b * v[i];
            } else {
                if g == 0.0 && b == 0.0 {
                    continue;
                }
                let (s, co) = (delta[i] - delta[k]).sin_cos();
                j[(r, c)] = v[i] * v[k] * (g * s - b * co);
                j[(r, np + c)] = v[i] * (g * co + b * s);
                j[(np + r, c)] = -v[i] * v[k] * (g * co + b * s);
                j[(np + r, np + c)] = v[i] * (g * s - b * co);
            }
        }
    }
    j
}

/// Power-flow Jacobian `[dP/d_delta, dP/dV; dQ/d_delta, dQ/dV]` at the given
/// state, PQ buses in bus order, slack excluded.
pub fn jacobian(net: &Network, v: &[f64], delta: &[f64]) -> Result<DMatrix<f64>> {
    let (_, pq) = pq_buses(net)?;
    let ybus = Admittance::build(net)?;
    let (p, q) = ybus.injections(v, delta);
    Ok(jacobian_at(&ybus, &pq, v, delta, &p, &q))
}

/// dV/dP and dV/dQ of every PQ bus with respect to injections at the
/// microgrid buses, in p.u. voltage per p.u. power.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    /// Bus positions of the rows (every bus except the slack).
    pub pq_buses: Vec<usize>,
    /// Bus positions of the columns.
    pub mg_buses: Vec<usize>,
    pub dv_dp: DMatrix<f64>,
    pub dv_dq: DMatrix<f64>,
}

impl SensitivityMatrix {
    /// Row of a bus position, `None` for the slack.
    pub fn row_of(&self, bus: usize) -> Option<usize> {
        self.pq_buses.iter().position(|&b| b == bus)
    }

    /// dV/dP of `bus` to microgrid column `w`; zero for the slack bus.
    pub fn dv_dp_at(&self, bus: usize, w: usize) -> f64 {
        self.row_of(bus).map_or(0.0, |r| self.dv_dp[(r, w)])
    }
}

/// Factors the Jacobian once and solves for the microgrid injection columns.
pub fn sensitivity(
    net: &Network,
    state: &PfSolution,
    mg_buses: &[usize],
) -> Result<SensitivityMatrix> {
    let (slack, pq) = pq_buses(net)?;
    if mg_buses.is_empty() {
        return Err(Error::InvalidArgument("no microgrid buses".into()));
    }
    let cols = mg_columns(&pq, slack, mg_buses)?;
    let np = pq.len();
    let jac = jacobian(net, &state.v, &state.delta)?;
    let lu = jac.lu();
    let mut dv_dp = DMatrix::zeros(np, mg_buses.len());
    let mut dv_dq = DMatrix::zeros(np, mg_buses.len());
    for (w, &c) in cols.iter().enumerate() {
        for (target, offset) in [(&mut dv_dp, 0), (&mut dv_dq, np)] {
            let mut e = DVector::zeros(2 * np);
            e[c + offset] = 1.0;
            let x = lu
                .solve(&e)
                .filter(|s| s.iter().all(|x| x.is_finite()))
                .ok_or(Error::SingularJacobian { iteration: 0 })?;
            for r in 0..np {
                target[(r, w)] = x[np + r];
            }
        }
    }
    Ok(SensitivityMatrix {
        pq_buses: pq,
        mg_buses: mg_buses.to_vec(),
        dv_dp,
        dv_dq,
    })
}

fn mg_columns(pq: &[usize], slack: usize, mg_buses: &[usize]) -> Result<Vec<usize>> {
    mg_buses
        .iter()
        .map(|&m| {
            if m == slack {
                return Err(Error::InvalidArgument(
                    "microgrid bus cannot be the slack bus".into(),
                ));
            }
            pq.iter()
                .position(|&b| b == m)
                .ok_or_else(|| Error::InvalidArgument("microgrid bus out of range".into()))
        })
        .collect()
}

/// Central-difference estimate of [`sensitivity`]: two tightly converged power
/// flows per microgrid bus and direction, perturbing its injection by `h` p.u.
pub fn fd_sensitivity_oracle(
    net: &Network,
    inj: &Injections,
    mg_buses: &[usize],
    h: f64,
) -> Result<SensitivityMatrix> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(
            "finite-difference step must be > 0".into(),
        ));
    }
    let (slack, pq) = pq_buses(net)?;
    mg_columns(&pq, slack, mg_buses)?;
    let opts = PfOptions {
        tol: 1e-12,
        max_iter: 50,
    };
    let step_kw = net.pu_to_kw(h);
    let np = pq.len();
    let mut dv_dp = DMatrix::zeros(np, mg_buses.len());
    let mut dv_dq = DMatrix::zeros(np, mg_buses.len());
    for (w, &m) in mg_buses.iter().enumerate() {
        for (target, reactive) in [(&mut dv_dp, false), (&mut dv_dq, true)] {
            let mut plus = inj.clone();
            let mut minus = inj.clone();
            if reactive {
                plus.q[m] += step_kw;
                minus.q[m] -= step_kw;
            } else {
                plus.p[m] += step_kw;
                minus.p[m] -= step_kw;
            }
            let a = solve_pf_with(net, &plus, &opts)?;
            let b = solve_pf_with(net, &minus, &opts)?;
            for (r, &i) in pq.iter().enumerate() {
                target[(r, w)] = (a.v[i] - b.v[i]) / (2.0 * h);
            }
        }
    }
    Ok(SensitivityMatrix {
        pq_buses: pq,
        mg_buses: mg_buses.to_vec(),
        dv_dp,
        dv_dq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Branch, Bus, BusKind};

    pub(crate) fn two_bus(r: f64, x: f64, load_pu: (f64, f64)) -> (Network, Injections) {
        let mut b2 = Bus::new(2, BusKind::Pq, 1);
        b2.load_p[0] = load_pu.0 * 10_000.0;
        b2.load_q[0] = load_pu.1 * 10_000.0;
        let net = Network {
            buses: vec![Bus::new(1, BusKind::Slack, 1), b2],
            branches: vec![Branch { from: 1, to: 2, r, x }],
            v_ref: 1.0,
            base_mva: 10.0,
            base_kv: 12.66,
            eps_v: 0.05,
            horizon: 1,
        };
        let inj = net.base_injections(0);
        (net, inj)
    }

    #[test]
    fn no_load_flat_start() {
        let (net, inj) = two_bus(0.01, 0.01, (0.0, 0.0));
        let s = solve_pf(&net, &inj).unwrap();
        assert_eq!(s.v, vec![1.0, 1.0]);
        assert_eq!(s.losses, 0.0);
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn two_bus_matches_bisection_on_voltage_equation() {
        let (r, x, p, q) = (0.01, 0.01, 0.1, 0.1);
        let (net, inj) = two_bus(r, x, (p, q));
        let s = solve_pf(&net, &inj).unwrap();
        // V^4 + (2(rP + xQ) - 1) V^2 + (r^2 + x^2)(P^2 + Q^2) = 0, high root
        let f = |v: f64| {
            let u = v * v;
            u * u + (2.0 * (r * p + x * q) - 1.0) * u + (r * r + x * x) * (p * p + q * q)
        };
        let (mut lo, mut hi) = (0.8, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((s.v[1] - 0.5 * (lo + hi)).abs() < 1e-8, "{} vs {}", s.v[1], lo);
        assert!((s.v[1] - 0.997_996).abs() < 1e-6);
    }

    #[test]
    fn two_bus_flat_start_jacobian() {
        let (net, _) = two_bus(0.01, 0.01, (0.0, 0.0));
        let j = jacobian(&net, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        // y = 50 - 50j: [[-b, g], [-g, -b]]
        let expect = DMatrix::from_row_slice(2, 2, &[50.0, 50.0, -50.0, 50.0]);
        assert!((j - expect).abs().max() < 1e-9);
    }

    #[test]
    fn single_mg_sensitivity_matches_finite_difference() {
        let (mut net, _) = two_bus(0.02, 0.04, (0.05, 0.02));
        net.buses[1].kind = BusKind::MgPcc;
        net.buses[1].mg = Some(0);
        let inj = net.base_injections(0);
        let s = solve_pf(&net, &inj).unwrap();
        let a = sensitivity(&net, &s, &[1]).unwrap();
        let fd = fd_sensitivity_oracle(&net, &inj, &[1], 1e-5).unwrap();
        let rel = ((a.dv_dp[(0, 0)] - fd.dv_dp[(0, 0)]) / fd.dv_dp[(0, 0)]).abs();
        assert!(rel < 1e-6, "{rel}");
        assert!(a.dv_dp[(0, 0)] > 0.0);
    }

    #[test]
    fn zero_step_rejected() {
        let (net, inj) = two_bus(0.01, 0.01, (0.1, 0.0));
        assert!(matches!(
            fd_sensitivity_oracle(&net, &inj, &[1], 0.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let (net, inj) = two_bus(0.5, 0.5, (5.0, 5.0));
        match solve_pf(&net, &inj) {
            Err(Error::PowerFlowDiverged { .. }) | Err(Error::SingularJacobian { .. }) => {}
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
