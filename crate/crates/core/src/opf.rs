//! Upper-level zone programs on the LinDistFlow model.
//!
//! Every zone trades off two objectives, both in per-unit:
//!
//! * `f1 = Σ r (P² + Q²)` over the zone's branches, overlaps included;
//! * `f2 = Σ |U - 1|` over the zone's own buses, with `U = V²`.
//!
//! Each objective is mapped to a linear membership
//! `μ = (f_max - f) / (f_max - f_min)`, and the zone maximises its
//! satisfaction `φ <= μ1, μ2`. The programs add `κ (μ1 + μ2)` to the
//! objective with a small `κ`. This picks one point out of the otherwise
//! flat optimal face of the max-min problem, so the ADMM fixpoint and the
//! centralized optimum coincide; `κ = 0` gives the plain max-min form.
//! An objective whose range collapsed to the guard width cannot be
//! influenced by the zone and counts as fully satisfied (`μ = 1`).
//!
//! Branch flows are oriented away from the slack. A zone owns its buses'
//! voltages, balances and slack pairs. For every overlap branch it also
//! carries the flow and a copy of the far endpoint's voltage. Microgrid
//! tie-line power `p_pcc` is positive when the microgrid imports, so the
//! network sees it as load.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::cvx::{self, ConvexProgram, KktSolution, ProgramBuilder};
use crate::network::{BusKind, Network, Radial};
use crate::zoning::ZonePartition;
use crate::{Error, Result};

/// `tan(acos 0.95)`: reactive headroom per unit of PV active power.
pub const PV_TAN_PHI: f64 = 0.328_684_105_178_863_2;

/// Tie-line limits of one microgrid for one hour [kW, kvar].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PccLimits {
    pub p_min: f64,
    pub p_max: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBounds {
    pub f1_min: f64,
    pub f1_max: f64,
    pub f2_min: f64,
    pub f2_max: f64,
}

impl ObjectiveBounds {
    pub const GUARD: f64 = 1e-9;

    /// Per objective, whether the range is no wider than the guard.
    pub fn fixed(&self) -> [bool; 2] {
        let lim = Self::GUARD * (1.0 + 1e-6);
        [self.f1_max - self.f1_min <= lim, self.f2_max - self.f2_min <= lim]
    }

    /// Membership degrees at `f = (f1, f2)`; an objective with a guarded
    /// range has membership 1.
    pub fn memberships(&self, f: (f64, f64)) -> (f64, f64) {
        let [a, b] = self.fixed();
        (
            if a { 1.0 } else { membership(f.0, self.f1_min, self.f1_max) },
            if b { 1.0 } else { membership(f.1, self.f2_min, self.f2_max) },
        )
    }

    fn check(&self, zone: usize) -> Result<()> {
        for (s, lo, hi) in [(1, self.f1_min, self.f1_max), (2, self.f2_min, self.f2_max)] {
            if !(hi > lo) {
                return Err(Error::DegenerateBounds {
                    zone,
                    objective: s,
                    f_min: lo,
                    f_max: hi,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpfOptions {
    /// Weight of the membership sum added to the max-min objective.
    pub kappa: f64,
    /// Voltage magnitude target [p.u.].
    pub v_spec: f64,
    /// Relative weight of the secondary objective in the payoff-table solves.
    pub payoff_eta: f64,
}

impl Default for OpfOptions {
    fn default() -> Self {
        OpfOptions {
            kappa: 1e-3,
            v_spec: 1.0,
            payoff_eta: 1e-4,
        }
    }
}

/// Piecewise-linear membership degree, clamped to `[0, 1]`.
pub fn membership(f: f64, f_min: f64, f_max: f64) -> f64 {
    if f <= f_min {
        1.0
    } else if f >= f_max {
        0.0
    } else {
        (f_max - f) / (f_max - f_min)
    }
}

/// LinDistFlow voltage drop along one branch, all in p.u.
pub fn voltage_drop(u_from: f64, r: f64, x: f64, p: f64, q: f64) -> f64 {
    u_from - 2.0 * (r * p + x * q)
}

/// Largest PV reactive output allowed by the power-factor limit [kvar].
pub fn pv_q_limit(p_pv: f64) -> f64 {
    p_pv * PV_TAN_PHI
}

/// Reactive range `|q| <= bound` of a PV inverter running at `p_mppt`: the
/// power-factor limit or the capacity circle, whichever is tighter. Any
/// consistent unit.
pub fn pv_q_bound(capacity: f64, p_mppt: f64) -> f64 {
    pv_q_limit(p_mppt).min((capacity * capacity - p_mppt * p_mppt).max(0.0).sqrt())
}

/// Variable positions inside a zone or centralized program.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VarMap {
    /// Per network branch.
    pub p: Vec<Option<usize>>,
    pub q: Vec<Option<usize>>,
    /// Per bus.
    pub u: Vec<Option<usize>>,
    pub s_pos: Vec<Option<usize>>,
    pub s_neg: Vec<Option<usize>>,
    pub q_pv: Vec<Option<usize>>,
    pub p_pcc: Vec<Option<usize>>,
    pub q_pcc: Vec<Option<usize>>,
    /// Per zone term of the program.
    pub phi: Vec<usize>,
}

/// One zone's share of the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneTerm {
    pub zone: usize,
    pub buses: Vec<usize>,
    pub branches: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Goal {
    /// Minimise objective `primary` (1 or 2) plus `eta` times the other,
    /// the other rescaled by the ratio of typical magnitudes `scale`.
    Payoff { primary: u8, eta: f64, scale: (f64, f64) },
    Fmo { kappa: f64 },
}

/// Per-hour, per-unit data shared by every program of that hour.
#[derive(Debug, Clone)]
pub struct HourData<'a> {
    pub net: &'a Network,
    pub radial: &'a Radial,
    pub hour: usize,
    /// Tie-line limits per microgrid index.
    pub pcc: &'a [PccLimits],
}

impl<'a> HourData<'a> {
    fn pu(&self, kw: f64) -> f64 {
        self.net.kw_to_pu(kw)
    }
}

fn assemble(
    d: &HourData,
    owned: &[bool],
    branches: &[usize],
    terms: &[ZoneTerm],
    bounds: &[Option<ObjectiveBounds>],
    goal: Goal,
    v_spec: f64,
) -> (ConvexProgram, VarMap) {
    let net = d.net;
    let nb = net.n_buses();
    let nbr = net.branches.len();
    let (u_lo, u_hi) = ((1.0 - net.eps_v).powi(2), (1.0 + net.eps_v).powi(2));
    let mut b = ProgramBuilder::new();
    let mut vm = VarMap {
        p: vec![None; nbr],
        q: vec![None; nbr],
        u: vec![None; nb],
        s_pos: vec![None; nb],
        s_neg: vec![None; nb],
        q_pv: vec![None; nb],
        p_pcc: vec![None; nb],
        q_pcc: vec![None; nb],
        phi: Vec::new(),
    };
    for &k in branches {
        vm.p[k] = Some(b.free(format!("P{k}")));
        vm.q[k] = Some(b.free(format!("Q{k}")));
    }
    let u_spec = v_spec * v_spec;
    for &k in branches {
        let (up, dn) = d.radial.oriented[k];
        for bus in [up, dn] {
            if vm.u[bus].is_none() {
                let id = net.buses[bus].id;
                let slack = net.buses[bus].kind == BusKind::Slack;
                vm.u[bus] = Some(if slack && owned[bus] {
                    let v2 = net.v_ref * net.v_ref;
                    b.var(format!("U{id}"), v2, v2)
                } else {
                    b.var(format!("U{id}"), u_lo, u_hi)
                });
            }
        }
    }
    for bus in 0..nb {
        if owned[bus] && vm.u[bus].is_none() {
            // isolated single-bus zone
            let id = net.buses[bus].id;
            vm.u[bus] = Some(if net.buses[bus].kind == BusKind::Slack {
                let v2 = net.v_ref * net.v_ref;
                b.var(format!("U{id}"), v2, v2)
            } else {
                b.var(format!("U{id}"), u_lo, u_hi)
            });
        }
    }
    for bus in (0..nb).filter(|&i| owned[i]) {
        let bd = &net.buses[bus];
        let id = bd.id;
        vm.s_pos[bus] = Some(b.var(format!("sp{id}"), 0.0, f64::INFINITY));
        vm.s_neg[bus] = Some(b.var(format!("sn{id}"), 0.0, f64::INFINITY));
        if let Some(pv) = &bd.pv {
            let lim = d.pu(pv_q_bound(pv.capacity_kva, pv.p_mppt[d.hour]));
            vm.q_pv[bus] = Some(b.var(format!("qpv{id}"), -lim, lim));
        }
        if bd.kind == BusKind::MgPcc {
            if let Some(lim) = bd.mg.and_then(|m| d.pcc.get(m)) {
                vm.p_pcc[bus] = Some(b.var(format!("ppcc{id}"), d.pu(lim.p_min), d.pu(lim.p_max)));
                vm.q_pcc[bus] = Some(b.var(format!("qpcc{id}"), -d.pu(lim.q_max), d.pu(lim.q_max)));
            }
        }
    }
    // bus balances
    for bus in (0..nb).filter(|&i| owned[i]) {
        let bd = &net.buses[bus];
        if bd.kind == BusKind::Slack {
            continue;
        }
        let mut tp = Vec::new();
        let mut tq = Vec::new();
        for &k in branches {
            let (up, dn) = d.radial.oriented[k];
            let sign = if dn == bus {
                1.0
            } else if up == bus {
                -1.0
            } else {
                continue;
            };
            tp.push((vm.p[k].unwrap(), sign));
            tq.push((vm.q[k].unwrap(), sign));
        }
        let mut load_p = bd.load_p[d.hour];
        if let Some(pv) = &bd.pv {
            load_p -= pv.p_mppt[d.hour];
        }
        if let Some(i) = vm.p_pcc[bus] {
            tp.push((i, -1.0));
        }
        if let Some(i) = vm.q_pcc[bus] {
            tq.push((i, -1.0));
        }
        if let Some(i) = vm.q_pv[bus] {
            tq.push((i, 1.0));
        }
        b.eq(tp, d.pu(load_p));
        b.eq(tq, d.pu(bd.load_q[d.hour]));
    }
    // voltage drops
    for &k in branches {
        let (up, dn) = d.radial.oriented[k];
        let br = net.branches[k];
        b.eq(
            vec![
                (vm.u[dn].unwrap(), 1.0),
                (vm.u[up].unwrap(), -1.0),
                (vm.p[k].unwrap(), 2.0 * br.r),
                (vm.q[k].unwrap(), 2.0 * br.x),
            ],
            0.0,
        );
    }
    // deviation slack pairs
    for bus in (0..nb).filter(|&i| owned[i]) {
        b.eq(
            vec![(vm.u[bus].unwrap(), 1.0), (vm.s_pos[bus].unwrap(), -1.0), (vm.s_neg[bus].unwrap(), 1.0)],
            u_spec,
        );
    }

    let f1_quad = |t: &ZoneTerm, w: f64| -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for &k in &t.branches {
            let r = net.branches[k].r;
            let (p, q) = (vm.p[k].unwrap(), vm.q[k].unwrap());
            out.push((p, p, 2.0 * r * w));
            out.push((q, q, 2.0 * r * w));
        }
        out
    };
    let f2_lin = |t: &ZoneTerm, w: f64| -> Vec<(usize, f64)> {
        t.buses
            .iter()
            .flat_map(|&i| [(vm.s_pos[i].unwrap(), w), (vm.s_neg[i].unwrap(), w)])
            .collect()
    };
    match goal {
        Goal::Payoff { primary, eta, scale } => {
            // secondary weight relative to the primary's scale, kept within
            // three decades so near-zero baselines cannot blow it up
            let ratio = (scale.0 / scale.1).clamp(1e-3, 1e3);
            let (w1, w2) = if primary == 1 { (1.0, eta * ratio) } else { (eta / ratio, 1.0) };
            for t in terms {
                for (i, j, v) in f1_quad(t, w1) {
                    b.add_quad_cost(i, j, v);
                }
                for (i, v) in f2_lin(t, w2) {
                    b.add_linear_cost(i, v);
                }
            }
        }
        Goal::Fmo { kappa } => {
            for (t, bd) in terms.iter().zip(bounds) {
                let bd = bd.expect("membership bounds required");
                let phi = b.var(format!("phi{}", t.zone), 0.0, 1.0);
                vm.phi.push(phi);
                b.add_linear_cost(phi, -1.0);
                // a guarded range means the objective cannot move: μ = 1
                let [fixed1, fixed2] = bd.fixed();
                let d1 = bd.f1_max - bd.f1_min;
                let d2 = bd.f2_max - bd.f2_min;
                if !fixed1 {
                    if kappa > 0.0 {
                        for (i, j, v) in f1_quad(t, kappa / d1) {
                            b.add_quad_cost(i, j, v);
                        }
                    }
                    b.quad_le(f1_quad(t, 1.0), vec![(phi, d1)], -bd.f1_max);
                }
                if !fixed2 {
                    if kappa > 0.0 {
                        for (i, v) in f2_lin(t, kappa / d2) {
                            b.add_linear_cost(i, v);
                        }
                    }
                    let mut row = f2_lin(t, 1.0);
                    row.push((phi, d2));
                    b.le(row, bd.f2_max);
                }
            }
        }
    }
    (b.build(), vm)
}

/// Zone buses, the zone's branch set (intra plus overlaps) and ownership mask.
fn zone_layout(d: &HourData, part: &ZonePartition, zone: usize) -> (Vec<bool>, ZoneTerm) {
    let buses = part.buses_of(zone);
    let mut owned = vec![false; d.net.n_buses()];
    for &b in &buses {
        owned[b] = true;
    }
    let branches: Vec<usize> = (0..d.net.branches.len())
        .filter(|&k| {
            let (u, v) = d.radial.oriented[k];
            owned[u] || owned[v]
        })
        .collect();
    (owned, ZoneTerm { zone, buses, branches })
}

/// Objective values of a solution vector.
pub fn evaluate_objectives(net: &Network, vm: &VarMap, term: &ZoneTerm, x: &DVector<f64>, v_spec: f64) -> (f64, f64) {
    let f1 = term
        .branches
        .iter()
        .map(|&k| {
            let (p, q) = (x[vm.p[k].unwrap()], x[vm.q[k].unwrap()]);
            net.branches[k].r * (p * p + q * q)
        })
        .sum();
    let f2 = term.buses.iter().map(|&i| (x[vm.u[i].unwrap()] - v_spec * v_spec).abs()).sum();
    (f1, f2)
}

/// Branch flows and squared voltages of the LinDistFlow model for the given
/// per-unit net injections (generation minus load) by bus position.
pub fn lindistflow(net: &Network, radial: &Radial, p_inj: &[f64], q_inj: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let nb = net.n_buses();
    let mut p = vec![0.0; net.branches.len()];
    let mut q = vec![0.0; net.branches.len()];
    let mut sub_p = vec![0.0; nb];
    let mut sub_q = vec![0.0; nb];
    for &b in radial.order.iter().rev() {
        sub_p[b] -= p_inj[b];
        sub_q[b] -= q_inj[b];
        if let (Some(par), Some(k)) = (radial.parent[b], radial.parent_branch[b]) {
            p[k] = sub_p[b];
            q[k] = sub_q[b];
            sub_p[par] += sub_p[b];
            sub_q[par] += sub_q[b];
        }
    }
    let mut u = vec![0.0; nb];
    u[radial.root] = net.v_ref * net.v_ref;
    for &b in &radial.order {
        if let (Some(par), Some(k)) = (radial.parent[b], radial.parent_branch[b]) {
            let br = net.branches[k];
            u[b] = voltage_drop(u[par], br.r, br.x, p[k], q[k]);
        }
    }
    (p, q, u)
}

/// Zero-control operating point in the LinDistFlow model.
pub fn baseline(d: &HourData) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let inj = d.net.base_injections(d.hour);
    let p: Vec<f64> = inj.p.iter().map(|&v| d.pu(v)).collect();
    let q: Vec<f64> = inj.q.iter().map(|&v| d.pu(v)).collect();
    lindistflow(d.net, d.radial, &p, &q)
}

fn term_values(net: &Network, term: &ZoneTerm, p: &[f64], q: &[f64], u: &[f64], v_spec: f64) -> (f64, f64) {
    let f1 = term.branches.iter().map(|&k| net.branches[k].r * (p[k] * p[k] + q[k] * q[k])).sum();
    let f2 = term.buses.iter().map(|&i| (u[i] - v_spec * v_spec).abs()).sum();
    (f1, f2)
}

/// Payoff-table bounds for one zone. Each objective is minimised in turn,
/// with a small weight on the other to make the minimiser unique. `f_max` is
/// the larger of the value at the other objective's minimiser and the
/// zero-control value. The overlap flows and far-end voltages are left free.
pub fn compute_objective_bounds(d: &HourData, part: &ZonePartition, zone: usize, opts: &OpfOptions) -> Result<ObjectiveBounds> {
    let (owned, term) = zone_layout(d, part, zone);
    let (bp, bq, bu) = baseline(d);
    let (b1, b2) = term_values(d.net, &term, &bp, &bq, &bu, opts.v_spec);
    let scale = (b1.max(1e-9), b2.max(1e-9));
    let mut at = [(0.0, 0.0); 2];
    for (slot, primary) in [(0usize, 1u8), (1, 2)] {
        let goal = Goal::Payoff {
            primary,
            eta: opts.payoff_eta,
            scale,
        };
        let (prog, vm) = assemble(d, &owned, &term.branches, core::slice::from_ref(&term), &[None], goal, opts.v_spec);
        let sol = cvx::solve(&prog)?.into_optimal(format!("objective bounds, zone {zone}, objective {primary}"))?;
        at[slot] = evaluate_objectives(d.net, &vm, &term, &sol.x, opts.v_spec);
    }
    let f1_min = at[0].0;
    let f2_min = at[1].1;
    let mut f1_max = at[1].0.max(b1);
    let mut f2_max = at[0].1.max(b2);
    if f1_max - f1_min < ObjectiveBounds::GUARD {
        f1_max = f1_min + ObjectiveBounds::GUARD;
    }
    if f2_max - f2_min < ObjectiveBounds::GUARD {
        f2_max = f2_min + ObjectiveBounds::GUARD;
    }
    Ok(ObjectiveBounds {
        f1_min,
        f1_max,
        f2_min,
        f2_max,
    })
}

/// Consensus variables of one overlap branch inside one zone program:
/// `[P, Q, U_up, U_down]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryBlock {
    /// Index into `ZonePartition::overlaps`.
    pub overlap: usize,
    pub vars: [usize; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSubproblem {
    pub zone: usize,
    pub program: ConvexProgram,
    pub vars: VarMap,
    pub term: ZoneTerm,
    pub bounds: ObjectiveBounds,
    pub boundary: Vec<BoundaryBlock>,
    pub v_spec: f64,
}

impl ZoneSubproblem {
    pub fn phi(&self, x: &DVector<f64>) -> f64 {
        x[self.vars.phi[0]]
    }

    pub fn objectives(&self, net: &Network, x: &DVector<f64>) -> (f64, f64) {
        evaluate_objectives(net, &self.vars, &self.term, x, self.v_spec)
    }
}

pub fn build_zone_subproblem(
    d: &HourData,
    part: &ZonePartition,
    zone: usize,
    bounds: ObjectiveBounds,
    opts: &OpfOptions,
) -> Result<ZoneSubproblem> {
    bounds.check(zone)?;
    let (owned, term) = zone_layout(d, part, zone);
    let (program, vars) = assemble(
        d,
        &owned,
        &term.branches,
        core::slice::from_ref(&term),
        &[Some(bounds)],
        Goal::Fmo { kappa: opts.kappa },
        opts.v_spec,
    );
    let boundary = part
        .overlaps
        .iter()
        .enumerate()
        .filter(|(_, o)| o.zone_a == zone || o.zone_b == zone)
        .map(|(i, o)| {
            let (up, dn) = d.radial.oriented[o.branch];
            BoundaryBlock {
                overlap: i,
                vars: [
                    vars.p[o.branch].unwrap(),
                    vars.q[o.branch].unwrap(),
                    vars.u[up].unwrap(),
                    vars.u[dn].unwrap(),
                ],
            }
        })
        .collect();
    Ok(ZoneSubproblem {
        zone,
        program,
        vars,
        term,
        bounds,
        boundary,
        v_spec: opts.v_spec,
    })
}

/// Whole-network program with overlap copies merged.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedProblem {
    pub program: ConvexProgram,
    pub vars: VarMap,
    pub terms: Vec<ZoneTerm>,
    pub bounds: Vec<ObjectiveBounds>,
    pub v_spec: f64,
}

pub fn build_centralized(d: &HourData, part: &ZonePartition, bounds: &[ObjectiveBounds], opts: &OpfOptions) -> Result<CentralizedProblem> {
    let nz = part.n_zones();
    if bounds.len() != nz {
        return Err(Error::InvalidArgument("one bounds entry per zone required".into()));
    }
    for (z, bd) in bounds.iter().enumerate() {
        bd.check(z)?;
    }
    let owned = vec![true; d.net.n_buses()];
    let terms: Vec<ZoneTerm> = (0..nz).map(|z| zone_layout(d, part, z).1).collect();
    let all: Vec<usize> = (0..d.net.branches.len()).collect();
    let bo: Vec<Option<ObjectiveBounds>> = bounds.iter().copied().map(Some).collect();
    let (program, vars) = assemble(d, &owned, &all, &terms, &bo, Goal::Fmo { kappa: opts.kappa }, opts.v_spec);
    Ok(CentralizedProblem {
        program,
        vars,
        terms,
        bounds: bounds.to_vec(),
        v_spec: opts.v_spec,
    })
}

/// Network-wide upper-level decision, in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    /// Squared voltage per bus [p.u.²].
    pub u: Vec<f64>,
    /// Branch flows [p.u.].
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// PV reactive output per bus [kvar].
    pub q_pv: Vec<f64>,
    /// Tie-line exchange per bus, positive into the microgrid [kW, kvar].
    pub p_pcc: Vec<f64>,
    pub q_pcc: Vec<f64>,
    /// Satisfaction per zone.
    pub phi: Vec<f64>,
    /// Objective values `(f1, f2)` per zone.
    pub f: Vec<(f64, f64)>,
}

impl OperatingPoint {
    pub fn total_phi(&self) -> f64 {
        self.phi.iter().sum()
    }

    /// Value of the maximised objective: `Σ φ + κ Σ (μ1 + μ2)`.
    pub fn objective(&self, bounds: &[ObjectiveBounds], kappa: f64) -> f64 {
        self.phi
            .iter()
            .zip(&self.f)
            .zip(bounds)
            .map(|((phi, f), b)| {
                // unclamped, as in the program objective
                let [a, c] = b.fixed();
                let m1 = if a { 0.0 } else { (b.f1_max - f.0) / (b.f1_max - b.f1_min) };
                let m2 = if c { 0.0 } else { (b.f2_max - f.1) / (b.f2_max - b.f2_min) };
                phi + kappa * (m1 + m2)
            })
            .sum()
    }

    /// Bus injections of this point [kW, kvar], generation positive.
    pub fn injections(&self, net: &Network, hour: usize) -> crate::network::Injections {
        let mut inj = net.base_injections(hour);
        for i in 0..net.n_buses() {
            inj.p[i] -= self.p_pcc[i];
            inj.q[i] += self.q_pv[i] - self.q_pcc[i];
        }
        inj
    }
}

/// Reads bus and branch quantities from one solution into `op`, for the
/// buses in `owned` and the branches in `branches`.
pub fn extract_into(net: &Network, vm: &VarMap, x: &DVector<f64>, buses: &[usize], branches: &[usize], op: &mut OperatingPoint) {
    for &k in branches {
        op.p[k] = x[vm.p[k].unwrap()];
        op.q[k] = x[vm.q[k].unwrap()];
    }
    for &i in buses {
        op.u[i] = x[vm.u[i].unwrap()];
        if let Some(v) = vm.q_pv[i] {
            op.q_pv[i] = net.pu_to_kw(x[v]);
        }
        if let Some(v) = vm.p_pcc[i] {
            op.p_pcc[i] = net.pu_to_kw(x[v]);
        }
        if let Some(v) = vm.q_pcc[i] {
            op.q_pcc[i] = net.pu_to_kw(x[v]);
        }
    }
}

impl OperatingPoint {
    pub fn zeros(net: &Network, zones: usize) -> Self {
        let nb = net.n_buses();
        let nbr = net.branches.len();
        OperatingPoint {
            u: vec![0.0; nb],
            p: vec![0.0; nbr],
            q: vec![0.0; nbr],
            q_pv: vec![0.0; nb],
            p_pcc: vec![0.0; nb],
            q_pcc: vec![0.0; nb],
            phi: vec![0.0; zones],
            f: vec![(0.0, 0.0); zones],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedSolution {
    pub point: OperatingPoint,
    pub solution: KktSolution,
}

pub fn solve_centralized(net: &Network, cp: &CentralizedProblem) -> Result<CentralizedSolution> {
    let sol = cvx::solve(&cp.program)?.into_optimal("centralized problem")?;
    let mut op = OperatingPoint::zeros(net, cp.terms.len());
    let all_buses: Vec<usize> = (0..net.n_buses()).collect();
    let all_branches: Vec<usize> = (0..net.branches.len()).collect();
    extract_into(net, &cp.vars, &sol.x, &all_buses, &all_branches, &mut op);
    for (z, t) in cp.terms.iter().enumerate() {
        op.phi[z] = sol.x[cp.vars.phi[z]];
        op.f[z] = evaluate_objectives(net, &cp.vars, t, &sol.x, cp.v_spec);
    }
    Ok(CentralizedSolution { point: op, solution: sol })
}
