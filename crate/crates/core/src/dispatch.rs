//! Day-ahead economic dispatch of one microgrid.
//!
//! Per hour `t` the program has `p_mt, p_de, p_dis, p_ch` [kW] and `soc`.
//! The tie-line power from the upper level is fixed, positive when the
//! microgrid imports:
//!
//! ```text
//! p_mt + p_de + p_dis - p_ch + p_pcc = load - pv - wind
//! soc[t] = soc[t-1] + η_ch p_ch / E - p_dis / (η_dis E)        (Δt = 1 h)
//! ```
//!
//! The battery's degradation cost applies to throughput `p_dis + p_ch`, so
//! charging and discharging in the same hour never pays.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::cvx::{self, ConvexProgram, ProgramBuilder, SolveStatus};
use crate::opf::PccLimits;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Microturbine {
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// Output before the first hour, the anchor of the first ramp [kW].
    pub p_init: f64,
    /// [$/kWh]
    pub k_op: f64,
    pub eta: f64,
    /// Gas lower heating value [kWh/m³].
    pub l_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diesel {
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub p_init: f64,
    /// [$/kWh]
    pub k_op: f64,
    /// Fuel price [$/L].
    pub k_fu: f64,
    /// Fuel curve `α p² + β p + γ` with `p = P / p_norm`.
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Power normalising the fuel curve [kW].
    pub p_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Battery {
    /// [kWh]
    pub capacity: f64,
    /// Charge and discharge limit [kW].
    pub p_max: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc0: f64,
    /// Degradation cost [$/kW of throughput per hour].
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgConfig {
    pub mt: Microturbine,
    pub de: Diesel,
    pub bess: Battery,
    /// Hourly profiles [kW].
    pub load: Vec<f64>,
    pub pv: Vec<f64>,
    pub wind: Vec<f64>,
}

impl MgConfig {
    pub fn horizon(&self) -> usize {
        self.load.len()
    }

    pub fn net_load(&self, t: usize) -> f64 {
        self.load[t] - self.pv[t] - self.wind[t]
    }

    pub fn validate(&self) -> Vec<alloc::string::String> {
        use alloc::format;
        let mut v = Vec::new();
        let b = &self.bess;
        if !(0.0 < b.soc_min && b.soc_min < b.soc0 && b.soc0 < b.soc_max && b.soc_max <= 1.0) {
            v.push(format!(
                "bess: need 0 < soc_min < soc0 < soc_max <= 1, got {} / {} / {}",
                b.soc_min, b.soc0, b.soc_max
            ));
        }
        if !(b.capacity > 0.0 && b.p_max >= 0.0 && b.eta_ch > 0.0 && b.eta_dis > 0.0) {
            v.push(String::from("bess: capacity, efficiencies must be > 0"));
        }
        for (name, pmin, pmax, up, down) in [
            ("mt", self.mt.p_min, self.mt.p_max, self.mt.ramp_up, self.mt.ramp_down),
            ("de", self.de.p_min, self.de.p_max, self.de.ramp_up, self.de.ramp_down),
        ] {
            if !(pmin <= pmax) {
                v.push(format!("{name}: p_min must be <= p_max"));
            }
            if !(up > 0.0 && down > 0.0) {
                v.push(format!("{name}: ramp limits must be > 0"));
            }
        }
        if !(self.mt.eta > 0.0 && self.mt.l_g > 0.0) {
            v.push(String::from("mt: eta and l_g must be > 0"));
        }
        if !(self.de.p_norm > 0.0) {
            v.push(String::from("de: p_norm must be > 0"));
        }
        let t = self.load.len();
        if self.pv.len() != t || self.wind.len() != t {
            v.push(String::from("profiles: load, pv and wind must have equal length"));
        }
        v
    }
}

/// Output range a unit can take in every hour regardless of where it sat the
/// hour before: reachable from its initial output, and narrow enough that any
/// move inside it respects both ramp limits.
fn ramp_safe(p_min: f64, p_max: f64, init: f64, up: f64, down: f64) -> (f64, f64) {
    let lo = p_min.max(init - down);
    let hi = p_max.min(init + up).min(lo + up.min(down));
    (lo, hi.max(lo))
}

/// Battery power that can be held for the whole horizon in either direction
/// without leaving the SOC window.
fn sustainable_bess(b: &Battery, horizon: usize) -> f64 {
    let t = horizon.max(1) as f64;
    let dis = (b.soc0 - b.soc_min) * b.capacity * b.eta_dis / t;
    let ch = (b.soc_max - b.soc0) * b.capacity / (b.eta_ch * t);
    b.p_max.min(dis).min(ch).max(0.0)
}

/// Tie-line window for hour `t`. Any schedule that stays inside the window
/// every hour can be followed by the dispatch. The window is clipped to
/// `±cap` unless that would empty it. Reactive exchange is limited to
/// `q_ratio` times the larger active bound.
pub fn pcc_window(cfg: &MgConfig, t: usize, cap: f64, q_ratio: f64) -> PccLimits {
    let (mt_lo, mt_hi) = ramp_safe(cfg.mt.p_min, cfg.mt.p_max, cfg.mt.p_init, cfg.mt.ramp_up, cfg.mt.ramp_down);
    let (de_lo, de_hi) = ramp_safe(cfg.de.p_min, cfg.de.p_max, cfg.de.p_init, cfg.de.ramp_up, cfg.de.ramp_down);
    let b = sustainable_bess(&cfg.bess, cfg.horizon());
    let nl = cfg.net_load(t);
    let mut p_min = nl - (mt_hi + de_hi + b);
    let mut p_max = nl - (mt_lo + de_lo) + b;
    if p_min.max(-cap) <= p_max.min(cap) {
        p_min = p_min.max(-cap);
        p_max = p_max.min(cap);
    }
    PccLimits {
        p_min,
        p_max,
        q_max: q_ratio * p_min.abs().max(p_max.abs()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub mt_op: f64,
    pub mt_fu: f64,
    pub de_op: f64,
    pub de_fu: f64,
    pub bess: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.mt_op + self.mt_fu + self.de_op + self.de_fu + self.bess
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgSchedule {
    pub p_mt: Vec<f64>,
    pub p_de: Vec<f64>,
    pub p_dis: Vec<f64>,
    pub p_ch: Vec<f64>,
    pub soc: Vec<f64>,
    pub p_pcc: Vec<f64>,
    pub cost: CostBreakdown,
    /// Cost per hour, in the same breakdown.
    pub hourly: Vec<CostBreakdown>,
}

impl MgSchedule {
    /// Net battery output, positive when discharging.
    pub fn p_bess(&self, t: usize) -> f64 {
        self.p_dis[t] - self.p_ch[t]
    }
}

/// SOC after one hour at the given charge and discharge power.
pub fn soc_step(b: &Battery, soc: f64, p_ch: f64, p_dis: f64) -> f64 {
    soc + b.eta_ch * p_ch / b.capacity - p_dis / (b.eta_dis * b.capacity)
}

fn mt_fuel_rate(cfg: &MgConfig, gas: f64) -> f64 {
    gas / (cfg.mt.eta * cfg.mt.l_g)
}

pub fn evaluate_cost(
    cfg: &MgConfig,
    gas_price: &[f64],
    p_mt: &[f64],
    p_de: &[f64],
    p_dis: &[f64],
    p_ch: &[f64],
) -> (CostBreakdown, Vec<CostBreakdown>) {
    let de = &cfg.de;
    let hourly: Vec<CostBreakdown> = (0..p_mt.len())
        .map(|t| {
            let x = p_de[t] / de.p_norm;
            CostBreakdown {
                mt_op: cfg.mt.k_op * p_mt[t],
                mt_fu: mt_fuel_rate(cfg, gas_price[t]) * p_mt[t],
                de_op: de.k_op * p_de[t],
                de_fu: de.k_fu * (de.alpha * x * x + de.beta * x + de.gamma),
                bess: cfg.bess.zeta * (p_dis[t] + p_ch[t]),
            }
        })
        .collect();
    let mut total = CostBreakdown::default();
    for h in &hourly {
        total.mt_op += h.mt_op;
        total.mt_fu += h.mt_fu;
        total.de_op += h.de_op;
        total.de_fu += h.de_fu;
        total.bess += h.bess;
    }
    (total, hourly)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchProgram {
    pub program: ConvexProgram,
    pub horizon: usize,
    /// Objective terms independent of the decision (DE fuel intercept).
    pub constant: f64,
    pub pcc: Vec<f64>,
}

impl DispatchProgram {
    pub fn var(&self, t: usize, k: usize) -> usize {
        5 * t + k
    }
}

const MT: usize = 0;
const DE: usize = 1;
const DIS: usize = 2;
const CH: usize = 3;
const SOC: usize = 4;

pub fn build_dispatch(cfg: &MgConfig, pcc: &[f64], gas_price: &[f64]) -> Result<DispatchProgram> {
    let n_t = pcc.len();
    if gas_price.len() < n_t || cfg.horizon() < n_t {
        return Err(Error::InvalidArgument("dispatch horizon longer than profiles or prices".into()));
    }
    let (mt, de, bs) = (&cfg.mt, &cfg.de, &cfg.bess);
    let mut b = ProgramBuilder::new();
    for t in 0..n_t {
        let h = t + 1;
        b.var(alloc::format!("p_mt{h}"), mt.p_min, mt.p_max);
        b.var(alloc::format!("p_de{h}"), de.p_min, de.p_max);
        b.var(alloc::format!("p_dis{h}"), 0.0, bs.p_max);
        b.var(alloc::format!("p_ch{h}"), 0.0, bs.p_max);
        b.var(alloc::format!("soc{h}"), bs.soc_min, bs.soc_max);
    }
    let v = |t: usize, k: usize| 5 * t + k;
    let mut constant = 0.0;
    for t in 0..n_t {
        b.add_linear_cost(v(t, MT), mt.k_op + mt_fuel_rate(cfg, gas_price[t]));
        b.add_linear_cost(v(t, DE), de.k_op + de.k_fu * de.beta / de.p_norm);
        b.add_quad_cost(v(t, DE), v(t, DE), 2.0 * de.k_fu * de.alpha / (de.p_norm * de.p_norm));
        b.add_linear_cost(v(t, DIS), bs.zeta);
        b.add_linear_cost(v(t, CH), bs.zeta);
        constant += de.k_fu * de.gamma;

        b.eq(
            vec![(v(t, MT), 1.0), (v(t, DE), 1.0), (v(t, DIS), 1.0), (v(t, CH), -1.0)],
            cfg.net_load(t) - pcc[t],
        );
        let mut soc_row = vec![
            (v(t, SOC), 1.0),
            (v(t, CH), -bs.eta_ch / bs.capacity),
            (v(t, DIS), 1.0 / (bs.eta_dis * bs.capacity)),
        ];
        if t == 0 {
            b.eq(soc_row, bs.soc0);
        } else {
            soc_row.push((v(t - 1, SOC), -1.0));
            b.eq(soc_row, 0.0);
        }
        for (k, init, up, down) in [(MT, mt.p_init, mt.ramp_up, mt.ramp_down), (DE, de.p_init, de.ramp_up, de.ramp_down)] {
            if t == 0 {
                b.le(vec![(v(0, k), 1.0)], init + up);
                b.le(vec![(v(0, k), -1.0)], down - init);
            } else {
                b.le(vec![(v(t, k), 1.0), (v(t - 1, k), -1.0)], up);
                b.le(vec![(v(t - 1, k), 1.0), (v(t, k), -1.0)], down);
            }
        }
    }
    Ok(DispatchProgram {
        program: b.build(),
        horizon: n_t,
        constant,
        pcc: pcc.to_vec(),
    })
}

/// Solves the dispatch. On infeasibility, finds the first hour from which the
/// schedule can no longer be followed by re-solving growing prefixes.
pub fn solve_dispatch(cfg: &MgConfig, dp: &DispatchProgram, gas_price: &[f64], mg: usize) -> Result<MgSchedule> {
    let sol = cvx::solve(&dp.program)?;
    if sol.status == SolveStatus::Infeasible {
        return Err(Error::DispatchInfeasible {
            mg,
            hour: binding_hour(cfg, &dp.pcc, gas_price)? + 1,
        });
    }
    let sol = sol.into_optimal(alloc::format!("dispatch of microgrid {mg}"))?;
    let n_t = dp.horizon;
    let col = |k: usize| -> Vec<f64> { (0..n_t).map(|t| sol.x[dp.var(t, k)]).collect() };
    let (p_mt, p_de, p_dis, p_ch, soc) = (col(MT), col(DE), col(DIS), col(CH), col(SOC));
    let (cost, hourly) = evaluate_cost(cfg, gas_price, &p_mt, &p_de, &p_dis, &p_ch);
    Ok(MgSchedule {
        p_mt,
        p_de,
        p_dis,
        p_ch,
        soc,
        p_pcc: dp.pcc.clone(),
        cost,
        hourly,
    })
}

fn binding_hour(cfg: &MgConfig, pcc: &[f64], gas: &[f64]) -> Result<usize> {
    for len in 1..=pcc.len() {
        let p = build_dispatch(cfg, &pcc[..len], gas)?;
        if cvx::solve(&p.program)?.status == SolveStatus::Infeasible {
            return Ok(len - 1);
        }
    }
    Ok(pcc.len().saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cfg(t: usize) -> MgConfig {
        MgConfig {
            mt: Microturbine {
                p_min: 10.0,
                p_max: 300.0,
                ramp_up: 120.0,
                ramp_down: 180.0,
                p_init: 10.0,
                k_op: 0.0126,
                eta: 0.3,
                l_g: 9.7,
            },
            de: Diesel {
                p_min: 5.0,
                p_max: 300.0,
                ramp_up: 160.0,
                ramp_down: 180.0,
                p_init: 10.0,
                k_op: 0.0063,
                k_fu: 1.0,
                alpha: 2.6667,
                beta: 0.1637,
                gamma: 0.00015,
                p_norm: 300.0,
            },
            bess: Battery {
                capacity: 800.0,
                p_max: 120.0,
                eta_ch: 0.92,
                eta_dis: 0.92,
                soc_min: 0.2,
                soc_max: 0.9,
                soc0: 0.5,
                zeta: 0.123,
            },
            load: vec![0.0; t],
            pv: vec![0.0; t],
            wind: vec![0.0; t],
        }
    }

    #[test]
    fn soc_after_one_hour_discharge() {
        let c = cfg(1);
        assert!((soc_step(&c.bess, 0.5, 0.0, 120.0) - (0.5 - 120.0 / (0.92 * 800.0))).abs() < 1e-15);
        assert!((soc_step(&c.bess, 0.5, 0.0, 120.0) - 0.33696).abs() < 1e-5);
    }

    #[test]
    fn cost_coefficients() {
        let c = cfg(1);
        let (b, _) = evaluate_cost(&c, &[0.4], &[100.0], &[0.0], &[100.0], &[0.0]);
        assert!((b.mt_op - 1.26).abs() < 1e-12);
        assert!((b.bess - 12.3).abs() < 1e-12);
        assert!((b.de_fu - 0.00015).abs() < 1e-15);
        let mut z = cfg(1);
        z.de.gamma = 0.0;
        let (b, _) = evaluate_cost(&z, &[0.4], &[0.0], &[0.0], &[0.0], &[0.0]);
        assert_eq!(b.total(), 0.0);
    }

    #[test]
    fn floors_exported_when_nothing_to_serve() {
        let c = cfg(4);
        let pcc = vec![-15.0; 4];
        let dp = build_dispatch(&c, &pcc, &[0.3; 4]).unwrap();
        let s = solve_dispatch(&c, &dp, &[0.3; 4], 0).unwrap();
        for t in 0..4 {
            assert!((s.p_mt[t] - 10.0).abs() < 1e-6 && (s.p_de[t] - 5.0).abs() < 1e-6);
            assert!(s.p_dis[t] < 1e-6 && s.p_ch[t] < 1e-6);
        }
        let (floor, _) = evaluate_cost(&c, &[0.3; 4], &[10.0; 4], &[5.0; 4], &[0.0; 4], &[0.0; 4]);
        assert!((s.cost.total() - floor.total()).abs() < 1e-5);
    }

    #[test]
    fn first_hour_ramp_covered_by_battery() {
        let mut c = cfg(2);
        c.load = vec![200.0; 2];
        c.de.p_min = 0.0;
        c.de.k_fu = 1000.0;
        let dp = build_dispatch(&c, &[0.0, 0.0], &[0.3, 0.3]).unwrap();
        let s = solve_dispatch(&c, &dp, &[0.3, 0.3], 0).unwrap();
        assert!((s.p_mt[0] - 130.0).abs() < 1e-5, "{:?}", s.p_mt);
        assert!((s.p_dis[0] - 70.0).abs() < 1e-5, "{:?}", s.p_dis);
        assert!((s.p_mt[1] - 200.0).abs() < 1e-5);
        let obj = cvx::solve(&dp.program).unwrap().objective + dp.constant;
        assert!((obj - s.cost.total()).abs() < 1e-6);
    }

    #[test]
    fn impossible_schedule_names_the_hour() {
        let mut c = cfg(3);
        c.load = vec![100.0, 100.0, 100.0];
        // hour 3 asks for 900 kW of local generation
        let pcc = [0.0, 0.0, -800.0];
        let dp = build_dispatch(&c, &pcc, &[0.3; 3]).unwrap();
        let e = solve_dispatch(&c, &dp, &[0.3; 3], 1).unwrap_err();
        assert_eq!(e, Error::DispatchInfeasible { mg: 1, hour: 3 });
        assert!(e.is_infeasible());
    }

    #[test]
    fn window_is_ramp_safe() {
        let mut c = cfg(24);
        c.load = vec![150.0; 24];
        let w = pcc_window(&c, 0, 500.0, 0.4);
        // MT 10..130, DE 5..165, battery 800 kWh sustains 9.2 kW for a day
        let b = (0.3 * 800.0 * 0.92 / 24.0f64).min(0.4 * 800.0 / (0.92 * 24.0));
        assert!((w.p_min - (150.0 - 295.0 - b)).abs() < 1e-12);
        assert!((w.p_max - (150.0 - 15.0 + b)).abs() < 1e-12);
        assert!((w.q_max - 0.4 * w.p_min.abs().max(w.p_max.abs())).abs() < 1e-12);
    }
}
