//! Scaled consensus ADMM across zone programs.
//!
//! Every consensus block is a vector of variables that appears in exactly two
//! zones. One iteration is:
//!
//! 1. each zone minimises `f_a(x) + Σ ρ/2 ‖X_a - X_K + u_a‖²` over its blocks;
//! 2. `X_K = (X_a + X_b) / 2` per block;
//! 3. residuals `r = ‖X_a - X_b‖`, `d_a = ‖X_a^m - X_a^(m-1)‖`;
//! 4. the penalty strategy may change `ρ`, giving `ω = ρ_old / ρ_new`;
//! 5. `u_a ← ω (u_a + X_a - X_K)`.
//!
//! Doing 4 before 5 keeps `ρ u` equal to the unscaled multiplier
//! `λ ← λ + ρ_old (X_a - X_K)` across penalty changes.
//!
//! Penalty, counters and duals live per block. The adaptive rules use the
//! block's `r` and the larger of its two sides' `d`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::cvx::{self, verify_kkt, ConvexProgram, KktSolution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyStrategy {
    Fixed,
    Adaptive,
    Improved,
}

impl PenaltyStrategy {
    pub const ALL: [PenaltyStrategy; 3] = [PenaltyStrategy::Fixed, PenaltyStrategy::Adaptive, PenaltyStrategy::Improved];

    pub fn name(self) -> &'static str {
        match self {
            PenaltyStrategy::Fixed => "fixed",
            PenaltyStrategy::Adaptive => "adaptive",
            PenaltyStrategy::Improved => "improved",
        }
    }
}

impl core::str::FromStr for PenaltyStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PenaltyStrategy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown penalty strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub rho0: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub strategy: PenaltyStrategy,
    /// Consecutive equal judgments before the improved rule acts.
    pub sigma: usize,
    /// Residual ratio that triggers a penalty change.
    pub mu_ratio: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            rho0: 250.0,
            eps: 1e-6,
            max_iter: 500,
            strategy: PenaltyStrategy::Improved,
            sigma: 3,
            mu_ratio: 10.0,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho0 > 0.0 && self.eps > 0.0 && self.sigma >= 1 && self.mu_ratio > 1.0 && self.max_iter >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "ADMM config needs rho0 > 0, eps > 0, sigma >= 1, mu_ratio > 1, max_iter >= 1; got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Judgment {
    Increase,
    Decrease,
    Hold,
}

/// Residual-balancing judgment. A zero residual means hold.
pub fn judge(r: f64, d: f64, mu_ratio: f64) -> Judgment {
    if r <= 0.0 || d <= 0.0 {
        Judgment::Hold
    } else if d < r / mu_ratio {
        Judgment::Increase
    } else if d > mu_ratio * r {
        Judgment::Decrease
    } else {
        Judgment::Hold
    }
}

fn apply(rho: f64, r: f64, d: f64, j: Judgment) -> f64 {
    match j {
        Judgment::Increase => rho * (1.0 + (r / d).log10()),
        Judgment::Decrease => rho / (1.0 + (d / r).log10()),
        Judgment::Hold => rho,
    }
}

/// One step of the traditional residual-balancing rule.
pub fn update_penalty_adaptive(rho: f64, r: f64, d: f64, mu_ratio: f64) -> f64 {
    apply(rho, r, d, judge(r, d, mu_ratio))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyState {
    pub rho: f64,
    /// `ρ_old / ρ_new` of the last update, 1 when `ρ` did not change.
    pub omega: f64,
    pub tau1: usize,
    pub tau2: usize,
}

impl PenaltyState {
    pub fn new(rho: f64) -> Self {
        PenaltyState {
            rho,
            omega: 1.0,
            tau1: 0,
            tau2: 0,
        }
    }
}

/// Counter-gated rule: the residual-balancing step fires only after `sigma`
/// identical consecutive judgments, then both counters restart.
pub fn update_penalty_improved(state: &mut PenaltyState, r: f64, d: f64, sigma: usize, mu_ratio: f64) {
    let j = judge(r, d, mu_ratio);
    match j {
        Judgment::Increase => {
            state.tau1 += 1;
            state.tau2 = 0;
        }
        Judgment::Decrease => {
            state.tau2 += 1;
            state.tau1 = 0;
        }
        Judgment::Hold => {
            state.tau1 = 0;
            state.tau2 = 0;
        }
    }
    state.omega = 1.0;
    if state.tau1 >= sigma || state.tau2 >= sigma {
        let new = apply(state.rho, r, d, j);
        state.omega = state.rho / new;
        state.rho = new;
        state.tau1 = 0;
        state.tau2 = 0;
    }
}

fn update_penalty(state: &mut PenaltyState, r: f64, d: f64, cfg: &AdmmConfig) {
    match cfg.strategy {
        PenaltyStrategy::Fixed => state.omega = 1.0,
        PenaltyStrategy::Adaptive => {
            let new = update_penalty_adaptive(state.rho, r, d, cfg.mu_ratio);
            state.omega = state.rho / new;
            state.rho = new;
        }
        PenaltyStrategy::Improved => update_penalty_improved(state, r, d, cfg.sigma, cfg.mu_ratio),
    }
}

/// `ω (u + x_a - x_ref)`.
pub fn rescale_dual(u: &[f64], omega: f64, x_a: &[f64], x_ref: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(x_a)
        .zip(x_ref)
        .map(|((u, a), k)| omega * (u + (a - k)))
        .collect()
}

pub fn norm2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Variables of one consensus block inside one zone program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub consensus: usize,
    pub vars: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmZone {
    pub program: ConvexProgram,
    pub blocks: Vec<Block>,
}

/// Runs the zone solves of one iteration. Implementations may run them
/// concurrently; results must come back in zone order.
pub trait Executor {
    fn map<R: Send, F: Fn(usize) -> R + Sync>(&self, n: usize, f: F) -> Vec<R>;
}

pub struct Sequential;

impl Executor for Sequential {
    fn map<R: Send, F: Fn(usize) -> R + Sync>(&self, n: usize, f: F) -> Vec<R> {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub zone: usize,
    pub consensus: usize,
    pub r: f64,
    pub d: f64,
    pub rho: f64,
}

/// State of one block side after an iteration, kept in record mode.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub iteration: usize,
    pub consensus: usize,
    pub zone: usize,
    pub x: Vec<f64>,
    pub x_ref: Vec<f64>,
    /// Dual after the update of this iteration.
    pub u: Vec<f64>,
    /// Penalty the solve of this iteration used.
    pub rho_used: f64,
    /// Penalty after the update of this iteration.
    pub rho: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmResult {
    /// Per-zone solutions of the returned iterate.
    pub solutions: Vec<KktSolution>,
    /// Averaged consensus value per block.
    pub x_ref: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Iteration whose solutions are returned; the last one when converged,
    /// the one with the smallest residual otherwise.
    pub returned_iteration: usize,
    pub trace: Vec<TraceRow>,
    pub iterates: Vec<IterateRecord>,
    pub final_rho: Vec<f64>,
    /// Largest independently recomputed KKT residual over all zone solves.
    pub max_kkt_residual: f64,
    /// Number of penalty changes over all blocks.
    pub penalty_changes: usize,
}

struct Side {
    zone: usize,
    block: usize,
}

struct Consensus {
    sides: [Side; 2],
    x_ref: Vec<f64>,
    u: [Vec<f64>; 2],
    prev: [Vec<f64>; 2],
    pen: PenaltyState,
}

fn augment(p: &ConvexProgram, blocks: &[Block], cons: &[Consensus], zone: usize) -> ConvexProgram {
    let mut aug = p.clone();
    for blk in blocks {
        let c = &cons[blk.consensus];
        let s = if c.sides[0].zone == zone { 0 } else { 1 };
        let rho = c.pen.rho;
        for (i, &v) in blk.vars.iter().enumerate() {
            let target = c.x_ref[i] - c.u[s][i];
            aug.q[(v, v)] += rho;
            aug.c[v] -= rho * target;
        }
    }
    aug
}

/// Runs ADMM from the consensus start `x0` (one vector per block) with zero
/// duals. `record` keeps every block side's iterate.
pub fn run<E: Executor>(zones: &[AdmmZone], x0: &[Vec<f64>], cfg: &AdmmConfig, exec: &E, record: bool) -> Result<AdmmResult> {
    cfg.validate()?;
    let mut cons = link(zones, x0, cfg.rho0)?;
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut max_kkt: f64 = 0.0;
    let mut changes = 0;
    let mut best: Option<(f64, usize, Vec<KktSolution>, Vec<Vec<f64>>)> = None;

    for m in 1..=cfg.max_iter {
        let progs: Vec<ConvexProgram> = (0..zones.len()).map(|z| augment(&zones[z].program, &zones[z].blocks, &cons, z)).collect();
        let sols = exec.map(zones.len(), |z| -> Result<(KktSolution, f64)> {
            let sol = cvx::solve(&progs[z])?.into_optimal(format!("zone {z} at ADMM iteration {m}"))?;
            let kkt = verify_kkt(&progs[z], &sol).max();
            Ok((sol, kkt))
        });
        let mut solutions = Vec::with_capacity(zones.len());
        for s in sols {
            let (sol, kkt) = s?;
            max_kkt = max_kkt.max(kkt);
            solutions.push(sol);
        }

        let mut worst: f64 = 0.0;
        for (k, c) in cons.iter_mut().enumerate() {
            let xs: [Vec<f64>; 2] = core::array::from_fn(|s| {
                let side = &c.sides[s];
                zones[side.zone].blocks[side.block].vars.iter().map(|&v| solutions[side.zone].x[v]).collect()
            });
            c.x_ref = xs[0].iter().zip(&xs[1]).map(|(a, b)| 0.5 * (a + b)).collect();
            let r = norm2(&xs[0], &xs[1]);
            let d: [f64; 2] = core::array::from_fn(|s| norm2(&xs[s], &c.prev[s]));
            let rho_used = c.pen.rho;
            for s in 0..2 {
                trace.push(TraceRow {
                    iteration: m,
                    zone: c.sides[s].zone,
                    consensus: k,
                    r,
                    d: d[s],
                    rho: rho_used,
                });
            }
            let dmax = d[0].max(d[1]);
            worst = worst.max(r).max(dmax);

            update_penalty(&mut c.pen, r, dmax, cfg);
            if c.pen.omega != 1.0 {
                changes += 1;
            }
            for s in 0..2 {
                c.u[s] = rescale_dual(&c.u[s], c.pen.omega, &xs[s], &c.x_ref);
                if record {
                    iterates.push(IterateRecord {
                        iteration: m,
                        consensus: k,
                        zone: c.sides[s].zone,
                        x: xs[s].clone(),
                        x_ref: c.x_ref.clone(),
                        u: c.u[s].clone(),
                        rho_used,
                        rho: c.pen.rho,
                        omega: c.pen.omega,
                    });
                }
            }
            c.prev = xs;
        }

        let converged = worst <= cfg.eps;
        if converged || best.as_ref().is_none_or(|b| worst < b.0) {
            best = Some((worst, m, solutions, cons.iter().map(|c| c.x_ref.clone()).collect()));
        }
        if converged || m == cfg.max_iter {
            let (_, at, solutions, x_ref) = best.expect("at least one iteration ran");
            return Ok(AdmmResult {
                solutions,
                x_ref,
                iterations: m,
                converged,
                returned_iteration: at,
                trace,
                iterates,
                final_rho: cons.iter().map(|c| c.pen.rho).collect(),
                max_kkt_residual: max_kkt,
                penalty_changes: changes,
            });
        }
    }
    unreachable!("max_iter >= 1 is validated")
}

fn link(zones: &[AdmmZone], x0: &[Vec<f64>], rho0: f64) -> Result<Vec<Consensus>> {
    let mut sides: Vec<Vec<Side>> = (0..x0.len()).map(|_| Vec::new()).collect();
    for (z, zone) in zones.iter().enumerate() {
        for (b, blk) in zone.blocks.iter().enumerate() {
            let slot = sides
                .get_mut(blk.consensus)
                .ok_or_else(|| Error::InvalidArgument(format!("zone {z} refers to unknown consensus block {}", blk.consensus)))?;
            if blk.vars.len() != x0[blk.consensus].len() {
                return Err(Error::InvalidArgument(format!("block {} of zone {z} has the wrong size", blk.consensus)));
            }
            slot.push(Side { zone: z, block: b });
        }
    }
    sides
        .into_iter()
        .zip(x0)
        .enumerate()
        .map(|(k, (s, x))| {
            let [a, b]: [Side; 2] = s
                .try_into()
                .map_err(|_| Error::InvalidArgument(format!("consensus block {k} must be shared by exactly two zones")))?;
            if a.zone == b.zone {
                return Err(Error::InvalidArgument(format!("consensus block {k} appears twice in zone {}", a.zone)));
            }
            Ok(Consensus {
                sides: [a, b],
                x_ref: x.clone(),
                u: [vec![0.0; x.len()], vec![0.0; x.len()]],
                prev: [x.clone(), x.clone()],
                pen: PenaltyState::new(rho0),
            })
        })
        .collect()
}

/// Primal vector of a zone's solution at the given variables.
pub fn values(sol: &KktSolution, vars: &[usize]) -> Vec<f64> {
    vars.iter().map(|&v| sol.x[v]).collect()
}

/// Scalar zone `min (x - c)²` whose one variable joins every listed
/// consensus block.
pub fn scalar_zone(c: f64, consensus: &[usize]) -> AdmmZone {
    let n = 1;
    let mut p = ConvexProgram::empty(n);
    p.q[(0, 0)] = 2.0;
    p.c = DVector::from_element(1, -2.0 * c);
    AdmmZone {
        program: p,
        blocks: consensus.iter().map(|&k| Block { consensus: k, vars: vec![0] }).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_rule_values() {
        let up = update_penalty_adaptive(250.0, 1.0, 0.05, 10.0);
        assert!((up - 575.257).abs() < 1e-2, "{up}");
        let down = update_penalty_adaptive(250.0, 0.05, 1.0, 10.0);
        assert!((down - 108.65).abs() < 1e-2, "{down}");
        assert_eq!(update_penalty_adaptive(250.0, 1.0, 1.0, 10.0), 250.0);
        assert_eq!(update_penalty_adaptive(250.0, 0.0, 1.0, 10.0), 250.0);
        assert_eq!(update_penalty_adaptive(250.0, 1.0, 0.0, 10.0), 250.0);
    }

    #[test]
    fn trigger_boundary_factor_is_two() {
        let r = 1.0;
        let d = 0.1 * (1.0 - 1e-12);
        let up = update_penalty_adaptive(1.0, r, d, 10.0);
        assert!((up - 2.0).abs() < 1e-9);
    }

    #[test]
    fn improved_fires_on_sixth_call() {
        use Judgment::*;
        let mut st = PenaltyState::new(250.0);
        let seq = [Increase, Increase, Hold, Increase, Increase, Increase];
        let mut changed_at = Vec::new();
        for (i, j) in seq.iter().enumerate() {
            let (r, d) = match j {
                Increase => (1.0, 0.01),
                Decrease => (0.01, 1.0),
                Hold => (1.0, 1.0),
            };
            let before = st.rho;
            update_penalty_improved(&mut st, r, d, 3, 10.0);
            if st.rho != before {
                changed_at.push(i + 1);
                assert!((st.omega - before / st.rho).abs() < 1e-15);
            } else {
                assert_eq!(st.omega, 1.0);
            }
            assert!(st.tau1 == 0 || st.tau2 == 0);
        }
        assert_eq!(changed_at, vec![6]);
    }

    #[test]
    fn sigma_one_matches_adaptive() {
        let mut st = PenaltyState::new(250.0);
        let mut rho = 250.0;
        for &(r, d) in &[(1.0, 0.01), (0.3, 0.2), (0.01, 2.0), (1e-3, 1e-1), (5.0, 0.4)] {
            update_penalty_improved(&mut st, r, d, 1, 10.0);
            rho = update_penalty_adaptive(rho, r, d, 10.0);
            assert_eq!(st.rho, rho);
        }
    }

    #[test]
    fn alternating_never_fires() {
        let mut st = PenaltyState::new(250.0);
        for i in 0..50 {
            let (r, d) = if i % 2 == 0 { (1.0, 0.01) } else { (0.01, 1.0) };
            update_penalty_improved(&mut st, r, d, 2, 10.0);
            assert_eq!(st.rho, 250.0);
        }
    }

    #[test]
    fn dual_rescale() {
        assert_eq!(rescale_dual(&[0.7], 1.0, &[2.0], &[2.0]), vec![0.7]);
        let w = 250.0 / 575.26;
        let u = rescale_dual(&[0.0], w, &[1.0], &[0.0]);
        assert!((u[0] - 0.4346).abs() < 1e-4);
        // λ = ρ u held fixed while ρ doubles
        let u = rescale_dual(&[0.8], 0.5, &[0.0], &[0.0]);
        assert_eq!(u[0], 0.4);
    }

    #[test]
    fn residual_norms() {
        assert!((norm2(&[1.0, 0.0], &[0.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(norm2(&[0.3, 0.1], &[0.3, 0.1]), 0.0);
    }

    #[test]
    fn two_zone_consensus_reaches_average() {
        let zones = [scalar_zone(1.0, &[0]), scalar_zone(3.0, &[0])];
        for strategy in PenaltyStrategy::ALL {
            let cfg = AdmmConfig {
                rho0: 1.0,
                strategy,
                ..AdmmConfig::default()
            };
            let res = run(&zones, &[vec![0.0]], &cfg, &Sequential, false).unwrap();
            assert!(res.converged, "{strategy:?}");
            assert!((res.x_ref[0][0] - 2.0).abs() < 1e-5, "{strategy:?}: {:?}", res.x_ref);
        }
    }

    #[test]
    fn consistent_start_converges_at_once() {
        let zones = [scalar_zone(2.0, &[0]), scalar_zone(2.0, &[0])];
        let res = run(&zones, &[vec![2.0]], &AdmmConfig::default(), &Sequential, false).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        // zero up to the solver tolerance
        assert!(res.trace.iter().all(|t| t.r < 1e-10 && t.d < 1e-10), "{:?}", res.trace);
    }

    #[test]
    fn block_shared_once_rejected() {
        let zones = [scalar_zone(1.0, &[0])];
        assert!(run(&zones, &[vec![0.0]], &AdmmConfig::default(), &Sequential, false).is_err());
    }

    /// Unscaled iteration with the penalty sequence of a recorded run: each
    /// zone minimises `f(x) + λ(x - X_K) + ρ/2 (x - X_K)²` and
    /// `λ ← λ + ρ (x - X_K_new)`.
    #[test]
    fn scaled_matches_unscaled_reference() {
        let c = [1.0, 3.0];
        let zones = [scalar_zone(c[0], &[0]), scalar_zone(c[1], &[0])];
        for strategy in PenaltyStrategy::ALL {
            let cfg = AdmmConfig {
                strategy,
                sigma: 2,
                ..AdmmConfig::default()
            };
            let res = run(&zones, &[vec![0.0]], &cfg, &Sequential, true).unwrap();
            let mut lam = [0.0f64; 2];
            let mut xk = 0.0;
            let iters = res.iterates.iter().map(|r| r.iteration).max().unwrap();
            for m in 1..=iters {
                let recs: Vec<&IterateRecord> = res.iterates.iter().filter(|r| r.iteration == m).collect();
                let rho = recs[0].rho_used;
                // argmin (x-c)² + λx + ρ/2 (x - xk)²
                let x: Vec<f64> = (0..2).map(|s| (2.0 * c[s] - lam[s] + rho * xk) / (2.0 + rho)).collect();
                xk = 0.5 * (x[0] + x[1]);
                for s in 0..2 {
                    lam[s] += rho * (x[s] - xk);
                    let rec = recs.iter().find(|r| r.zone == s).unwrap();
                    assert!((rec.x[0] - x[s]).abs() < 1e-9, "{strategy:?} m={m}");
                    assert!((rec.rho * rec.u[0] - lam[s]).abs() < 1e-9, "{strategy:?} m={m}");
                }
            }
        }
    }
}
