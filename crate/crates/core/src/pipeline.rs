//! Hour-by-hour flow of a run.
//!
//! For each hour: base-case power flow, sensitivities, zoning, objective
//! bounds, ADMM over the zone programs, and an AC power flow of the resulting
//! operating point. Once every hour is solved, each microgrid runs its 24-hour
//! dispatch against the tie-line schedule the upper level chose.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::admm::{self, AdmmConfig, AdmmResult, AdmmZone, Block, Executor};
use crate::dispatch::{self, MgSchedule};
use crate::network::Radial;
use crate::opf::{
    self, HourData, ObjectiveBounds, OperatingPoint, PccLimits, ZoneSubproblem,
};
use crate::powerflow::{self, PfSolution, SensitivityMatrix};
use crate::scenario::Scenario;
use crate::zoning::{self, ZonePartition};
use crate::Result;

/// Inputs of the ADMM stage of one hour.
#[derive(Debug, Clone)]
pub struct HourPlan {
    /// Hour index, 0-based.
    pub hour: usize,
    pub radial: Radial,
    pub base_pf: PfSolution,
    /// `None` when the network has no microgrid.
    pub sensitivity: Option<SensitivityMatrix>,
    pub partition: ZonePartition,
    pub pcc: Vec<PccLimits>,
    pub bounds: Vec<ObjectiveBounds>,
    pub zones: Vec<ZoneSubproblem>,
    /// LinDistFlow baseline value of every overlap block.
    pub x0: Vec<Vec<f64>>,
}

impl HourPlan {
    pub fn data<'a>(&'a self, sc: &'a Scenario) -> HourData<'a> {
        HourData {
            net: &sc.network,
            radial: &self.radial,
            hour: self.hour,
            pcc: &self.pcc,
        }
    }

    pub fn admm_zones(&self) -> Vec<AdmmZone> {
        self.zones
            .iter()
            .map(|z| AdmmZone {
                program: z.program.clone(),
                blocks: z
                    .boundary
                    .iter()
                    .map(|b| Block {
                        consensus: b.overlap,
                        vars: b.vars.to_vec(),
                    })
                    .collect(),
            })
            .collect()
    }
}

pub fn plan_hour(sc: &Scenario, t: usize) -> Result<HourPlan> {
    let label = t + 1;
    let net = &sc.network;
    let radial = net.radial().map_err(|e| e.at("network", label))?;
    let base_pf = powerflow::solve_pf(net, &net.base_injections(t)).map_err(|e| e.at("base power flow", label))?;
    let mg = net.mg_buses();
    let (sensitivity, partition) = if mg.is_empty() {
        (None, ZonePartition::single(net))
    } else {
        let s = powerflow::sensitivity(net, &base_pf, &mg).map_err(|e| e.at("sensitivity", label))?;
        let p = zoning::partition(&s, net).map_err(|e| e.at("zoning", label))?;
        (Some(s), p)
    };
    let pcc = sc.pcc_limits(t);
    let d = HourData {
        net,
        radial: &radial,
        hour: t,
        pcc: &pcc,
    };
    let bounds = (0..partition.n_zones())
        .map(|z| opf::compute_objective_bounds(&d, &partition, z, &sc.opf))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at("objective bounds", label))?;
    let zones = (0..partition.n_zones())
        .map(|z| opf::build_zone_subproblem(&d, &partition, z, bounds[z], &sc.opf))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at("zone programs", label))?;
    let (bp, bq, bu) = opf::baseline(&d);
    let x0 = partition
        .overlaps
        .iter()
        .map(|o| {
            let (up, dn) = radial.oriented[o.branch];
            vec![bp[o.branch], bq[o.branch], bu[up], bu[dn]]
        })
        .collect();
    Ok(HourPlan {
        hour: t,
        radial,
        base_pf,
        sensitivity,
        partition,
        pcc,
        bounds,
        zones,
        x0,
    })
}

/// Network-wide point from the zone solutions: every zone contributes its
/// own buses and intra-zone branches, overlap flows come from the consensus
/// average.
pub fn assemble_point(sc: &Scenario, plan: &HourPlan, res: &AdmmResult) -> OperatingPoint {
    let net = &sc.network;
    let part = &plan.partition;
    let mut op = OperatingPoint::zeros(net, part.n_zones());
    for (z, zp) in plan.zones.iter().enumerate() {
        let x = &res.solutions[z].x;
        let buses = part.buses_of(z);
        let branches = part.intra_branches(net, &plan.radial, z);
        opf::extract_into(net, &zp.vars, x, &buses, &branches, &mut op);
        op.phi[z] = zp.phi(x);
        op.f[z] = zp.objectives(net, x);
    }
    for (k, o) in part.overlaps.iter().enumerate() {
        op.p[o.branch] = res.x_ref[k][0];
        op.q[o.branch] = res.x_ref[k][1];
    }
    op
}

#[derive(Debug, Clone)]
pub struct HourOutcome {
    pub plan: HourPlan,
    pub admm: AdmmResult,
    pub point: OperatingPoint,
    /// AC power flow of the optimised injections.
    pub pf_after: PfSolution,
}

impl HourOutcome {
    pub fn losses_before(&self) -> f64 {
        self.plan.base_pf.losses
    }

    pub fn losses_after(&self) -> f64 {
        self.pf_after.losses
    }

    pub fn dev_before(&self) -> f64 {
        self.plan.base_pf.mean_voltage_deviation()
    }

    pub fn dev_after(&self) -> f64 {
        self.pf_after.mean_voltage_deviation()
    }
}

pub fn solve_planned<E: Executor>(sc: &Scenario, plan: HourPlan, cfg: &AdmmConfig, exec: &E, record: bool) -> Result<HourOutcome> {
    let label = plan.hour + 1;
    let res = admm::run(&plan.admm_zones(), &plan.x0, cfg, exec, record).map_err(|e| e.at("ADMM", label))?;
    let point = assemble_point(sc, &plan, &res);
    let pf_after =
        powerflow::solve_pf(&sc.network, &point.injections(&sc.network, plan.hour)).map_err(|e| e.at("verification power flow", label))?;
    Ok(HourOutcome {
        plan,
        admm: res,
        point,
        pf_after,
    })
}

pub fn solve_hour<E: Executor>(sc: &Scenario, t: usize, cfg: &AdmmConfig, exec: &E) -> Result<HourOutcome> {
    solve_planned(sc, plan_hour(sc, t)?, cfg, exec, false)
}

/// Tie-line schedule per microgrid [kW], read from the hourly points.
pub fn tie_line_schedule(sc: &Scenario, hours: &[HourOutcome]) -> Vec<Vec<f64>> {
    let mut sched = vec![vec![0.0; hours.len()]; sc.mgs.len()];
    for (t, h) in hours.iter().enumerate() {
        for (i, b) in sc.network.buses.iter().enumerate() {
            if let Some(w) = b.mg {
                sched[w][t] = h.point.p_pcc[i];
            }
        }
    }
    sched
}

pub fn dispatch_microgrid(sc: &Scenario, w: usize, schedule: &[f64]) -> Result<MgSchedule> {
    let mg = &sc.mgs[w];
    let dp = dispatch::build_dispatch(mg, schedule, &sc.gas_price)?;
    dispatch::solve_dispatch(mg, &dp, &sc.gas_price, w)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub hours: Vec<HourOutcome>,
    pub schedules: Vec<MgSchedule>,
}

/// A full run with hours and microgrids processed one after another.
pub fn run<E: Executor>(sc: &Scenario, exec: &E) -> Result<RunOutcome> {
    let hours = (0..sc.horizon())
        .map(|t| solve_hour(sc, t, &sc.admm, exec))
        .collect::<Result<Vec<_>>>()?;
    finish(sc, hours)
}

/// Microgrid dispatch for already solved hours.
pub fn finish(sc: &Scenario, hours: Vec<HourOutcome>) -> Result<RunOutcome> {
    let sched = tie_line_schedule(sc, &hours);
    let schedules = sched
        .iter()
        .enumerate()
        .map(|(w, s)| dispatch_microgrid(sc, w, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutcome { hours, schedules })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedGap {
    pub objective_admm: f64,
    pub objective_centralized: f64,
    /// `|admm - centralized| / |centralized|`.
    pub relative_gap: f64,
    /// Largest per-bus difference of the LinDistFlow voltage magnitudes [p.u.].
    pub max_voltage_diff: f64,
}

pub fn compare_centralized(sc: &Scenario, outcome: &HourOutcome) -> Result<CentralizedGap> {
    let plan = &outcome.plan;
    let d = plan.data(sc);
    let cp = opf::build_centralized(&d, &plan.partition, &plan.bounds, &sc.opf)?;
    let cs = opf::solve_centralized(&sc.network, &cp).map_err(|e| e.at("centralized", plan.hour + 1))?;
    let kappa = sc.opf.kappa;
    let a = outcome.point.objective(&plan.bounds, kappa);
    let c = cs.point.objective(&plan.bounds, kappa);
    let max_voltage_diff = outcome
        .point
        .u
        .iter()
        .zip(&cs.point.u)
        .map(|(x, y)| (x.max(0.0).sqrt() - y.max(0.0).sqrt()).abs())
        .fold(0.0, f64::max);
    Ok(CentralizedGap {
        objective_admm: a,
        objective_centralized: c,
        relative_gap: (a - c).abs() / c.abs().max(1e-12),
        max_voltage_diff,
    })
}

/// Groups identical partitions; returns the group id of every hour.
pub fn partition_ids(hours: &[&ZonePartition]) -> Vec<usize> {
    let mut seen: Vec<&ZonePartition> = Vec::new();
    hours
        .iter()
        .map(|p| match seen.iter().position(|s| s.assignment == p.assignment) {
            Some(i) => i,
            None => {
                seen.push(p);
                seen.len() - 1
            }
        })
        .collect()
}

/// Context string naming a stage and 1-based hour, for callers that build
/// their own errors.
pub fn stage_label(stage: &str, t: usize) -> alloc::string::String {
    format!("{stage} at hour {}", t + 1)
}
