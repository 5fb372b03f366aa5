//! Runs over the whole horizon with hours on the rayon pool.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use zonalopt_core::admm::{AdmmConfig, PenaltyStrategy, Sequential};
use zonalopt_core::dispatch::MgSchedule;
use zonalopt_core::pipeline::{self, HourOutcome, HourPlan};
use zonalopt_core::{Error as CoreError, Scenario};

/// Result of every hour plus the microgrid dispatch, when it could run.
#[derive(Debug)]
pub struct RunData {
    pub strategy: PenaltyStrategy,
    /// One slot per hour; `None` where the hour failed.
    pub hours: Vec<Option<HourOutcome>>,
    pub schedules: Vec<MgSchedule>,
    /// First failure, already wrapped with its stage and hour.
    pub failure: Option<CoreError>,
    pub wall: Duration,
}

impl RunData {
    pub fn complete(&self) -> bool {
        self.failure.is_none()
    }

    /// 1-based labels of hours whose ADMM stopped at the iteration limit.
    pub fn unconverged_hours(&self) -> Vec<usize> {
        self.hours
            .iter()
            .enumerate()
            .filter_map(|(t, h)| h.as_ref().filter(|h| !h.admm.converged).map(|_| t + 1))
            .collect()
    }

    pub fn solved(&self) -> impl Iterator<Item = &HourOutcome> {
        self.hours.iter().flatten()
    }
}

/// Every hour under `cfg`, in parallel; zone solves inside an hour run in
/// sequence.
pub fn solve_hours(sc: &Scenario, cfg: &AdmmConfig) -> Vec<Result<HourOutcome, CoreError>> {
    (0..sc.horizon())
        .into_par_iter()
        .map(|t| pipeline::solve_hour(sc, t, cfg, &Sequential))
        .collect()
}

/// Per-microgrid 24-hour dispatch against the hourly tie-line values, one
/// microgrid per task.
pub fn dispatch_all(sc: &Scenario, hours: &[HourOutcome]) -> Result<Vec<MgSchedule>, CoreError> {
    let sched = pipeline::tie_line_schedule(sc, hours);
    sched
        .par_iter()
        .enumerate()
        .map(|(w, s)| pipeline::dispatch_microgrid(sc, w, s))
        .collect()
}

/// The full pipeline with `sc.admm`. Stage failures do not panic: they are
/// kept in `failure` together with whatever hours did solve.
pub fn run(sc: &Scenario) -> RunData {
    let start = Instant::now();
    let results = solve_hours(sc, &sc.admm);
    let mut failure = None;
    let hours: Vec<Option<HourOutcome>> = results
        .into_iter()
        .map(|r| match r {
            Ok(h) => Some(h),
            Err(e) => {
                failure.get_or_insert(e);
                None
            }
        })
        .collect();
    let mut schedules = Vec::new();
    if failure.is_none() {
        let solved: Vec<HourOutcome> = hours.iter().flatten().cloned().collect();
        match dispatch_all(sc, &solved) {
            Ok(s) => schedules = s,
            Err(e) => failure = Some(e),
        }
    }
    RunData {
        strategy: sc.admm.strategy,
        hours,
        schedules,
        failure,
        wall: start.elapsed(),
    }
}

#[derive(Debug)]
pub struct StrategyRun {
    pub strategy: PenaltyStrategy,
    pub outcome: HourOutcome,
    pub wall: Duration,
}

/// Every strategy on every hour from the same plan, so the subproblems,
/// bounds and starting point are identical across strategies.
pub fn benchmark(sc: &Scenario) -> Result<Vec<Vec<StrategyRun>>, CoreError> {
    (0..sc.horizon())
        .into_par_iter()
        .map(|t| {
            let plan = pipeline::plan_hour(sc, t)?;
            PenaltyStrategy::ALL
                .iter()
                .map(|&strategy| benchmark_one(sc, plan.clone(), strategy))
                .collect()
        })
        .collect()
}

fn benchmark_one(sc: &Scenario, plan: HourPlan, strategy: PenaltyStrategy) -> Result<StrategyRun, CoreError> {
    let cfg = AdmmConfig { strategy, ..sc.admm };
    let start = Instant::now();
    let outcome = pipeline::solve_planned(sc, plan, &cfg, &Sequential, false)?;
    Ok(StrategyRun {
        strategy,
        outcome,
        wall: start.elapsed(),
    })
}
