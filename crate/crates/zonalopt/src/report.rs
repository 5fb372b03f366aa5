use serde::Serialize;
use zonalopt_core::admm::PenaltyStrategy;
use zonalopt_core::pipeline::{self, HourOutcome};

use crate::runner::{RunData, StrategyRun};

/// `(before - after) / before` in percent; zero when there was nothing to
/// reduce.
pub fn reduction_pct(before: f64, after: f64) -> f64 {
    if before.abs() > 0.0 {
        100.0 * (before - after) / before
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourReport {
    /// 1-based.
    pub hour: usize,
    pub partition_id: usize,
    pub zones: usize,
    pub iterations: usize,
    pub converged: bool,
    pub losses_before_kw: f64,
    pub losses_after_kw: f64,
    pub loss_reduction_pct: f64,
    pub mean_dev_before: f64,
    pub mean_dev_after: f64,
    pub dev_reduction_pct: f64,
    /// Operating cost of every microgrid in this hour [$]; empty until the
    /// dispatch has run.
    pub mg_cost: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTotals {
    pub losses_before_kwh: f64,
    pub losses_after_kwh: f64,
    pub loss_reduction_pct: f64,
    /// Sum over hours of the hourly mean |V - 1|.
    pub dev_before: f64,
    pub dev_after: f64,
    pub dev_reduction_pct: f64,
    pub iterations: usize,
    pub unconverged_hours: Vec<usize>,
    pub mg_cost: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub strategy: &'static str,
    pub complete: bool,
    pub failure: Option<String>,
    pub hours: Vec<HourReport>,
    pub totals: RunTotals,
    /// Hour with the largest distribution load.
    pub peak: Option<HourReport>,
}

impl RunReport {
    pub fn build(sc: &zonalopt_core::Scenario, run: &RunData) -> RunReport {
        let solved: Vec<&HourOutcome> = run.solved().collect();
        let ids = pipeline::partition_ids(&solved.iter().map(|h| &h.plan.partition).collect::<Vec<_>>());
        let hours: Vec<HourReport> = solved
            .iter()
            .zip(ids)
            .map(|(h, id)| {
                let t = h.plan.hour;
                HourReport {
                    hour: t + 1,
                    partition_id: id,
                    zones: h.plan.partition.n_zones(),
                    iterations: h.admm.iterations,
                    converged: h.admm.converged,
                    losses_before_kw: h.losses_before(),
                    losses_after_kw: h.losses_after(),
                    loss_reduction_pct: reduction_pct(h.losses_before(), h.losses_after()),
                    mean_dev_before: h.dev_before(),
                    mean_dev_after: h.dev_after(),
                    dev_reduction_pct: reduction_pct(h.dev_before(), h.dev_after()),
                    mg_cost: run.schedules.iter().map(|s| s.hourly[t].total()).collect(),
                }
            })
            .collect();
        let sum = |f: fn(&HourReport) -> f64| hours.iter().map(f).sum::<f64>();
        let (lb, la) = (sum(|h| h.losses_before_kw), sum(|h| h.losses_after_kw));
        let (db, da) = (sum(|h| h.mean_dev_before), sum(|h| h.mean_dev_after));
        let totals = RunTotals {
            losses_before_kwh: lb,
            losses_after_kwh: la,
            loss_reduction_pct: reduction_pct(lb, la),
            dev_before: db,
            dev_after: da,
            dev_reduction_pct: reduction_pct(db, da),
            iterations: hours.iter().map(|h| h.iterations).sum(),
            unconverged_hours: run.unconverged_hours(),
            mg_cost: run.schedules.iter().map(|s| s.cost.total()).collect(),
        };
        let peak = hours
            .iter()
            .max_by(|a, b| {
                let la = sc.network.total_load_kw(a.hour - 1);
                let lb = sc.network.total_load_kw(b.hour - 1);
                la.total_cmp(&lb)
            })
            .cloned();
        RunReport {
            strategy: run.strategy.name(),
            complete: run.complete(),
            failure: run.failure.as_ref().map(|e| e.to_string()),
            hours,
            totals,
            peak,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub hour: usize,
    pub strategy: &'static str,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: f64,
    pub penalty_changes: usize,
    /// Upper-level objective of the returned iterate.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: &'static str,
    pub median_iterations: f64,
    pub total_iterations: usize,
    pub converged_hours: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub strategies: Vec<StrategySummary>,
    /// Total-iteration reduction of the improved rule against the adaptive
    /// one, in percent.
    pub improved_vs_adaptive_pct: f64,
    pub improved_vs_fixed_pct: f64,
    /// Residual traces are in `residuals.csv`, keyed by hour and strategy.
    pub residual_file: &'static str,
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl BenchmarkReport {
    pub fn build(sc: &zonalopt_core::Scenario, runs: &[Vec<StrategyRun>]) -> BenchmarkReport {
        let rows: Vec<BenchmarkRow> = runs
            .iter()
            .flatten()
            .map(|r| {
                let o = &r.outcome;
                BenchmarkRow {
                    hour: o.plan.hour + 1,
                    strategy: r.strategy.name(),
                    iterations: o.admm.iterations,
                    converged: o.admm.converged,
                    wall_ms: r.wall.as_secs_f64() * 1e3,
                    penalty_changes: o.admm.penalty_changes,
                    objective: o.point.objective(&o.plan.bounds, sc.opf.kappa),
                }
            })
            .collect();
        let strategies: Vec<StrategySummary> = PenaltyStrategy::ALL
            .iter()
            .map(|s| {
                let mine: Vec<&BenchmarkRow> = rows.iter().filter(|r| r.strategy == s.name()).collect();
                StrategySummary {
                    strategy: s.name(),
                    median_iterations: median(&mut mine.iter().map(|r| r.iterations as f64).collect::<Vec<_>>()),
                    total_iterations: mine.iter().map(|r| r.iterations).sum(),
                    converged_hours: mine.iter().filter(|r| r.converged).count(),
                }
            })
            .collect();
        let total = |name: &str| strategies.iter().find(|s| s.strategy == name).map_or(0, |s| s.total_iterations) as f64;
        BenchmarkReport {
            improved_vs_adaptive_pct: reduction_pct(total("adaptive"), total("improved")),
            improved_vs_fixed_pct: reduction_pct(total("fixed"), total("improved")),
            rows,
            strategies,
            residual_file: crate::output::RESIDUALS,
        }
    }

    pub fn summary(&self, strategy: PenaltyStrategy) -> &StrategySummary {
        self.strategies
            .iter()
            .find(|s| s.strategy == strategy.name())
            .expect("every strategy is summarised")
    }
}
