//! CSV and JSON outputs.
//!
//! Every CSV has a header row; the column sets are versioned together by
//! [`CSV_SCHEMA`], which the summary file echoes. Hours are 1-based, bus ids
//! are the scenario's ids, microgrids are 0-based indices into `mgs`.
//!
//! Plot data, one file per figure family:
//!
//! | file | columns |
//! |------|---------|
//! | `sensitivity.csv` | hour, bus_id, mg, dv_dp, dv_dq, zone |
//! | `losses_voltage.csv` | hour, bus_id, v_before, v_after, losses_before_kw, losses_after_kw |
//! | `pv_reactive.csv` | hour, bus_id, p_mppt_kw, q_kvar, q_limit_kvar |
//! | `tie_lines.csv` | hour, mg, bus_id, p_kw, q_kvar |
//! | `mg_schedules.csv` | mg, hour, p_mt_kw, p_de_kw, p_ch_kw, p_dis_kw, soc, p_pcc_kw, load_kw, pv_kw, wind_kw, cost |
//! | `iterations.csv` | hour, strategy, iterations, converged |
//! | `residuals.csv` | hour, strategy, iteration, r, d, r_floored, d_floored |
//!
//! In `losses_voltage.csv` the loss columns repeat the hour total on every
//! bus row. `residuals.csv` holds the largest primal and dual residual over
//! all overlap blocks per iteration; values below [`RESIDUAL_FLOOR`] are
//! written as the floor with the matching `*_floored` flag set, so every
//! value is log-plottable.
//!
//! Run outputs: `report.csv` (one row per hour of the run report),
//! `residual_trace.csv` (hour, strategy, iteration, zone, branch, r, d, rho;
//! `branch` is the index into the scenario's branch list), and
//! `summary.json`. The penalty benchmark adds `benchmark.csv` and
//! `benchmark.json`.

use std::fs;
use std::path::Path;

use serde::Serialize;
use zonalopt_core::admm::PenaltyStrategy;
use zonalopt_core::dispatch::MgSchedule;
use zonalopt_core::opf::pv_q_bound;
use zonalopt_core::pipeline::HourOutcome;
use zonalopt_core::Scenario;

use crate::error::AppError;
use crate::report::{BenchmarkReport, RunReport};

pub const CSV_SCHEMA: u32 = 1;
pub const RESIDUAL_FLOOR: f64 = 1e-16;

pub const SENSITIVITY: &str = "sensitivity.csv";
pub const LOSSES_VOLTAGE: &str = "losses_voltage.csv";
pub const PV_REACTIVE: &str = "pv_reactive.csv";
pub const TIE_LINES: &str = "tie_lines.csv";
pub const MG_SCHEDULES: &str = "mg_schedules.csv";
pub const ITERATIONS: &str = "iterations.csv";
pub const RESIDUALS: &str = "residuals.csv";

pub const PLOT_FILES: [&str; 7] = [SENSITIVITY, LOSSES_VOLTAGE, PV_REACTIVE, TIE_LINES, MG_SCHEDULES, ITERATIONS, RESIDUALS];

pub const REPORT: &str = "report.csv";
pub const RESIDUAL_TRACE: &str = "residual_trace.csv";
pub const SUMMARY: &str = "summary.json";
pub const BENCHMARK_CSV: &str = "benchmark.csv";
pub const BENCHMARK_JSON: &str = "benchmark.json";

/// Solved hours of one strategy.
#[derive(Debug, Clone, Copy)]
pub struct StrategyHours<'a> {
    pub strategy: PenaltyStrategy,
    pub hours: &'a [&'a HourOutcome],
}

/// Everything the plot files are drawn from. The default value is empty and
/// produces header-only files.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlotData<'a> {
    /// Hours of the run whose operating points are plotted.
    pub hours: &'a [&'a HourOutcome],
    pub schedules: &'a [MgSchedule],
    /// Iteration counts and residuals; usually the run itself, or every
    /// strategy of a benchmark.
    pub traces: &'a [StrategyHours<'a>],
}

fn floored(v: f64) -> (f64, bool) {
    if v < RESIDUAL_FLOOR {
        (RESIDUAL_FLOOR, true)
    } else {
        (v, false)
    }
}

struct Csv {
    path: std::path::PathBuf,
    w: csv::Writer<fs::File>,
}

impl Csv {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Csv, AppError> {
        let path = dir.join(name);
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(&path)
            .map_err(|e| AppError::csv(&path, e))?;
        w.write_record(header).map_err(|e| AppError::csv(&path, e))?;
        Ok(Csv { path, w })
    }

    fn row<S: Serialize>(&mut self, r: S) -> Result<(), AppError> {
        self.w.serialize(r).map_err(|e| AppError::csv(&self.path, e))
    }

    fn finish(mut self) -> Result<(), AppError> {
        self.w.flush().map_err(|e| AppError::io(&self.path, e))
    }
}

/// Writes the seven plot-data files into `dir`.
pub fn emit_plots(sc: &Scenario, data: &PlotData, dir: &Path) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let net = &sc.network;
    let id = |i: usize| net.buses[i].id;

    let mut f = Csv::create(dir, SENSITIVITY, &["hour", "bus_id", "mg", "dv_dp", "dv_dq", "zone"])?;
    for h in data.hours {
        if let Some(s) = &h.plan.sensitivity {
            for (r, &bus) in s.pq_buses.iter().enumerate() {
                for w in 0..s.mg_buses.len() {
                    f.row((h.plan.hour + 1, id(bus), w, s.dv_dp[(r, w)], s.dv_dq[(r, w)], h.plan.partition.assignment[bus]))?;
                }
            }
        }
    }
    f.finish()?;

    let mut f = Csv::create(
        dir,
        LOSSES_VOLTAGE,
        &["hour", "bus_id", "v_before", "v_after", "losses_before_kw", "losses_after_kw"],
    )?;
    for h in data.hours {
        for i in 0..net.n_buses() {
            f.row((h.plan.hour + 1, id(i), h.plan.base_pf.v[i], h.pf_after.v[i], h.losses_before(), h.losses_after()))?;
        }
    }
    f.finish()?;

    let mut f = Csv::create(dir, PV_REACTIVE, &["hour", "bus_id", "p_mppt_kw", "q_kvar", "q_limit_kvar"])?;
    for h in data.hours {
        let t = h.plan.hour;
        for (i, b) in net.buses.iter().enumerate() {
            if let Some(pv) = &b.pv {
                let p = pv.p_mppt[t];
                f.row((t + 1, b.id, p, h.point.q_pv[i], pv_q_bound(pv.capacity_kva, p)))?;
            }
        }
    }
    f.finish()?;

    let mut f = Csv::create(dir, TIE_LINES, &["hour", "mg", "bus_id", "p_kw", "q_kvar"])?;
    for h in data.hours {
        for (i, b) in net.buses.iter().enumerate() {
            if let Some(w) = b.mg {
                f.row((h.plan.hour + 1, w, b.id, h.point.p_pcc[i], h.point.q_pcc[i]))?;
            }
        }
    }
    f.finish()?;

    let mut f = Csv::create(
        dir,
        MG_SCHEDULES,
        &[
            "mg", "hour", "p_mt_kw", "p_de_kw", "p_ch_kw", "p_dis_kw", "soc", "p_pcc_kw", "load_kw", "pv_kw", "wind_kw", "cost",
        ],
    )?;
    for (w, s) in data.schedules.iter().enumerate() {
        let mg = &sc.mgs[w];
        for t in 0..s.p_mt.len() {
            f.row((
                w,
                t + 1,
                s.p_mt[t],
                s.p_de[t],
                s.p_ch[t],
                s.p_dis[t],
                s.soc[t],
                s.p_pcc[t],
                mg.load[t],
                mg.pv[t],
                mg.wind[t],
                s.hourly[t].total(),
            ))?;
        }
    }
    f.finish()?;

    write_iterations(data.traces, dir)?;
    write_residuals(data.traces, dir)
}

pub fn write_iterations(traces: &[StrategyHours], dir: &Path) -> Result<(), AppError> {
    let mut f = Csv::create(dir, ITERATIONS, &["hour", "strategy", "iterations", "converged"])?;
    for tr in traces {
        for h in tr.hours {
            f.row((h.plan.hour + 1, tr.strategy.name(), h.admm.iterations, h.admm.converged))?;
        }
    }
    f.finish()
}

pub fn write_residuals(traces: &[StrategyHours], dir: &Path) -> Result<(), AppError> {
    let mut f = Csv::create(dir, RESIDUALS, &["hour", "strategy", "iteration", "r", "d", "r_floored", "d_floored"])?;
    for tr in traces {
        for h in tr.hours {
            for (m, r, d) in per_iteration(h) {
                let (r, rf) = floored(r);
                let (d, df) = floored(d);
                f.row((h.plan.hour + 1, tr.strategy.name(), m, r, d, rf, df))?;
            }
        }
    }
    f.finish()
}

/// Largest primal and dual residual over the blocks of every iteration.
pub fn per_iteration(h: &HourOutcome) -> Vec<(usize, f64, f64)> {
    let mut out: Vec<(usize, f64, f64)> = Vec::with_capacity(h.admm.iterations);
    for row in &h.admm.trace {
        match out.last_mut() {
            Some(last) if last.0 == row.iteration => {
                last.1 = last.1.max(row.r);
                last.2 = last.2.max(row.d);
            }
            _ => out.push((row.iteration, row.r, row.d)),
        }
    }
    // one zone and no overlap: the run still took its iterations
    if out.is_empty() {
        out.extend((1..=h.admm.iterations).map(|m| (m, 0.0, 0.0)));
    }
    out
}

pub fn write_report(report: &RunReport, dir: &Path) -> Result<(), AppError> {
    let n_mg = report.totals.mg_cost.len();
    let mut header: Vec<String> = [
        "hour",
        "partition_id",
        "zones",
        "iterations",
        "converged",
        "losses_before_kw",
        "losses_after_kw",
        "loss_reduction_pct",
        "mean_dev_before",
        "mean_dev_after",
        "dev_reduction_pct",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..n_mg).map(|w| format!("mg{w}_cost")));
    let path = dir.join(REPORT);
    let mut w = csv::Writer::from_path(&path).map_err(|e| AppError::csv(&path, e))?;
    w.write_record(&header).map_err(|e| AppError::csv(&path, e))?;
    for h in &report.hours {
        let mut rec = vec![
            h.hour.to_string(),
            h.partition_id.to_string(),
            h.zones.to_string(),
            h.iterations.to_string(),
            h.converged.to_string(),
            h.losses_before_kw.to_string(),
            h.losses_after_kw.to_string(),
            h.loss_reduction_pct.to_string(),
            h.mean_dev_before.to_string(),
            h.mean_dev_after.to_string(),
            h.dev_reduction_pct.to_string(),
        ];
        // costs are missing when the dispatch did not run
        rec.extend((0..n_mg).map(|k| h.mg_cost.get(k).map_or(String::new(), |c| c.to_string())));
        w.write_record(&rec).map_err(|e| AppError::csv(&path, e))?;
    }
    w.flush().map_err(|e| AppError::io(&path, e))
}

pub fn write_residual_trace(traces: &[StrategyHours], dir: &Path) -> Result<(), AppError> {
    let mut f = Csv::create(dir, RESIDUAL_TRACE, &["hour", "strategy", "iteration", "zone", "branch", "r", "d", "rho"])?;
    for tr in traces {
        for h in tr.hours {
            for row in &h.admm.trace {
                let branch = h.plan.partition.overlaps[row.consensus].branch;
                f.row((h.plan.hour + 1, tr.strategy.name(), row.iteration, row.zone, branch, row.r, row.d, row.rho))?;
            }
        }
    }
    f.finish()
}

pub fn write_benchmark(report: &BenchmarkReport, dir: &Path) -> Result<(), AppError> {
    let mut f = Csv::create(
        dir,
        BENCHMARK_CSV,
        &["hour", "strategy", "iterations", "converged", "wall_ms", "penalty_changes", "objective"],
    )?;
    for r in &report.rows {
        f.row(r)?;
    }
    f.finish()?;
    write_json(report, &dir.join(BENCHMARK_JSON))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), AppError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| AppError::io(path, e))
}

/// Contents of `summary.json`.
#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub csv_schema: u32,
    pub scenario: &'a str,
    pub config: crate::scenario_file::AdmmSection,
    pub opf: crate::scenario_file::OpfSection,
    pub wall_seconds: f64,
    pub report: &'a RunReport,
}
