//! The command-line verbs, callable without going through argument parsing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use zonalopt_core::admm::PenaltyStrategy;
use zonalopt_core::pipeline::{self, HourOutcome};
use zonalopt_core::powerflow;
use zonalopt_core::scenario::bundled;
use zonalopt_core::Scenario;

use crate::error::AppError;
use crate::exec::Rayon;
use crate::output::{self, PlotData, StrategyHours, Summary};
use crate::report::{BenchmarkReport, RunReport};
use crate::runner::{self, RunData};
use crate::scenario_file::{self, AdmmSection, OpfSection};

/// Options shared by every verb.
#[derive(Debug, Clone, Default)]
pub struct Common {
    /// `None` selects the bundled 33-bus day.
    pub scenario: Option<PathBuf>,
    pub out: PathBuf,
    /// 1-based.
    pub hour: Option<usize>,
    pub strategy: Option<PenaltyStrategy>,
    pub sigma: Option<usize>,
    pub rho0: Option<f64>,
    pub eps: Option<f64>,
}

impl Common {
    /// The scenario with command-line overrides applied and validated.
    pub fn scenario(&self) -> Result<Scenario, AppError> {
        let mut sc = match &self.scenario {
            Some(p) => scenario_file::load_scenario(p)?,
            None => bundled(),
        };
        if let Some(s) = self.strategy {
            sc.admm.strategy = s;
        }
        if let Some(s) = self.sigma {
            sc.admm.sigma = s;
        }
        if let Some(r) = self.rho0 {
            sc.admm.rho0 = r;
        }
        if let Some(e) = self.eps {
            sc.admm.eps = e;
        }
        let v = sc.validate();
        if v.is_empty() {
            Ok(sc)
        } else {
            Err(AppError::Validation(v))
        }
    }

    fn scenario_label(&self) -> String {
        self.scenario
            .as_ref()
            .map_or_else(|| "bundled".to_string(), |p| p.display().to_string())
    }

    /// 0-based hour index, checked against the horizon.
    pub fn hour_index(&self, sc: &Scenario) -> Result<Option<usize>, AppError> {
        match self.hour {
            None => Ok(None),
            Some(h) if (1..=sc.horizon()).contains(&h) => Ok(Some(h - 1)),
            Some(h) => Err(AppError::Usage(format!("--hour {h} outside 1..={}", sc.horizon()))),
        }
    }

    fn hours(&self, sc: &Scenario) -> Result<Vec<usize>, AppError> {
        Ok(match self.hour_index(sc)? {
            Some(t) => vec![t],
            None => (0..sc.horizon()).collect(),
        })
    }

    fn out_dir(&self) -> Result<&Path, AppError> {
        fs::create_dir_all(&self.out).map_err(|e| AppError::io(&self.out, e))?;
        Ok(&self.out)
    }

    fn reject_hour(&self, verb: &str) -> Result<(), AppError> {
        match self.hour {
            Some(_) => Err(AppError::Usage(format!("`{verb}` covers the whole horizon and takes no --hour"))),
            None => Ok(()),
        }
    }
}

/// Outcome of a pipeline verb: the report of whatever was solved, and the
/// run status (a stage failure or hours stopped at the iteration limit).
/// Files are written in both cases.
pub type Finished = (RunReport, Result<(), AppError>);

/// Full pipeline: writes the run report, residual trace, plot data and
/// summary, partial when a stage failed.
pub fn run(c: &Common) -> Result<Finished, AppError> {
    c.reject_hour("run")?;
    let sc = c.scenario()?;
    let data = runner::run(&sc);
    let report = RunReport::build(&sc, &data);
    let dir = c.out_dir()?;
    write_run(&sc, &data, &report, c, dir, true)?;
    Ok((report, status(data)))
}

/// Full pipeline, writing only the seven plot-data files.
pub fn emit_plots(c: &Common) -> Result<Finished, AppError> {
    c.reject_hour("emit-plots")?;
    let sc = c.scenario()?;
    let data = runner::run(&sc);
    let report = RunReport::build(&sc, &data);
    let dir = c.out_dir()?;
    write_run(&sc, &data, &report, c, dir, false)?;
    Ok((report, status(data)))
}

fn status(data: RunData) -> Result<(), AppError> {
    if let Some(e) = data.failure {
        return Err(e.into());
    }
    let hours = data.unconverged_hours();
    if hours.is_empty() {
        Ok(())
    } else {
        Err(AppError::NotConverged { hours })
    }
}

fn write_run(sc: &Scenario, data: &RunData, report: &RunReport, c: &Common, dir: &Path, full: bool) -> Result<(), AppError> {
    let hours: Vec<&HourOutcome> = data.solved().collect();
    let traces = [StrategyHours {
        strategy: data.strategy,
        hours: &hours,
    }];
    let plots = PlotData {
        hours: &hours,
        schedules: &data.schedules,
        traces: &traces,
    };
    output::emit_plots(sc, &plots, dir)?;
    if !full {
        return Ok(());
    }
    output::write_report(report, dir)?;
    output::write_residual_trace(&traces, dir)?;
    let summary = Summary {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        csv_schema: output::CSV_SCHEMA,
        scenario: &c.scenario_label(),
        config: AdmmSection::from(sc.admm),
        opf: OpfSection {
            kappa: sc.opf.kappa,
            v_spec: sc.opf.v_spec,
            payoff_eta: sc.opf.payoff_eta,
        },
        wall_seconds: data.wall.as_secs_f64(),
        report,
    };
    output::write_json(&summary, &dir.join(output::SUMMARY))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionRow {
    pub hour: usize,
    pub partition_id: usize,
    /// Bus ids per zone.
    pub zones: Vec<Vec<usize>>,
    /// `(from, to)` bus ids of the overlapping branches.
    pub overlaps: Vec<(usize, usize)>,
}

/// Zoning per hour; writes `partitions.csv` (hour, partition_id, bus_id,
/// zone).
pub fn partition(c: &Common) -> Result<Vec<PartitionRow>, AppError> {
    let sc = c.scenario()?;
    let plans = c
        .hours(&sc)?
        .into_iter()
        .map(|t| pipeline::plan_hour(&sc, t))
        .collect::<Result<Vec<_>, _>>()?;
    let ids = pipeline::partition_ids(&plans.iter().map(|p| &p.partition).collect::<Vec<_>>());
    let net = &sc.network;
    let rows: Vec<PartitionRow> = plans
        .iter()
        .zip(&ids)
        .map(|(p, &id)| PartitionRow {
            hour: p.hour + 1,
            partition_id: id,
            zones: (0..p.partition.n_zones())
                .map(|z| p.partition.buses_of(z).iter().map(|&b| net.buses[b].id).collect())
                .collect(),
            overlaps: p
                .partition
                .overlaps
                .iter()
                .map(|o| (net.branches[o.branch].from, net.branches[o.branch].to))
                .collect(),
        })
        .collect();
    let dir = c.out_dir()?;
    let path = dir.join("partitions.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| AppError::csv(&path, e))?;
    w.write_record(["hour", "partition_id", "bus_id", "zone"])
        .map_err(|e| AppError::csv(&path, e))?;
    for (p, &id) in plans.iter().zip(&ids) {
        for (i, &z) in p.partition.assignment.iter().enumerate() {
            w.serialize((p.hour + 1, id, net.buses[i].id, z))
                .map_err(|e| AppError::csv(&path, e))?;
        }
    }
    w.flush().map_err(|e| AppError::io(&path, e))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfRow {
    pub hour: usize,
    pub losses_kw: f64,
    pub min_voltage: f64,
    pub min_voltage_bus: usize,
    pub mean_dev: f64,
    pub iterations: usize,
}

/// Base-case AC power flow per hour; writes `pf.csv` (hour, bus_id, v,
/// angle_deg).
pub fn pf(c: &Common) -> Result<Vec<PfRow>, AppError> {
    let sc = c.scenario()?;
    let net = &sc.network;
    let mut rows = Vec::new();
    let dir = c.out_dir()?;
    let path = dir.join("pf.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| AppError::csv(&path, e))?;
    w.write_record(["hour", "bus_id", "v", "angle_deg"])
        .map_err(|e| AppError::csv(&path, e))?;
    for t in c.hours(&sc)? {
        let s = powerflow::solve_pf(net, &net.base_injections(t)).map_err(|e| e.at("base power flow", t + 1))?;
        let worst = (0..s.v.len()).min_by(|&a, &b| s.v[a].total_cmp(&s.v[b])).unwrap_or(0);
        for (i, b) in net.buses.iter().enumerate() {
            w.serialize((t + 1, b.id, s.v[i], s.delta[i].to_degrees()))
                .map_err(|e| AppError::csv(&path, e))?;
        }
        rows.push(PfRow {
            hour: t + 1,
            losses_kw: s.losses,
            min_voltage: s.min_voltage(),
            min_voltage_bus: net.buses[worst].id,
            mean_dev: s.mean_voltage_deviation(),
            iterations: s.iterations,
        });
    }
    w.flush().map_err(|e| AppError::io(&path, e))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub hour: usize,
    pub zones: usize,
    pub admm_iterations: usize,
    pub admm_converged: bool,
    pub objective_admm: f64,
    pub objective_centralized: f64,
    pub relative_gap: f64,
    pub max_voltage_diff: f64,
}

/// ADMM against the centralized program for one hour (default: the hour
/// of peak distribution load). Writes `compare_centralized.json`.
pub fn compare_centralized(c: &Common) -> Result<GapReport, AppError> {
    let sc = c.scenario()?;
    let t = match c.hour_index(&sc)? {
        Some(t) => t,
        None => peak_hour(&sc),
    };
    let out = pipeline::solve_hour(&sc, t, &sc.admm, &Rayon)?;
    let gap = pipeline::compare_centralized(&sc, &out)?;
    let report = GapReport {
        hour: t + 1,
        zones: out.plan.partition.n_zones(),
        admm_iterations: out.admm.iterations,
        admm_converged: out.admm.converged,
        objective_admm: gap.objective_admm,
        objective_centralized: gap.objective_centralized,
        relative_gap: gap.relative_gap,
        max_voltage_diff: gap.max_voltage_diff,
    };
    output::write_json(&report, &c.out_dir()?.join("compare_centralized.json"))?;
    Ok(report)
}

pub fn peak_hour(sc: &Scenario) -> usize {
    (0..sc.horizon())
        .max_by(|&a, &b| sc.network.total_load_kw(a).total_cmp(&sc.network.total_load_kw(b)))
        .unwrap_or(0)
}

/// Every penalty strategy on every hour. Hours that stop at the iteration
/// limit are recorded, not fatal.
pub fn benchmark_penalty(c: &Common) -> Result<BenchmarkReport, AppError> {
    c.reject_hour("benchmark-penalty")?;
    let sc = c.scenario()?;
    let runs = runner::benchmark(&sc)?;
    let report = BenchmarkReport::build(&sc, &runs);
    let dir = c.out_dir()?;
    output::write_benchmark(&report, dir)?;
    let per_strategy: Vec<Vec<&HourOutcome>> = PenaltyStrategy::ALL
        .iter()
        .map(|&s| runs.iter().flatten().filter(|r| r.strategy == s).map(|r| &r.outcome).collect())
        .collect();
    let traces: Vec<StrategyHours> = PenaltyStrategy::ALL
        .iter()
        .zip(&per_strategy)
        .map(|(&strategy, hours)| StrategyHours { strategy, hours })
        .collect();
    output::write_iterations(&traces, dir)?;
    output::write_residuals(&traces, dir)?;
    output::write_residual_trace(&traces, dir)?;
    Ok(report)
}

/// Writes the scenario (bundled unless `--scenario` is given) as JSON.
pub fn export_scenario(c: &Common, path: &Path) -> Result<(), AppError> {
    let sc = c.scenario()?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
    }
    scenario_file::save_scenario(&sc, path)
}
