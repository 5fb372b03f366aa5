use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use zonalopt::commands::{self, Common};
use zonalopt::AppError;
use zonalopt_core::admm::PenaltyStrategy;

/// Zonal distributed optimization of a radial feeder with microgrids.
#[derive(Debug, Parser)]
#[command(name = "zonalopt", version)]
struct Cli {
    /// Scenario JSON file; the bundled 33-bus day when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Hour, 1-based.
    #[arg(long, global = true)]
    hour: Option<usize>,
    /// Penalty update rule.
    #[arg(long, global = true)]
    strategy: Option<Strategy>,
    /// Consecutive equal judgments before the improved rule acts.
    #[arg(long, global = true)]
    sigma: Option<usize>,
    /// Initial penalty.
    #[arg(long, global = true)]
    rho0: Option<f64>,
    /// Convergence threshold on the primal and dual residuals.
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Strategy {
    Fixed,
    Adaptive,
    Improved,
}

impl From<Strategy> for PenaltyStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Fixed => PenaltyStrategy::Fixed,
            Strategy::Adaptive => PenaltyStrategy::Adaptive,
            Strategy::Improved => PenaltyStrategy::Improved,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full 24-hour pipeline with report, traces and plot data.
    Run,
    /// Zones per hour.
    Partition,
    /// Base-case AC power flow per hour.
    Pf,
    /// ADMM against the centralized solve for one hour.
    CompareCentralized,
    /// All three penalty rules on every hour.
    BenchmarkPenalty,
    /// Full pipeline, writing only the plot-data files.
    EmitPlots,
    /// Writes the scenario as JSON.
    ExportScenario {
        /// Destination file.
        path: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), AppError> {
    let c = Common {
        scenario: cli.scenario,
        out: cli.out,
        hour: cli.hour,
        strategy: cli.strategy.map(Into::into),
        sigma: cli.sigma,
        rho0: cli.rho0,
        eps: cli.eps,
    };
    match cli.command {
        Command::Run | Command::EmitPlots => {
            let (r, status) = if matches!(cli.command, Command::Run) {
                commands::run(&c)?
            } else {
                commands::emit_plots(&c)?
            };
            let t = &r.totals;
            println!(
                    "{} hours, {} ADMM iterations ({}); losses {:.2} -> {:.2} kWh ({:.2}%), voltage deviation -{:.2}%",
                    r.hours.len(),
                    t.iterations,
                    r.strategy,
                    t.losses_before_kwh,
                    t.losses_after_kwh,
                    t.loss_reduction_pct,
                t.dev_reduction_pct
            );
            if !r.complete {
                println!("partial outputs (see summary.json)");
            }
            println!("outputs in {}", c.out.display());
            status
        }
        Command::Partition => {
            for r in commands::partition(&c)? {
                println!("hour {:>2}  partition {}  zones {:?}  overlaps {:?}", r.hour, r.partition_id, r.zones, r.overlaps);
            }
            Ok(())
        }
        Command::Pf => {
            let rows = commands::pf(&c)?;
            println!("hour  losses_kw  min_v    bus  mean_dev");
            for r in rows {
                println!(
                    "{:>4}  {:>9.3}  {:.5}  {:>3}  {:.5}",
                    r.hour, r.losses_kw, r.min_voltage, r.min_voltage_bus, r.mean_dev
                );
            }
            Ok(())
        }
        Command::CompareCentralized => {
            let g = commands::compare_centralized(&c)?;
            println!("{}", serde_json::to_string_pretty(&g).expect("report serializes"));
            Ok(())
        }
        Command::BenchmarkPenalty => {
            let b = commands::benchmark_penalty(&c)?;
            for s in &b.strategies {
                println!(
                    "{:<9} median {:>6.1}  total {:>6}  converged {:>2}/{}",
                    s.strategy,
                    s.median_iterations,
                    s.total_iterations,
                    s.converged_hours,
                    b.rows.len() / b.strategies.len().max(1)
                );
            }
            println!(
                "improved vs adaptive: {:.1}% fewer iterations; vs fixed: {:.1}%",
                b.improved_vs_adaptive_pct, b.improved_vs_fixed_pct
            );
            Ok(())
        }
        Command::ExportScenario { path } => commands::export_scenario(&c, &path),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
