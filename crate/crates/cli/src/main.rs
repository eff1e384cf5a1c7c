//! `hierplan` command-line tool.
//!
//! Every subcommand reads one TOML scenario and writes CSV files into the
//! output directory. Files are written to a temporary sibling first and
//! renamed into place.

mod config;

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ScenarioFile;
use hierplan::dispatch::PolicySpec;
use hierplan::mps::{compute_mps, MpsOptions};
use hierplan::simflow::{self, Metric, SimScenario, Summary};
use hierplan::{movetarget, planner, Error};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Core(Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::Domain { .. }
                | Error::Unstable { .. }
                | Error::InfeasibleSojourn { .. }
                | Error::InversionFailed { .. } => 3,
                Error::InfeasibleScenario(_) => 4,
                Error::Data(_) | Error::Validation(_) | Error::HorizonTooShort { .. } => 5,
                Error::Csv(_) => 6,
            },
            CliError::Io(_) => 6,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hierplan",
    version,
    about = "Hierarchical production planning for a flow line"
)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "HIERPLAN_OUT", default_value = ".")]
    out: PathBuf,
    /// Overrides the simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the replication count.
    #[arg(long, global = true)]
    replications: Option<u64>,
    /// Carry unused available WIP into the next day's MPS.
    #[arg(long, global = true)]
    rollover_available_wip: bool,
    /// Let MOVE_TARGET keep working after today's target is met.
    #[arg(long, global = true)]
    allow_overproduction: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price versus lead-time curves: curve_<name>.csv.
    Curves,
    /// Response surfaces and the optimal operating point: surface.csv, optimum.csv.
    Plan,
    /// Master production schedule: mps.csv.
    Mps,
    /// Per-stage move targets for today: targets.csv.
    Targets,
    /// One simulated replication: simreport.csv, jobs.csv.
    Simulate,
    /// Paired replications of two policies: compare.csv.
    Compare,
}

fn write_atomic(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut dyn Write) -> Result<(), Error>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let io_err = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.join(name).display()));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush().map_err(io_err)?;
    }
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(dir.join(name)).map_err(|e| io_err(e.error))?;
    Ok(())
}

struct Ctx {
    file: ScenarioFile,
    cli: Cli,
}

impl Ctx {
    fn policy(&self, p: &PolicySpec) -> PolicySpec {
        let mut p = p.clone();
        p.allow_overproduction |= self.cli.allow_overproduction;
        p
    }

    fn sim(&self) -> Result<SimScenario, CliError> {
        let mut sc = self.file.simulation(self.cli.rollover_available_wip)?;
        if let Some(s) = self.cli.seed {
            sc.seed = s;
        }
        Ok(sc)
    }

    fn replications(&self, default: u64) -> u64 {
        self.cli.replications.or(self.file.replications()).unwrap_or(default)
    }

    fn out(&self) -> &Path {
        &self.cli.out
    }
}

fn curves(ctx: &Ctx) -> Result<(), CliError> {
    let scenario = ctx.file.planning()?;
    for spec in ctx.file.curves()? {
        let curve = planner::price_sojourn_curves(&scenario, spec)?;
        for w in &curve.warnings {
            eprintln!("warning: {w}");
        }
        write_atomic(ctx.out(), &format!("curve_{}.csv", spec.name), |w| curve.write_csv(w))?;
    }
    Ok(())
}

fn plan(ctx: &Ctx) -> Result<(), CliError> {
    let scenario = ctx.file.planning()?;
    let rows = planner::response_surfaces(&scenario)?;
    write_atomic(ctx.out(), "surface.csv", |w| planner::write_surface_csv(&rows, w))?;
    let best = planner::optimize(&scenario)?;
    write_atomic(ctx.out(), "optimum.csv", |w| best.write_csv(w))?;
    println!(
        "optimum: mu={} lambda={} l={} price={} unit_profit={} total_profit={}",
        best.mu, best.lambda_bar, best.l_bar, best.price, best.unit_profit, best.total_profit
    );
    Ok(())
}

fn mps_result(ctx: &Ctx) -> Result<hierplan::mps::MpsResult, CliError> {
    let demand = ctx.file.demand()?;
    let horizon = demand.horizon.unwrap_or(demand.daily.len());
    let options = MpsOptions {
        rollover_available_wip: ctx.cli.rollover_available_wip || demand.rollover_available_wip,
    };
    Ok(compute_mps(
        ctx.file.flow()?,
        &demand.book(),
        &ctx.file.capacities()?.mps,
        horizon,
        options,
    )?)
}

fn mps(ctx: &Ctx) -> Result<(), CliError> {
    let result = mps_result(ctx)?;
    write_atomic(ctx.out(), "mps.csv", |w| result.write_csv(w))
}

fn targets(ctx: &Ctx) -> Result<(), CliError> {
    let required = match &ctx.file.demand()?.required {
        Some(q) => q.clone(),
        None => mps_result(ctx)?.required(),
    };
    let table = movetarget::compute_targets(ctx.file.flow()?, &required, &ctx.file.capacities()?.stages)?;
    write_atomic(ctx.out(), "targets.csv", |w| table.write_csv(w))
}

fn print_summary(label: &str, s: &Summary) {
    println!(
        "{label}: mean={:.6} sd={:.6} ci95=[{:.6}, {:.6}] n={}",
        s.mean, s.stddev, s.ci_low, s.ci_high, s.n
    );
}

fn simulate(ctx: &Ctx) -> Result<(), CliError> {
    let sc = ctx.sim()?;
    let policy = ctx.policy(ctx.file.policy()?);
    let report = simflow::run(&sc, &policy)?;
    write_atomic(ctx.out(), "simreport.csv", |w| report.write_simreport_csv(w))?;
    write_atomic(ctx.out(), "jobs.csv", |w| report.write_jobs_csv(w))?;
    let r = ctx.replications(1);
    if r > 1 {
        let sum = simflow::replicate(&sc, &policy, r)?;
        for (m, s) in &sum.metrics {
            print_summary(m.name(), s);
        }
    } else {
        for m in Metric::ALL {
            println!("{}: {}", m.name(), report.metric(m));
        }
    }
    Ok(())
}

fn compare(ctx: &Ctx) -> Result<(), CliError> {
    let sc = ctx.sim()?;
    let a = ctx.policy(ctx.file.policy()?);
    let b = ctx.policy(ctx.file.against()?);
    let cmp = simflow::compare(&sc, &a, &b, ctx.replications(10))?;
    write_atomic(ctx.out(), "compare.csv", |w| cmp.write_csv(w))?;
    for c in &cmp.metrics {
        print_summary(&format!("{} a-b", c.metric.name()), &c.diff);
        println!("{} win_rate: {}", c.metric.name(), c.win_rate);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .clone()
        .ok_or_else(|| CliError::Config("--config <FILE> is required".into()))?;
    let file = ScenarioFile::load(&path)?;
    let ctx = Ctx { file, cli };
    match ctx.cli.command {
        Command::Curves => curves(&ctx),
        Command::Plan => plan(&ctx),
        Command::Mps => mps(&ctx),
        Command::Targets => targets(&ctx),
        Command::Simulate => simulate(&ctx),
        Command::Compare => compare(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hierplan: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
