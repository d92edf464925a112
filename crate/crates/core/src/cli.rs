//! Command-line front end. `run` returns the process exit code:
//! 0 on success, 1 when a scenario fails validation or a metrics column
//! is not validated, 2 for usage and runtime errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::engine::{run_scenario, Method};
use crate::error::{Error, Result, ValidationErrors};
use crate::scenario::metrics::render_reports;
use crate::scenario::{load_scenario, DemandSet, MetricsReport, TrajectoryTable, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gdhc-sim", version, about = "Low-temperature district network and ice storage simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write the trajectory CSV.
    Simulate(SimulateArgs),
    /// Compare two trajectory CSVs column by column (NMBE, CVRMSE).
    Metrics(MetricsArgs),
    /// Parse and validate a scenario file without running it.
    ValidateScenario {
        scenario: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Demand CSV with header `time_s,consumer_id,q_w`.
    #[arg(long)]
    pub demands: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Step size in seconds (initial step for rk45).
    #[arg(long)]
    pub dt: Option<f64>,
    /// euler, rk4 or rk45.
    #[arg(long)]
    pub method: Option<Method>,
    /// Simulated span in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Start time in seconds since 1 January, 00:00.
    #[arg(long)]
    pub t0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub measured: PathBuf,
    #[arg(long)]
    pub simulated: PathBuf,
    /// Columns to compare; comma separated or repeated.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub columns: Vec<String>,
    /// Number of model parameters subtracted from n.
    #[arg(long, default_value_t = 0)]
    pub p: usize,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Param(_) | Error::Parse { .. } => EXIT_INVALID,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_RUNTIME
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a, out),
        Command::Metrics(a) => metrics(&a, out),
        Command::ValidateScenario { scenario } => load_scenario(&scenario).map(|s| {
            let _ = writeln!(out, "{}: valid", s.path.display());
            EXIT_OK
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let mut scenario = load_scenario(&a.scenario)?.scenario;
    if let Some(dt) = a.dt {
        scenario.integrator.dt = dt;
        scenario.integrator.output_interval = scenario.integrator.output_interval.max(dt);
    }
    if let Some(m) = a.method {
        scenario.integrator.method = m;
    }
    if let Some(d) = a.duration {
        scenario.simulation.duration = d;
    }
    if let Some(t0) = a.t0 {
        scenario.simulation.start = t0;
    }
    let errs = scenario.validate();
    if !errs.is_empty() {
        return Err(ValidationErrors(errs).into());
    }
    let demands = DemandSet::load(&a.demands)?;
    let run = run_scenario(&scenario, &demands)?;
    run.table.write(&a.out)?;
    info!("{} rhs evaluations", run.evaluations);
    let _ = writeln!(
        out,
        "wrote {} rows x {} columns to {}",
        run.table.len(),
        run.table.columns.len() + 1,
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn metrics(a: &MetricsArgs, out: &mut dyn Write) -> Result<i32> {
    let measured = TrajectoryTable::read(&a.measured)?;
    let simulated = TrajectoryTable::read(&a.simulated)?;
    let mut reports = Vec::with_capacity(a.columns.len());
    for name in &a.columns {
        let column = |t: &TrajectoryTable, path: &PathBuf| {
            t.column(name)
                .ok_or_else(|| Error::Metrics(format!("column `{name}` missing in {}", path.display())))
        };
        let m = column(&measured, &a.measured)?;
        let s = column(&simulated, &a.simulated)?;
        reports.push(MetricsReport::compute(name, &m, &s, a.p)?);
    }
    let _ = write!(out, "{}", render_reports(&reports));
    Ok(if reports.iter().all(|r| r.verdict == Verdict::Validated) {
        EXIT_OK
    } else {
        EXIT_INVALID
    })
}
