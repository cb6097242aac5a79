//! Command-line front end. Exit codes: 0 success, 1 spec error, 2 validation
//! failure, 3 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use aoi_sleepwake::{certify, solve, SensingModel};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{load_spec, ExperimentKind, ExperimentSpec, SpecError};
use crate::experiment::{
    build_instance, run_experiment, run_lifetime, to_csv_string, write_csv, write_metadata, Point,
    RunError,
};
use crate::validate::{run_validation_battery, ValidationOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SPEC: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "aoi-sleepwake",
    version,
    about = "Age-optimal sleep-wake scheduling: solver, simulator and experiment sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment spec (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path; a `.meta.json` sidecar is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulated cycles per run.
    #[arg(long, global = true)]
    cycles: Option<u64>,
    #[arg(long, global = true)]
    replications: Option<u32>,
    #[arg(long, global = true, value_enum)]
    sensing_model: Option<SensingArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SensingArg {
    Idealized,
    Physical,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the base instance and print rates, regime and bounds as JSON.
    Solve,
    /// Simulate every scheduler of the experiment spec and write the result table.
    Simulate,
    /// Run the experiment sweep and write the result table.
    Sweep,
    /// Simulate battery depletion under the age-optimal rates.
    Lifetime,
    /// Run the randomized validation battery.
    Validate {
        /// Random instances per property.
        #[arg(long)]
        instances: Option<usize>,
        /// Report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

enum Failure {
    Spec(SpecError),
    Run(String),
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure::Spec(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<aoi_sleepwake::Error> for Failure {
    fn from(e: aoi_sleepwake::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn resolve_spec(
    common: &Common,
    default_kind: ExperimentKind,
) -> Result<ExperimentSpec, SpecError> {
    let mut spec = match &common.spec {
        Some(path) => load_spec(path)?,
        None => ExperimentSpec::defaults(default_kind),
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(out) = &common.out {
        spec.output_path = out.clone();
    }
    if let Some(cycles) = common.cycles {
        spec.cycles = cycles;
    }
    if let Some(r) = common.replications {
        spec.replications = r;
    }
    if let Some(model) = common.sensing_model {
        spec.sensing_model = match model {
            SensingArg::Idealized => SensingModel::Idealized,
            SensingArg::Physical => SensingModel::Physical,
        };
    }
    if spec.cycles == 0 {
        return Err(SpecError::Invalid(vec![
            "cycles: must be >= 1, got 0".into()
        ]));
    }
    if spec.replications == 0 {
        return Err(SpecError::Invalid(vec![
            "replications: must be >= 1, got 0".into(),
        ]));
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct SolveSummary {
    regime: String,
    total_efficiency: f64,
    x_star: f64,
    beta_star: f64,
    rates: Vec<f64>,
    weights: Vec<f64>,
    efficiencies: Vec<f64>,
    epsilon: f64,
    objective_normalized: f64,
    objective_unnormalized_seconds: f64,
    lower_bound: Option<f64>,
    upper_bound: Option<f64>,
}

fn solve_command(spec: &ExperimentSpec, out: &mut dyn Write) -> Result<(), Failure> {
    let point = Point {
        param: None,
        value: None,
    };
    let (sources, net) = build_instance(spec, point, 0)?;
    let solution = solve(&sources, &net)?;
    let report = aoi_sleepwake::peak_age_objective(&solution.rates, &sources, &net)?;
    let cert = certify(&sources, &net, &solution).ok();
    let summary = SolveSummary {
        regime: solution.regime.kind.to_string(),
        total_efficiency: solution.regime.total_efficiency,
        x_star: solution.x_star,
        beta_star: solution.beta_star,
        rates: solution.rates.rates().to_vec(),
        weights: sources.iter().map(|s| s.weight).collect(),
        efficiencies: sources.iter().map(|s| s.target_efficiency).collect(),
        epsilon: net.sensing_ratio,
        objective_normalized: report.objective_normalized,
        objective_unnormalized_seconds: report.objective_unnormalized,
        lower_bound: cert.map(|c| c.lower_bound),
        upper_bound: cert.map(|c| c.upper_bound),
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Run(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn table_command(spec: &ExperimentSpec, out: &mut dyn Write) -> Result<(), Failure> {
    let rows = run_experiment(spec)?;
    write_csv(&spec.output_path, &rows)?;
    let meta = write_metadata(&spec.output_path, spec)?;
    write!(out, "{}", to_csv_string(&rows))?;
    writeln!(
        out,
        "wrote {} rows to {} (metadata {})",
        rows.len(),
        spec.output_path.display(),
        meta.display()
    )?;
    Ok(())
}

fn lifetime_command(spec: &ExperimentSpec, out: &mut dyn Write) -> Result<(), Failure> {
    let rows = run_lifetime(spec)?;
    write_csv(&spec.output_path, &rows)?;
    write_metadata(&spec.output_path, spec)?;
    write!(out, "{}", to_csv_string(&rows))?;
    Ok(())
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_SPEC;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };

    let default_kind = match cli.command {
        Command::Solve => ExperimentKind::Solve,
        Command::Simulate => ExperimentKind::Simulate,
        Command::Sweep => ExperimentKind::SweepEpsilon,
        Command::Lifetime => ExperimentKind::Solve,
        Command::Validate { .. } => ExperimentKind::Validate,
    };
    let spec = match resolve_spec(&cli.common, default_kind) {
        Ok(spec) => spec,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_SPEC;
        }
    };

    let outcome = match cli.command {
        Command::Solve => solve_command(&spec, out),
        Command::Simulate => {
            let spec = ExperimentSpec {
                simulate: true,
                ..spec
            };
            table_command(&spec, out)
        }
        Command::Sweep => {
            if spec.kind.is_sweep() {
                table_command(&spec, out)
            } else {
                Err(Failure::Spec(SpecError::Invalid(vec![format!(
                    "kind: 'sweep' needs a sweep_* experiment, spec has '{}'",
                    spec.kind
                )])))
            }
        }
        Command::Lifetime => {
            if spec.base.battery.is_some() {
                lifetime_command(&spec, out)
            } else {
                Err(Failure::Spec(SpecError::Invalid(vec![
                    "battery: the lifetime command requires a battery table".into(),
                ])))
            }
        }
        Command::Validate { instances, json } => {
            let mut options =
                ValidationOptions::new(spec.seed, instances.unwrap_or(spec.validation_instances));
            if cli.common.cycles.is_some() {
                options.sim_cycles = spec.cycles;
            }
            let report = run_validation_battery(&options);
            let written = if json {
                serde_json::to_string_pretty(&report)
                    .map_err(std::io::Error::other)
                    .and_then(|text| writeln!(out, "{text}"))
            } else {
                write!(out, "{report}")
            };
            match written {
                Err(e) => Err(e.into()),
                Ok(()) if report.all_passed() => Ok(()),
                Ok(()) => {
                    let _ = writeln!(err, "validation failed");
                    return EXIT_VALIDATION;
                }
            }
        }
    };

    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Spec(e)) => {
            let _ = writeln!(err, "{e}");
            EXIT_SPEC
        }
        Err(Failure::Run(message)) => {
            let _ = writeln!(err, "error: {message}");
            EXIT_RUNTIME
        }
    }
}
