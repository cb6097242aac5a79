//! Sweep execution and result persistence.

use std::path::{Path, PathBuf};

use aoi_sleepwake::{
    certify, check_energy_feasibility, fixed_rate_baseline, peak_age_objective,
    run_lifetime_experiment, run_simulation, run_synchronized, solve, synchronized_optimum,
    Horizon, NetworkSpec, SimConfig, SimReport, SleepRates, SourceSpec,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ExperimentKind, ExperimentSpec, ParamValues, Scheduler, SweepParam};

/// Bumped whenever the CSV header changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 16] = [
    "experiment_kind",
    "sweep_param",
    "sweep_value",
    "scheduler",
    "replication",
    "objective_normalized",
    "objective_unnormalized_seconds",
    "empirical_peak_age_seconds",
    "ci_halfwidth",
    "lower_bound",
    "upper_bound",
    "gap",
    "feasible",
    "collision_fraction",
    "seed",
    "error",
];

#[derive(Debug, Error)]
pub enum RunError {
    #[error("experiment kind '{0}' does not produce a result table")]
    NoTable(ExperimentKind),
    #[error("{0}")]
    Model(#[from] aoi_sleepwake::Error),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

/// One CSV row. Empty cells mean "not applicable"; failures go in `error`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment_kind: String,
    pub sweep_param: String,
    pub sweep_value: Option<f64>,
    pub scheduler: String,
    pub replication: u32,
    pub objective_normalized: Option<f64>,
    pub objective_unnormalized_seconds: Option<f64>,
    pub empirical_peak_age_seconds: Option<f64>,
    pub ci_halfwidth: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub gap: Option<f64>,
    pub feasible: Option<bool>,
    pub collision_fraction: Option<f64>,
    pub seed: u64,
    pub error: String,
}

impl Row {
    fn blank(spec: &ExperimentSpec, point: Point, scheduler: Scheduler, replication: u32) -> Self {
        Self {
            experiment_kind: spec.kind.name().to_string(),
            sweep_param: point.param.map_or(String::new(), |p| p.name().to_string()),
            sweep_value: point.value,
            scheduler: scheduler.name().to_string(),
            replication,
            objective_normalized: None,
            objective_unnormalized_seconds: None,
            empirical_peak_age_seconds: None,
            ci_halfwidth: None,
            lower_bound: None,
            upper_bound: None,
            gap: None,
            feasible: None,
            collision_fraction: None,
            seed: replication_seed(spec, replication),
            error: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub param: Option<SweepParam>,
    pub value: Option<f64>,
}

/// Replication `r` runs with seed `seed + r`.
pub fn replication_seed(spec: &ExperimentSpec, replication: u32) -> u64 {
    spec.seed.wrapping_add(replication as u64)
}

/// Draw `count` values; earlier draws do not depend on `count`, so growing a
/// population keeps its existing members.
fn draw(values: &ParamValues, count: usize, rng: &mut StdRng) -> Vec<f64> {
    match values {
        ParamValues::Constant(v) => vec![*v; count],
        ParamValues::List(vs) => vs[..count].to_vec(),
        ParamValues::Uniform { uniform: [lo, hi] } => (0..count)
            .map(|_| hi - (hi - lo) * rng.random::<f64>())
            .collect(),
    }
}

/// The sources and network of one sweep point in one replication.
pub fn build_instance(
    spec: &ExperimentSpec,
    point: Point,
    replication: u32,
) -> aoi_sleepwake::Result<(Vec<SourceSpec>, NetworkSpec)> {
    let base = &spec.base;
    let seed = replication_seed(spec, replication);
    let mut weight_rng = StdRng::seed_from_u64(seed);
    let mut efficiency_rng = StdRng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut m = base.num_sources;
    let mut epsilon = base.epsilon;
    let mut common_efficiency = None;
    let mut battery = base.battery;
    if let (Some(param), Some(value)) = (point.param, point.value) {
        match param {
            SweepParam::Epsilon => epsilon = value,
            SweepParam::NumSources => m = value as usize,
            SweepParam::Efficiency => common_efficiency = Some(value),
            SweepParam::Lifetime => {
                if let Some(b) = battery.as_mut() {
                    b.target_lifetime = value;
                }
            }
        }
    }

    let weights = draw(&base.weights, m, &mut weight_rng);
    let efficiencies = match common_efficiency {
        Some(b) => vec![b; m],
        None => draw(&base.efficiencies, m, &mut efficiency_rng),
    };
    let sources = weights
        .iter()
        .zip(&efficiencies)
        .map(|(&w, &b)| match battery {
            Some(params) => SourceSpec::with_battery(w, params.to_spec()?),
            None => SourceSpec::new(w, b),
        })
        .collect::<aoi_sleepwake::Result<Vec<_>>>()?;
    let net = NetworkSpec::new(
        m,
        epsilon,
        base.mean_tx_time,
        base.tx_dist.with_mean(base.mean_tx_time),
    )?;
    Ok((sources, net))
}

fn sim_config(
    spec: &ExperimentSpec,
    sources: &[SourceSpec],
    net: &NetworkSpec,
    rates: SleepRates,
    horizon: Horizon,
    seed: u64,
) -> SimConfig {
    let mut config = SimConfig::new(sources.to_vec(), *net, rates, horizon, seed)
        .with_sensing_model(spec.sensing_model);
    if let Some(shape) = spec.base.collision_dist {
        config = config.with_collision_dist(shape.with_mean(net.mean_tx_time));
    }
    config
}

fn fill_simulation(row: &mut Row, report: &SimReport) {
    row.empirical_peak_age_seconds = Some(report.weighted_avg_peak_age.mean);
    row.ci_halfwidth = Some(report.weighted_avg_peak_age.ci_halfwidth);
    row.collision_fraction = Some(report.collision_fraction);
}

fn evaluate(
    spec: &ExperimentSpec,
    sources: &[SourceSpec],
    net: &NetworkSpec,
    scheduler: Scheduler,
    row: &mut Row,
) -> aoi_sleepwake::Result<()> {
    let horizon = Horizon::NumCycles(spec.cycles);
    let seed = row.seed;
    match scheduler {
        Scheduler::AgeOptimal | Scheduler::FixedRate => {
            let rates = if scheduler == Scheduler::AgeOptimal {
                let solution = solve(sources, net)?;
                let cert = certify(sources, net, &solution)?;
                row.lower_bound = Some(cert.lower_bound);
                row.upper_bound = Some(cert.upper_bound);
                row.gap = Some(cert.gap);
                solution.rates
            } else {
                fixed_rate_baseline(sources, net)?
            };
            let report = peak_age_objective(&rates, sources, net)?;
            row.objective_normalized = Some(report.objective_normalized);
            row.objective_unnormalized_seconds = Some(report.objective_unnormalized);
            row.feasible = Some(check_energy_feasibility(&rates, sources, net)?.feasible);
            row.collision_fraction = Some(report.collision_probability());
            if spec.simulate {
                let config = sim_config(spec, sources, net, rates, horizon, seed);
                fill_simulation(row, &run_simulation(&config)?);
            }
        }
        Scheduler::Synchronized => {
            let sync = synchronized_optimum(sources)?;
            row.objective_normalized = Some(sync.value);
            row.objective_unnormalized_seconds = Some(sync.value * net.mean_tx_time);
            row.feasible = Some(
                sync.access_probs
                    .iter()
                    .zip(sources)
                    .all(|(&a, s)| a <= s.target_efficiency),
            );
            row.collision_fraction = Some(0.0);
            if spec.simulate {
                // Rates are unused by the synchronized channel.
                let rates = SleepRates::external(vec![1.0; sources.len()])?;
                let config = sim_config(spec, sources, net, rates, horizon, seed);
                fill_simulation(row, &run_synchronized(&config, &sync.access_probs)?);
            }
        }
    }
    Ok(())
}

fn run_point(spec: &ExperimentSpec, point: Point, replication: u32) -> Vec<Row> {
    let instance = build_instance(spec, point, replication);
    spec.schedulers
        .iter()
        .map(|&scheduler| {
            let mut row = Row::blank(spec, point, scheduler, replication);
            let outcome = instance
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|(sources, net)| evaluate(spec, sources, net, scheduler, &mut row));
            if let Err(e) = outcome {
                row.error = e.to_string();
            }
            row
        })
        .collect()
}

fn points(spec: &ExperimentSpec) -> Vec<(Point, u32)> {
    spec.sweep_values()
        .into_iter()
        .flat_map(|(param, value)| (0..spec.replications).map(move |r| (Point { param, value }, r)))
        .collect()
}

/// Evaluate every sweep point, scheduler and replication. Points run in
/// parallel; rows come back in sweep order, then replication, then the
/// scheduler order of the spec. Per-point failures land in the `error` column.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<Row>, RunError> {
    if matches!(spec.kind, ExperimentKind::Validate) {
        return Err(RunError::NoTable(spec.kind));
    }
    let rows = points(spec)
        .par_iter()
        .map(|&(point, r)| run_point(spec, point, r))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimeRow {
    pub sweep_value: Option<f64>,
    pub replication: u32,
    pub source: usize,
    pub weight: f64,
    pub target_efficiency: f64,
    pub target_lifetime_seconds: f64,
    pub achieved_lifetime_seconds: f64,
    pub lifetime_ratio: f64,
    pub depleted: bool,
    pub seed: u64,
    pub error: String,
}

/// Simulate battery depletion under the age-optimal rates. Each run lasts
/// `lifetime_horizon_factor` times the largest target lifetime.
pub fn run_lifetime(spec: &ExperimentSpec) -> Result<Vec<LifetimeRow>, RunError> {
    let rows = points(spec)
        .par_iter()
        .map(|&(point, r)| lifetime_point(spec, point, r))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(rows)
}

fn lifetime_point(spec: &ExperimentSpec, point: Point, replication: u32) -> Vec<LifetimeRow> {
    let seed = replication_seed(spec, replication);
    let failed = |message: String| {
        vec![LifetimeRow {
            sweep_value: point.value,
            replication,
            source: 0,
            weight: f64::NAN,
            target_efficiency: f64::NAN,
            target_lifetime_seconds: f64::NAN,
            achieved_lifetime_seconds: f64::NAN,
            lifetime_ratio: f64::NAN,
            depleted: false,
            seed,
            error: message,
        }]
    };
    let outcome = build_instance(spec, point, replication).and_then(|(sources, net)| {
        let solution = solve(&sources, &net)?;
        let longest = sources
            .iter()
            .filter_map(|s| s.battery.map(|b| b.target_lifetime))
            .fold(0.0, f64::max);
        let horizon = Horizon::SimTime(spec.lifetime_horizon_factor * longest);
        let config = sim_config(spec, &sources, &net, solution.rates, horizon, seed);
        let report = run_lifetime_experiment(&config)?;
        Ok((sources, report))
    });
    let (sources, report) = match outcome {
        Ok(v) => v,
        Err(e) => return failed(e.to_string()),
    };
    let lifetimes = report.lifetime_achieved.unwrap_or_default();
    sources
        .iter()
        .zip(&lifetimes)
        .enumerate()
        .map(|(l, (s, &achieved))| {
            let target = s.battery.map_or(f64::NAN, |b| b.target_lifetime);
            LifetimeRow {
                sweep_value: point.value,
                replication,
                source: l,
                weight: s.weight,
                target_efficiency: s.target_efficiency,
                target_lifetime_seconds: target,
                achieved_lifetime_seconds: achieved,
                lifetime_ratio: achieved / target,
                depleted: achieved < report.sim_time,
                seed,
                error: String::new(),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), RunError> {
    let output_error = |message: String| RunError::Output {
        path: path.to_path_buf(),
        message,
    };
    let mut writer = csv::Writer::from_path(path).map_err(|e| output_error(e.to_string()))?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| output_error(e.to_string()))?;
    }
    writer.flush().map_err(|e| output_error(e.to_string()))
}

/// Table rendered to a string, same format as [`write_csv`].
pub fn to_csv_string<T: Serialize>(rows: &[T]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("in-memory CSV write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

/// `results.csv` -> `results.csv.meta.json`.
pub fn metadata_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata<'a> {
    pub artifact: &'static str,
    pub version: &'static str,
    pub csv_schema_version: u32,
    pub csv_columns: Vec<&'static str>,
    pub spec: &'a ExperimentSpec,
    pub sensing_energy_charged: bool,
    pub notes: Vec<&'static str>,
}

pub fn metadata(spec: &ExperimentSpec) -> Metadata<'_> {
    Metadata {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        csv_schema_version: CSV_SCHEMA_VERSION,
        csv_columns: CSV_HEADER.to_vec(),
        spec,
        sensing_energy_charged: false,
        notes: vec![
            "objective_normalized is in units of the mean transmission time",
            "collision_fraction is analytic unless the row was simulated",
            "the throughput-optimal baseline is not implemented; its rate rule is outside this model",
        ],
    }
}

pub fn write_metadata(output: &Path, spec: &ExperimentSpec) -> Result<PathBuf, RunError> {
    let path = metadata_path(output);
    let text = serde_json::to_string_pretty(&metadata(spec)).map_err(|e| RunError::Output {
        path: path.clone(),
        message: e.to_string(),
    })?;
    std::fs::write(&path, text + "\n").map_err(|e| RunError::Output {
        path: path.clone(),
        message: e.to_string(),
    })?;
    Ok(path)
}
