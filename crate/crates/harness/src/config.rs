//! Experiment specifications: parsing, defaults and validation.
//!
//! A spec is a flat TOML (or JSON) document. Every field is optional; missing
//! fields take the defaults below. Validation collects every problem it finds
//! instead of stopping at the first one.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use aoi_sleepwake::{BatterySpec, SensingModel, TxDistribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MEAN_TX_TIME: f64 = 5e-3;
pub const DEFAULT_SENSING_TIME: f64 = 40e-6;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_NUM_SOURCES: usize = 10;
pub const DEFAULT_CYCLES: u64 = 1_000_000;
pub const DEFAULT_VALIDATION_INSTANCES: usize = 200;
pub const DEFAULT_LIFETIME_HORIZON_FACTOR: f64 = 2.0;
pub const DEFAULT_OUTPUT: &str = "results.csv";

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid experiment spec:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Solve,
    Simulate,
    SweepEpsilon,
    SweepSources,
    SweepEfficiency,
    SweepLifetime,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::SweepEpsilon => "sweep_epsilon",
            ExperimentKind::SweepSources => "sweep_sources",
            ExperimentKind::SweepEfficiency => "sweep_efficiency",
            ExperimentKind::SweepLifetime => "sweep_lifetime",
            ExperimentKind::Validate => "validate",
        }
    }

    pub fn is_sweep(self) -> bool {
        self.default_axis().is_some()
    }

    pub fn default_axis(self) -> Option<SweepParam> {
        match self {
            ExperimentKind::SweepEpsilon => Some(SweepParam::Epsilon),
            ExperimentKind::SweepSources => Some(SweepParam::NumSources),
            ExperimentKind::SweepEfficiency => Some(SweepParam::Efficiency),
            ExperimentKind::SweepLifetime => Some(SweepParam::Lifetime),
            _ => None,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    AgeOptimal,
    FixedRate,
    Synchronized,
}

impl Scheduler {
    pub const ALL: [Scheduler; 3] = [
        Scheduler::AgeOptimal,
        Scheduler::FixedRate,
        Scheduler::Synchronized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheduler::AgeOptimal => "age_optimal",
            Scheduler::FixedRate => "fixed_rate",
            Scheduler::Synchronized => "synchronized",
        }
    }
}

impl FromStr for Scheduler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheduler::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Epsilon,
    NumSources,
    Efficiency,
    Lifetime,
}

impl SweepParam {
    pub const ALL: [SweepParam; 4] = [
        SweepParam::Epsilon,
        SweepParam::NumSources,
        SweepParam::Efficiency,
        SweepParam::Lifetime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::NumSources => "num_sources",
            SweepParam::Efficiency => "efficiency",
            SweepParam::Lifetime => "lifetime",
        }
    }
}

/// A per-source parameter: one value for everyone, an explicit list, or
/// independent draws from `(lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValues {
    Constant(f64),
    List(Vec<f64>),
    Uniform { uniform: [f64; 2] },
}

impl ParamValues {
    fn check(&self, field: &str, upper: Option<f64>, errors: &mut Vec<String>) {
        let in_range = |v: f64| v > 0.0 && v.is_finite() && upper.is_none_or(|u| v <= u);
        let range = match upper {
            Some(u) => format!("in (0, {u}]"),
            None => "> 0".to_string(),
        };
        match self {
            ParamValues::Constant(v) if !in_range(*v) => {
                errors.push(format!("{field}: value {v} must be {range}"))
            }
            ParamValues::List(vs) => {
                if vs.is_empty() {
                    errors.push(format!("{field}: list is empty"));
                }
                for (i, &v) in vs.iter().enumerate() {
                    if !in_range(v) {
                        errors.push(format!("{field}[{i}]: value {v} must be {range}"));
                    }
                }
            }
            ParamValues::Uniform { uniform: [lo, hi] }
                if (!(*lo >= 0.0 && hi > lo && hi.is_finite())
                    || upper.is_some_and(|u| *hi > u)) =>
            {
                errors.push(format!(
                    "{field}: uniform range ({lo}, {hi}] must satisfy 0 <= lo < hi, values {range}"
                ));
            }
            _ => {}
        }
    }
}

/// Transmission-time distribution shape; its mean is `mean_tx_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistShape {
    Deterministic,
    Exponential,
    Lognormal { sigma: f64 },
}

impl DistShape {
    pub fn with_mean(self, mean: f64) -> TxDistribution {
        match self {
            DistShape::Deterministic => TxDistribution::Deterministic { mean },
            DistShape::Exponential => TxDistribution::Exponential { mean },
            DistShape::Lognormal { sigma } => TxDistribution::Lognormal { mean, sigma },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryParams {
    pub initial_level: f64,
    pub target_lifetime: f64,
    pub replenishment_rate: f64,
    pub avg_tx_power: f64,
}

impl BatteryParams {
    pub fn to_spec(self) -> aoi_sleepwake::Result<BatterySpec> {
        BatterySpec::new(
            self.initial_level,
            self.target_lifetime,
            self.replenishment_rate,
            self.avg_tx_power,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Network and population parameters shared by every sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseParams {
    pub num_sources: usize,
    /// `t_s / E[T]`.
    pub epsilon: f64,
    /// `E[T]`, seconds.
    pub mean_tx_time: f64,
    pub tx_dist: DistShape,
    pub collision_dist: Option<DistShape>,
    pub weights: ParamValues,
    pub efficiencies: ParamValues,
    /// Shared by every source; overrides `efficiencies`.
    pub battery: Option<BatteryParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replications: u32,
    pub schedulers: Vec<Scheduler>,
    pub output_path: PathBuf,
    pub simulate: bool,
    pub cycles: u64,
    pub sensing_model: SensingModel,
    pub base: BaseParams,
    pub sweep: Option<SweepAxis>,
    pub validation_instances: usize,
    /// Lifetime runs last this many times the longest target lifetime.
    pub lifetime_horizon_factor: f64,
}

/// On-disk form: every field optional, base parameters at the top level.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: Option<ExperimentKind>,
    seed: Option<u64>,
    replications: Option<i64>,
    schedulers: Option<Vec<String>>,
    output_path: Option<PathBuf>,
    simulate: Option<bool>,
    cycles: Option<i64>,
    sensing_model: Option<SensingModel>,
    #[serde(alias = "M")]
    num_sources: Option<i64>,
    #[serde(alias = "sensing_ratio")]
    epsilon: Option<f64>,
    /// Seconds; alternative to `epsilon`.
    sensing_time: Option<f64>,
    mean_tx_time: Option<f64>,
    tx_dist: Option<DistShape>,
    collision_dist: Option<DistShape>,
    #[serde(alias = "w")]
    weights: Option<ParamValues>,
    #[serde(alias = "b")]
    efficiencies: Option<ParamValues>,
    battery: Option<BatteryParams>,
    sweep: Option<RawSweep>,
    validation_instances: Option<i64>,
    lifetime_horizon_factor: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    param: Option<String>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text, Format::from_path(path), &path.display().to_string())
}

pub fn parse_spec(text: &str, format: Format, origin: &str) -> Result<ExperimentSpec, SpecError> {
    let raw: RawSpec = match format {
        Format::Toml => toml::from_str(text).map_err(|e| SpecError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })?,
        Format::Json => serde_json::from_str(text).map_err(|e| SpecError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })?,
    };
    resolve(raw)
}

impl ExperimentSpec {
    /// Default spec of the given kind.
    pub fn defaults(kind: ExperimentKind) -> Self {
        resolve(RawSpec {
            kind: Some(kind),
            ..RawSpec::default()
        })
        .expect("defaults are valid")
    }

    pub fn sweep_values(&self) -> Vec<(Option<SweepParam>, Option<f64>)> {
        match &self.sweep {
            Some(axis) => axis
                .values
                .iter()
                .map(|&v| (Some(axis.param), Some(v)))
                .collect(),
            None => vec![(None, None)],
        }
    }

    /// Re-run validation, e.g. after command-line overrides.
    pub fn validate(&self) -> Result<(), SpecError> {
        let mut errors = Vec::new();
        check_resolved(self, &mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(SpecError::Invalid(errors))
        }
    }

    pub fn max_sources(&self) -> usize {
        match &self.sweep {
            Some(SweepAxis {
                param: SweepParam::NumSources,
                values,
            }) => values.iter().fold(0.0f64, |a, &v| a.max(v)) as usize,
            _ => self.base.num_sources,
        }
    }
}

fn default_sweep_values(param: SweepParam, battery: Option<&BatteryParams>) -> Vec<f64> {
    match param {
        SweepParam::Epsilon => vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
        SweepParam::NumSources => vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
        SweepParam::Efficiency => (1..=10).map(|i| i as f64 / 10.0).collect(),
        SweepParam::Lifetime => {
            let d = battery.map_or(1.0, |b| b.target_lifetime);
            [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|f| f * d).collect()
        }
    }
}

fn resolve(raw: RawSpec) -> Result<ExperimentSpec, SpecError> {
    let mut errors = Vec::new();
    let kind = raw.kind.unwrap_or(ExperimentKind::Solve);

    let positive_count = |field: &str, v: Option<i64>, default: i64, errors: &mut Vec<String>| {
        let v = v.unwrap_or(default);
        if v < 1 {
            errors.push(format!("{field}: must be >= 1, got {v}"));
            1
        } else {
            v
        }
    };
    let replications = positive_count("replications", raw.replications, 1, &mut errors) as u32;
    let cycles = positive_count("cycles", raw.cycles, DEFAULT_CYCLES as i64, &mut errors) as u64;
    let num_sources = positive_count(
        "num_sources",
        raw.num_sources,
        DEFAULT_NUM_SOURCES as i64,
        &mut errors,
    ) as usize;
    let validation_instances = positive_count(
        "validation_instances",
        raw.validation_instances,
        DEFAULT_VALIDATION_INSTANCES as i64,
        &mut errors,
    ) as usize;

    let mut schedulers = Vec::new();
    for name in raw
        .schedulers
        .unwrap_or_else(|| vec!["age_optimal".into(), "fixed_rate".into()])
    {
        match name.parse::<Scheduler>() {
            Ok(s) if !schedulers.contains(&s) => schedulers.push(s),
            Ok(s) => errors.push(format!("schedulers: '{}' listed twice", s.name())),
            Err(unknown) => errors.push(format!(
                "schedulers: unknown scheduler '{unknown}' (expected one of age_optimal, fixed_rate, synchronized)"
            )),
        }
    }

    let mean_tx_time = raw.mean_tx_time.unwrap_or(DEFAULT_MEAN_TX_TIME);
    let epsilon = match (raw.epsilon, raw.sensing_time) {
        (Some(_), Some(_)) => {
            errors.push("epsilon and sensing_time are mutually exclusive".into());
            0.0
        }
        (Some(e), None) => e,
        (None, Some(t)) => t / mean_tx_time,
        (None, None) => DEFAULT_SENSING_TIME / DEFAULT_MEAN_TX_TIME,
    };

    let sweep = match (raw.sweep, kind.default_axis()) {
        (Some(_), None) => {
            errors.push(format!(
                "sweep: experiment kind '{kind}' does not take a sweep axis"
            ));
            None
        }
        (raw_sweep, Some(default_param)) => {
            let param = match raw_sweep.as_ref().and_then(|s| s.param.as_deref()) {
                None => Some(default_param),
                Some(name) => {
                    let found = SweepParam::ALL.into_iter().find(|p| p.name() == name);
                    if found.is_none() {
                        errors.push(format!(
                            "sweep.param: unknown parameter '{name}' (expected one of epsilon, num_sources, efficiency, lifetime)"
                        ));
                    }
                    found
                }
            };
            param.map(|param| SweepAxis {
                param,
                values: raw_sweep
                    .and_then(|s| s.values)
                    .unwrap_or_else(|| default_sweep_values(param, raw.battery.as_ref())),
            })
        }
        (None, None) => None,
    };

    let spec = ExperimentSpec {
        kind,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        replications,
        schedulers,
        output_path: raw
            .output_path
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
        simulate: raw.simulate.unwrap_or(kind == ExperimentKind::Simulate),
        cycles,
        sensing_model: raw.sensing_model.unwrap_or_default(),
        base: BaseParams {
            num_sources,
            epsilon,
            mean_tx_time,
            tx_dist: raw.tx_dist.unwrap_or(DistShape::Deterministic),
            collision_dist: raw.collision_dist,
            weights: raw.weights.unwrap_or(ParamValues::Uniform {
                uniform: [0.0, 10.0],
            }),
            efficiencies: raw.efficiencies.unwrap_or(ParamValues::Uniform {
                uniform: [0.0, 1.0],
            }),
            battery: raw.battery,
        },
        sweep,
        validation_instances,
        lifetime_horizon_factor: raw
            .lifetime_horizon_factor
            .unwrap_or(DEFAULT_LIFETIME_HORIZON_FACTOR),
    };
    check_resolved(&spec, &mut errors);
    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(SpecError::Invalid(errors))
    }
}

fn check_resolved(spec: &ExperimentSpec, errors: &mut Vec<String>) {
    let base = &spec.base;
    if spec.schedulers.is_empty() && !errors.iter().any(|e| e.starts_with("schedulers")) {
        errors.push("schedulers: at least one scheduler is required".into());
    }
    if !(base.epsilon >= 0.0 && base.epsilon.is_finite()) {
        errors.push(format!("epsilon: must be >= 0, got {}", base.epsilon));
    }
    if !(base.mean_tx_time > 0.0 && base.mean_tx_time.is_finite()) {
        errors.push(format!(
            "mean_tx_time: must be > 0, got {}",
            base.mean_tx_time
        ));
    }
    for (field, dist) in [
        ("tx_dist", Some(base.tx_dist)),
        ("collision_dist", base.collision_dist),
    ] {
        if let Some(DistShape::Lognormal { sigma }) = dist {
            if !(sigma > 0.0 && sigma.is_finite()) {
                errors.push(format!("{field}: lognormal sigma must be > 0, got {sigma}"));
            }
        }
    }
    base.weights.check("weights", None, errors);
    base.efficiencies.check("efficiencies", Some(1.0), errors);

    let needed = spec.max_sources().max(1);
    for (field, values) in [
        ("weights", &base.weights),
        ("efficiencies", &base.efficiencies),
    ] {
        if let ParamValues::List(vs) = values {
            if vs.len() < needed {
                errors.push(format!(
                    "{field}: list has {} entries but {needed} sources are needed",
                    vs.len()
                ));
            }
        }
    }

    if let Some(b) = &base.battery {
        if let Err(e) = b.to_spec() {
            errors.push(format!("battery: {e}"));
        }
    }
    if !(spec.lifetime_horizon_factor >= 1.0 && spec.lifetime_horizon_factor.is_finite()) {
        errors.push(format!(
            "lifetime_horizon_factor: must be >= 1, got {}",
            spec.lifetime_horizon_factor
        ));
    }

    if let Some(axis) = &spec.sweep {
        if axis.values.is_empty() {
            errors.push("sweep.values: list is empty".into());
        }
        for (i, &v) in axis.values.iter().enumerate() {
            let ok = match axis.param {
                SweepParam::Epsilon => v >= 0.0 && v.is_finite(),
                SweepParam::NumSources => v >= 1.0 && v.fract() == 0.0 && v <= 1e6,
                SweepParam::Efficiency => v > 0.0 && v <= 1.0,
                SweepParam::Lifetime => v > 0.0 && v.is_finite(),
            };
            if !ok {
                errors.push(format!(
                    "sweep.values[{i}]: {v} is not a valid {}",
                    axis.param.name()
                ));
            }
        }
        if axis.param == SweepParam::Lifetime && base.battery.is_none() {
            errors.push("sweep: a lifetime axis requires a battery table".into());
        }
    }
    if spec.kind == ExperimentKind::SweepLifetime && base.battery.is_none() {
        errors.push("battery: sweep_lifetime requires a battery table".into());
    }
}
