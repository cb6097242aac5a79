//! Discrete-event simulation of the sleep-wake carrier-sensing channel.
//!
//! The simulation advances one cycle at a time. Sleep periods are
//! exponential, so at the end of every busy period each source's residual
//! sleep time is a fresh exponential draw; there is no per-source event queue.
//! In each cycle:
//!
//! 1. every live source draws a residual sleep `S_l ~ Exp(mean = E[T]/r_l)`;
//! 2. the first wake-up at `S_(1)` starts a busy period, and every source with
//!    `S_l ≤ S_(1) + t_s` joins it (none of them can hear the others);
//! 3. a lone transmitter delivers a fresh update, otherwise all collide;
//! 4. the busy period lasts `T` drawn from the transmission-time distribution.
//!
//! Under [`SensingModel::Idealized`] the cycle is `S_(1) + T`, which is the
//! accounting the closed forms use. [`SensingModel::Physical`] also places the
//! winner's `t_s` sensing window inside the cycle.
//!
//! Sensing and sleeping draw no energy in either model.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp, LogNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkSpec, SleepRates, SourceSpec, TxDistribution};

pub const DEFAULT_WARMUP_FRACTION: f64 = 0.05;
pub const DEFAULT_BATCHES: usize = 30;

/// Two-sided 97.5% quantile of Student's t with 29 degrees of freedom.
const T_QUANTILE_29: f64 = 2.045_229_642_132_703;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    NumCycles(u64),
    /// Simulated seconds.
    SimTime(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingModel {
    #[default]
    Idealized,
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub sources: Vec<SourceSpec>,
    pub net: NetworkSpec,
    pub rates: SleepRates,
    pub horizon: Horizon,
    pub seed: u64,
    pub sensing_model: SensingModel,
    pub battery_tracking: bool,
    /// Collision durations; `None` uses the transmission-time distribution.
    pub collision_dist: Option<TxDistribution>,
    pub warmup_fraction: f64,
    pub batches: usize,
}

impl SimConfig {
    pub fn new(
        sources: Vec<SourceSpec>,
        net: NetworkSpec,
        rates: SleepRates,
        horizon: Horizon,
        seed: u64,
    ) -> Self {
        Self {
            sources,
            net,
            rates,
            horizon,
            seed,
            sensing_model: SensingModel::Idealized,
            battery_tracking: false,
            collision_dist: None,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            batches: DEFAULT_BATCHES,
        }
    }

    pub fn with_sensing_model(mut self, model: SensingModel) -> Self {
        self.sensing_model = model;
        self
    }

    pub fn with_collision_dist(mut self, dist: TxDistribution) -> Self {
        self.collision_dist = Some(dist);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        crate::model::validate_sources(&self.sources)?;
        crate::model::check_sources_dimension(&self.sources, &self.net)?;
        self.rates.check_dimension(&self.net)?;
        match self.horizon {
            Horizon::NumCycles(0) => {
                return Err(Error::InvalidConfig(
                    "horizon must be at least one cycle".into(),
                ))
            }
            Horizon::SimTime(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::InvalidConfig(format!(
                    "simulated time must be > 0, got {t}"
                )))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidConfig(format!(
                "warm-up fraction must be in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if self.batches < 2 {
            return Err(Error::InvalidConfig("need at least two batches".into()));
        }
        if let Some(d) = &self.collision_dist {
            d.validate()?;
        }
        Ok(())
    }
}

/// Sample mean with a confidence half-width (95%).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci_halfwidth: f64,
}

impl Estimate {
    fn missing() -> Self {
        Self {
            mean: f64::NAN,
            std_error: f64::NAN,
            ci_halfwidth: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// `Σ w_l × (average peak age of l)`, seconds.
    pub weighted_avg_peak_age: Estimate,
    pub per_source_avg_peak_age: Vec<Estimate>,
    pub empirical_alpha: Vec<f64>,
    pub alpha_std_error: Vec<f64>,
    pub empirical_sigma: Vec<f64>,
    pub sigma_std_error: Vec<f64>,
    pub collision_fraction: f64,
    /// All cycles simulated, warm-up included.
    pub cycles_run: u64,
    /// Cycles after warm-up; the statistics below are computed over these.
    pub cycles_measured: u64,
    pub success_cycles: Vec<u64>,
    pub collision_cycles: u64,
    pub empirical_mean_cycle: f64,
    pub mean_cycle_std_error: f64,
    pub peak_samples: Vec<usize>,
    /// Battery depletion time per source (or end of run if it never ran out).
    pub lifetime_achieved: Option<Vec<f64>>,
    pub sim_time: f64,
    /// Always false: carrier sensing is not charged to the battery.
    pub sensing_energy_charged: bool,
    pub warnings: Vec<String>,
}

/// Age process of one source. Packets are generated at the start of their
/// transmission, so a delivery resets the age to that packet's `T`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgeTracker {
    last_delivery: Option<f64>,
    last_generation: Option<f64>,
    last_tx_time: f64,
    recording: bool,
    /// Peak ages recorded after warm-up.
    pub peaks: Vec<f64>,
    /// Inter-departure time ending at each recorded peak.
    pub inter_departures: Vec<f64>,
    /// Transmission time of the packet whose age each peak measures.
    pub tx_times: Vec<f64>,
}

impl AgeTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// `Δ(t) = t - U(t)`; the age starts at zero at `t = 0`.
    pub fn age_at(&self, t: f64) -> f64 {
        t - self.last_generation.unwrap_or(0.0)
    }

    pub fn last_generation(&self) -> Option<f64> {
        self.last_generation
    }

    pub fn set_recording(&mut self, on: bool) {
        self.recording = on;
    }

    /// Register a delivery of a packet generated at `generation` that took
    /// `tx_time`; returns the peak age just before it, if there was an earlier
    /// delivery to measure from.
    pub fn deliver(&mut self, generation: f64, delivery: f64, tx_time: f64) -> Option<f64> {
        let peak = self.last_delivery.map(|prev| {
            let inter = delivery - prev;
            let peak = inter + self.last_tx_time;
            if self.recording {
                self.peaks.push(peak);
                self.inter_departures.push(inter);
                self.tx_times.push(self.last_tx_time);
            }
            peak
        });
        self.last_delivery = Some(delivery);
        self.last_generation = Some(generation);
        self.last_tx_time = tx_time;
        peak
    }
}

enum Duration {
    Fixed(f64),
    Exp(Exp<f64>),
    LogNormal(LogNormal<f64>),
}

impl Duration {
    fn new(dist: &TxDistribution) -> Result<Self> {
        Ok(match *dist {
            TxDistribution::Deterministic { mean } => Duration::Fixed(mean),
            TxDistribution::Exponential { mean } => Duration::Exp(
                Exp::new(1.0 / mean).map_err(|e| Error::InvalidNetwork(e.to_string()))?,
            ),
            TxDistribution::Lognormal { mean, sigma } => Duration::LogNormal(
                LogNormal::new(mean.ln() - 0.5 * sigma * sigma, sigma)
                    .map_err(|e| Error::InvalidNetwork(e.to_string()))?,
            ),
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Duration::Fixed(t) => *t,
            Duration::Exp(d) => d.sample(rng),
            Duration::LogNormal(d) => d.sample(rng),
        }
    }
}

/// Stream 0 drives the channel (durations, synchronized-slot winners);
/// stream `l + 1` drives source `l`. Streams are 2^128 draws apart, so adding
/// a source leaves the existing streams untouched.
fn streams(seed: u64, sources: usize) -> (Xoshiro256PlusPlus, Vec<Xoshiro256PlusPlus>) {
    let mut base = Xoshiro256PlusPlus::seed_from_u64(seed);
    let channel = base.clone();
    let per_source = (0..sources)
        .map(|_| {
            base.jump();
            base.clone()
        })
        .collect();
    (channel, per_source)
}

/// Batch-means estimate of the mean of a correlated sequence.
fn batch_means(samples: &[f64], batches: usize) -> Estimate {
    let n = samples.len();
    if n == 0 {
        return Estimate::missing();
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let k = batches.min(n);
    if k < 2 {
        return Estimate {
            mean,
            std_error: f64::NAN,
            ci_halfwidth: f64::NAN,
        };
    }
    let batch_mean = |b: usize| {
        let (lo, hi) = (b * n / k, (b + 1) * n / k);
        samples[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
    };
    let means: Vec<f64> = (0..k).map(batch_mean).collect();
    let grand = means.iter().sum::<f64>() / k as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (k - 1) as f64;
    let std_error = (var / k as f64).sqrt();
    let quantile = if k == DEFAULT_BATCHES {
        T_QUANTILE_29
    } else {
        // Normal approximation away from the default batch count.
        1.959_963_984_540_054
    };
    Estimate {
        mean,
        std_error,
        ci_halfwidth: quantile * std_error,
    }
}

#[derive(Default)]
struct RatioAccumulator {
    x: f64,
    xx: f64,
    xc: f64,
}

/// Per-cycle sums for the regenerative estimators.
struct CycleStats {
    cycles: u64,
    c: f64,
    cc: f64,
    per_source: Vec<RatioAccumulator>,
    successes: Vec<u64>,
    collisions: u64,
}

impl CycleStats {
    fn new(m: usize) -> Self {
        Self {
            cycles: 0,
            c: 0.0,
            cc: 0.0,
            per_source: (0..m).map(|_| RatioAccumulator::default()).collect(),
            successes: vec![0; m],
            collisions: 0,
        }
    }

    fn record(&mut self, cycle_len: f64, busy: f64, members: &[usize]) {
        self.cycles += 1;
        self.c += cycle_len;
        self.cc += cycle_len * cycle_len;
        for &l in members {
            let acc = &mut self.per_source[l];
            acc.x += busy;
            acc.xx += busy * busy;
            acc.xc += busy * cycle_len;
        }
        if members.len() == 1 {
            self.successes[members[0]] += 1;
        } else {
            self.collisions += 1;
        }
    }

    /// `(σ̂_l, se)` for the ratio `Σ busy_l / Σ cycle` by the delta method.
    fn busy_fractions(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.cycles as f64;
        let cbar = self.c / n;
        self.per_source
            .iter()
            .map(|acc| {
                let ratio = acc.x / self.c;
                let var = (acc.xx - 2.0 * ratio * acc.xc + ratio * ratio * self.cc) / n;
                (ratio, (var.max(0.0) / n).sqrt() / cbar)
            })
            .unzip()
    }

    fn mean_cycle(&self) -> (f64, f64) {
        let n = self.cycles as f64;
        let mean = self.c / n;
        let var = (self.cc / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

struct Battery {
    level: f64,
    drain: f64,
    recharge: f64,
    depleted_at: Option<f64>,
}

fn build_report(
    config: &SimConfig,
    stats: &CycleStats,
    trackers: &[AgeTracker],
    cycles_run: u64,
    sim_time: f64,
    lifetimes: Option<Vec<f64>>,
    busy_override: Option<Vec<f64>>,
) -> SimReport {
    let m = config.sources.len();
    let mut warnings = Vec::new();
    let n = stats.cycles.max(1) as f64;

    let per_source_avg_peak_age: Vec<Estimate> = trackers
        .iter()
        .map(|t| batch_means(&t.peaks, config.batches))
        .collect();
    for (l, t) in trackers.iter().enumerate() {
        if t.peaks.is_empty() {
            warnings.push(format!(
                "source {l} produced no peak-age samples after warm-up; horizon too short"
            ));
        }
    }
    let weighted_mean = config
        .sources
        .iter()
        .zip(&per_source_avg_peak_age)
        .map(|(s, e)| s.weight * e.mean)
        .sum::<f64>();
    let weighted_var = config
        .sources
        .iter()
        .zip(&per_source_avg_peak_age)
        .map(|(s, e)| (s.weight * e.std_error).powi(2))
        .sum::<f64>();
    let weighted_se = weighted_var.sqrt();

    let empirical_alpha: Vec<f64> = stats.successes.iter().map(|&k| k as f64 / n).collect();
    let alpha_std_error = empirical_alpha
        .iter()
        .map(|&a| (a * (1.0 - a) / n).sqrt())
        .collect();
    let (empirical_sigma, sigma_std_error) = match busy_override {
        Some(s) => (s, vec![0.0; m]),
        None if stats.cycles > 0 => stats.busy_fractions(),
        None => (vec![f64::NAN; m], vec![f64::NAN; m]),
    };
    let (empirical_mean_cycle, mean_cycle_std_error) = if stats.cycles > 0 {
        stats.mean_cycle()
    } else {
        (f64::NAN, f64::NAN)
    };

    SimReport {
        weighted_avg_peak_age: Estimate {
            mean: weighted_mean,
            std_error: weighted_se,
            ci_halfwidth: T_QUANTILE_29 * weighted_se,
        },
        per_source_avg_peak_age,
        empirical_alpha,
        alpha_std_error,
        empirical_sigma,
        sigma_std_error,
        collision_fraction: stats.collisions as f64 / n,
        cycles_run,
        cycles_measured: stats.cycles,
        success_cycles: stats.successes.clone(),
        collision_cycles: stats.collisions,
        empirical_mean_cycle,
        mean_cycle_std_error,
        peak_samples: trackers.iter().map(|t| t.peaks.len()).collect(),
        lifetime_achieved: lifetimes,
        sim_time,
        sensing_energy_charged: false,
        warnings,
    }
}

struct WarmUp {
    cycles: Option<u64>,
    time: Option<f64>,
}

impl WarmUp {
    fn new(config: &SimConfig) -> Self {
        match config.horizon {
            Horizon::NumCycles(n) => Self {
                cycles: Some((config.warmup_fraction * n as f64).floor() as u64),
                time: None,
            },
            Horizon::SimTime(t) => Self {
                cycles: None,
                time: Some(config.warmup_fraction * t),
            },
        }
    }

    fn over(&self, cycle: u64, now: f64) -> bool {
        match (self.cycles, self.time) {
            (Some(c), _) => cycle >= c,
            (_, Some(t)) => now >= t,
            _ => true,
        }
    }
}

fn horizon_reached(horizon: Horizon, cycle: u64, now: f64) -> bool {
    match horizon {
        Horizon::NumCycles(n) => cycle >= n,
        Horizon::SimTime(t) => now >= t,
    }
}

/// Run the sleep-wake channel and also return the per-source age trackers.
pub fn run_simulation_traced(config: &SimConfig) -> Result<(SimReport, Vec<AgeTracker>)> {
    config.validate()?;
    let m = config.sources.len();
    let mean_t = config.net.mean_tx_time;
    let t_s = config.net.sensing_time();
    let tx = Duration::new(&config.net.tx_time_dist)?;
    let collision = match &config.collision_dist {
        Some(d) => Duration::new(d)?,
        None => Duration::new(&config.net.tx_time_dist)?,
    };
    let sleeps: Vec<Exp<f64>> = config
        .rates
        .rates()
        .iter()
        .map(|&r| Exp::new(r / mean_t).map_err(|e| Error::InvalidConfig(e.to_string())))
        .collect::<Result<_>>()?;
    let sensing_offset = match config.sensing_model {
        SensingModel::Idealized => 0.0,
        SensingModel::Physical => t_s,
    };

    let mut batteries: Option<Vec<Battery>> = if config.battery_tracking {
        Some(
            config
                .sources
                .iter()
                .enumerate()
                .map(|(index, s)| {
                    let b = s.battery.ok_or(Error::MissingBattery { index })?;
                    Ok(Battery {
                        level: b.initial_level,
                        drain: b.avg_tx_power,
                        recharge: b.replenishment_rate,
                        depleted_at: None,
                    })
                })
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };

    let (mut channel, mut source_rngs) = streams(config.seed, m);
    let mut trackers = vec![AgeTracker::new(); m];
    let mut stats = CycleStats::new(m);
    let warmup = WarmUp::new(config);
    let mut alive = vec![true; m];
    let mut wake = vec![0.0; m];
    let mut members: Vec<usize> = Vec::with_capacity(m);
    let mut now = 0.0;
    let mut cycle = 0u64;
    let mut measuring = false;

    while !horizon_reached(config.horizon, cycle, now) {
        if !measuring && warmup.over(cycle, now) {
            measuring = true;
            trackers.iter_mut().for_each(|t| t.set_recording(true));
        }

        let mut first = f64::INFINITY;
        for l in 0..m {
            wake[l] = if alive[l] {
                sleeps[l].sample(&mut source_rngs[l])
            } else {
                f64::INFINITY
            };
            first = first.min(wake[l]);
        }
        if first.is_infinite() {
            break;
        }
        members.clear();
        members.extend((0..m).filter(|&l| wake[l] <= first + t_s));

        let busy = if members.len() == 1 {
            tx.sample(&mut channel)
        } else {
            collision.sample(&mut channel)
        };
        let start = now + first + sensing_offset;
        let end = start + busy;

        if members.len() == 1 {
            trackers[members[0]].deliver(start, end, busy);
        }

        if let Some(batteries) = batteries.as_mut() {
            for (l, bat) in batteries.iter_mut().enumerate() {
                if bat.depleted_at.is_some() {
                    continue;
                }
                let at_start = bat.level + bat.recharge * (start - now);
                if members.contains(&l) {
                    let net_drain = bat.drain - bat.recharge;
                    if net_drain > 0.0 && at_start <= net_drain * busy {
                        bat.depleted_at = Some(start + at_start / net_drain);
                        bat.level = 0.0;
                        alive[l] = false;
                        continue;
                    }
                    bat.level = at_start - net_drain * busy;
                } else {
                    bat.level = at_start + bat.recharge * busy;
                }
            }
        }

        if measuring {
            stats.record(end - now, busy, &members);
        }
        now = end;
        cycle += 1;
    }

    let lifetimes = batteries.map(|b| b.iter().map(|bat| bat.depleted_at.unwrap_or(now)).collect());
    let report = build_report(config, &stats, &trackers, cycle, now, lifetimes, None);
    Ok((report, trackers))
}

pub fn run_simulation(config: &SimConfig) -> Result<SimReport> {
    run_simulation_traced(config).map(|(report, _)| report)
}

/// Battery-lifetime run: every source needs a battery; each battery drains at
/// its transmission power while the source transmits or collides and is
/// recharged continuously. A depleted source stops waking up.
pub fn run_lifetime_experiment(config: &SimConfig) -> Result<SimReport> {
    if let Some(index) = config.sources.iter().position(|s| s.battery.is_none()) {
        return Err(Error::MissingBattery { index });
    }
    let mut config = config.clone();
    config.battery_tracking = true;
    run_simulation(&config)
}

/// Collision-free baseline: transmissions run back to back and the channel
/// goes to source `l` with probability `a_l` each time.
pub fn run_synchronized(config: &SimConfig, access_probs: &[f64]) -> Result<SimReport> {
    config.validate()?;
    let m = config.sources.len();
    if access_probs.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: access_probs.len(),
        });
    }
    let total: f64 = access_probs.iter().sum();
    if access_probs.iter().any(|&a| !(a >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "access probabilities must be nonnegative and sum to 1 (sum = {total})"
        )));
    }
    let cumulative: Vec<f64> = access_probs
        .iter()
        .scan(0.0, |acc, &a| {
            *acc += a;
            Some(*acc / total)
        })
        .collect();

    let tx = Duration::new(&config.net.tx_time_dist)?;
    let (mut channel, mut source_rngs) = streams(config.seed, m.max(1));
    let picker = &mut source_rngs[0];
    let mut trackers = vec![AgeTracker::new(); m];
    let mut stats = CycleStats::new(m);
    let warmup = WarmUp::new(config);
    let mut now = 0.0;
    let mut cycle = 0u64;
    let mut measuring = false;

    while !horizon_reached(config.horizon, cycle, now) {
        if !measuring && warmup.over(cycle, now) {
            measuring = true;
            trackers.iter_mut().for_each(|t| t.set_recording(true));
        }
        let u: f64 = picker.random();
        let winner = cumulative.iter().position(|&c| u < c).unwrap_or(m - 1);
        let busy = tx.sample(&mut channel);
        let end = now + busy;
        trackers[winner].deliver(now, end, busy);
        if measuring {
            stats.record(busy, busy, &[winner]);
        }
        now = end;
        cycle += 1;
    }

    let report = build_report(config, &stats, &trackers, cycle, now, None, None);
    Ok(report)
}
