//! Domain types and the closed-form channel model.
//!
//! A source `l` sleeps for exponential periods with mean `E[T] / r_l`, senses
//! the channel for `t_s` on waking and transmits if it hears nothing. Two
//! wake-ups closer than `t_s` collide. Everything in this module is a pure
//! function of the rate vector `r`, the sensing ratio `ε = t_s / E[T]` and the
//! per-source weights and target efficiencies.
//!
//! Times are seconds throughout. The objective is reported both normalized by
//! `E[T]` and in seconds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this value of `Σ r_i ε` the exponential factors are combined in log
/// space before exponentiating.
pub const LOG_SPACE_THRESHOLD: f64 = 30.0;

/// Relative tolerance for the transmission-time distribution mean check.
const MEAN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    /// Initial stored energy `B_l`, joules.
    pub initial_level: f64,
    /// Target lifetime `D_l`, seconds.
    pub target_lifetime: f64,
    /// Average replenishment (harvesting) power `R_l`, watts.
    pub replenishment_rate: f64,
    /// Average power drawn in transmission mode `E_avg,l`, watts.
    pub avg_tx_power: f64,
}

impl BatterySpec {
    pub fn new(
        initial_level: f64,
        target_lifetime: f64,
        replenishment_rate: f64,
        avg_tx_power: f64,
    ) -> Result<Self> {
        let battery = Self {
            initial_level,
            target_lifetime,
            replenishment_rate,
            avg_tx_power,
        };
        battery.validate()?;
        Ok(battery)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_level >= 0.0 && self.initial_level.is_finite()) {
            return Err(Error::InvalidBattery(format!(
                "initial level must be >= 0, got {}",
                self.initial_level
            )));
        }
        if !(self.target_lifetime > 0.0) {
            return Err(Error::InvalidBattery(format!(
                "target lifetime must be > 0, got {}",
                self.target_lifetime
            )));
        }
        if !(self.replenishment_rate >= 0.0 && self.replenishment_rate.is_finite()) {
            return Err(Error::InvalidBattery(format!(
                "replenishment rate must be >= 0, got {}",
                self.replenishment_rate
            )));
        }
        if !(self.avg_tx_power > 0.0 && self.avg_tx_power.is_finite()) {
            return Err(Error::InvalidBattery(format!(
                "average transmission power must be > 0, got {}",
                self.avg_tx_power
            )));
        }
        Ok(())
    }

    /// Maximum sustainable consumption rate `B/D + R`, watts.
    pub fn allowed_consumption(&self) -> f64 {
        self.initial_level / self.target_lifetime + self.replenishment_rate
    }
}

/// Target energy efficiency `b = (B/D + R) / E_avg`: the fraction of time the
/// source may spend in transmission mode and still reach its target lifetime.
pub fn target_efficiency_from_battery(battery: &BatterySpec) -> Result<f64> {
    battery.validate()?;
    Ok(battery.allowed_consumption() / battery.avg_tx_power)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub weight: f64,
    pub target_efficiency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<BatterySpec>,
}

impl SourceSpec {
    pub fn new(weight: f64, target_efficiency: f64) -> Result<Self> {
        let source = Self {
            weight,
            target_efficiency,
            battery: None,
        };
        source.validate(0)?;
        Ok(source)
    }

    /// Source whose target efficiency is derived from its battery.
    pub fn with_battery(weight: f64, battery: BatterySpec) -> Result<Self> {
        let target_efficiency = target_efficiency_from_battery(&battery)?;
        let source = Self {
            weight,
            target_efficiency,
            battery: Some(battery),
        };
        source.validate(0)?;
        Ok(source)
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidSource {
                index,
                reason: format!("weight must be > 0, got {}", self.weight),
            });
        }
        if !(self.target_efficiency > 0.0 && self.target_efficiency.is_finite()) {
            return Err(Error::InvalidSource {
                index,
                reason: format!(
                    "target efficiency must be > 0, got {}",
                    self.target_efficiency
                ),
            });
        }
        if let Some(battery) = &self.battery {
            battery.validate().map_err(|e| Error::InvalidSource {
                index,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }
}

pub fn validate_sources(sources: &[SourceSpec]) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::NoSources);
    }
    for (i, s) in sources.iter().enumerate() {
        s.validate(i)?;
    }
    Ok(())
}

/// Distribution of a transmission (or collision) duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TxDistribution {
    Deterministic {
        mean: f64,
    },
    Exponential {
        mean: f64,
    },
    /// Log-normal with shape `sigma`, location chosen so the mean is `mean`.
    Lognormal {
        mean: f64,
        sigma: f64,
    },
}

impl TxDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            TxDistribution::Deterministic { mean }
            | TxDistribution::Exponential { mean }
            | TxDistribution::Lognormal { mean, .. } => mean,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TxDistribution::Deterministic { .. } => "deterministic",
            TxDistribution::Exponential { .. } => "exponential",
            TxDistribution::Lognormal { .. } => "lognormal",
        }
    }

    /// Same family and shape, rescaled to a new mean.
    pub fn with_mean(&self, mean: f64) -> Self {
        match *self {
            TxDistribution::Deterministic { .. } => TxDistribution::Deterministic { mean },
            TxDistribution::Exponential { .. } => TxDistribution::Exponential { mean },
            TxDistribution::Lognormal { sigma, .. } => TxDistribution::Lognormal { mean, sigma },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mean = self.mean();
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::InvalidNetwork(format!(
                "transmission-time mean must be > 0, got {mean}"
            )));
        }
        if let TxDistribution::Lognormal { sigma, .. } = *self {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidNetwork(format!(
                    "lognormal sigma must be >= 0, got {sigma}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub num_sources: usize,
    /// `ε = t_s / E[T]`.
    pub sensing_ratio: f64,
    /// `E[T]`, seconds.
    pub mean_tx_time: f64,
    pub tx_time_dist: TxDistribution,
}

impl NetworkSpec {
    pub fn new(
        num_sources: usize,
        sensing_ratio: f64,
        mean_tx_time: f64,
        tx_time_dist: TxDistribution,
    ) -> Result<Self> {
        let net = Self {
            num_sources,
            sensing_ratio,
            mean_tx_time,
            tx_time_dist,
        };
        net.validate()?;
        Ok(net)
    }

    /// Deterministic transmission times of length `mean_tx_time`.
    pub fn deterministic(
        num_sources: usize,
        sensing_ratio: f64,
        mean_tx_time: f64,
    ) -> Result<Self> {
        Self::new(
            num_sources,
            sensing_ratio,
            mean_tx_time,
            TxDistribution::Deterministic { mean: mean_tx_time },
        )
    }

    /// Build from absolute sensing and mean transmission times.
    pub fn from_times(
        num_sources: usize,
        sensing_time: f64,
        mean_tx_time: f64,
        tx_time_dist: TxDistribution,
    ) -> Result<Self> {
        Self::new(
            num_sources,
            sensing_time / mean_tx_time,
            mean_tx_time,
            tx_time_dist,
        )
    }

    pub fn sensing_time(&self) -> f64 {
        self.sensing_ratio * self.mean_tx_time
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sources == 0 {
            return Err(Error::InvalidNetwork("num_sources must be >= 1".into()));
        }
        if !(self.sensing_ratio >= 0.0 && self.sensing_ratio.is_finite()) {
            return Err(Error::InvalidNetwork(format!(
                "sensing ratio must be >= 0, got {}",
                self.sensing_ratio
            )));
        }
        if !(self.mean_tx_time > 0.0 && self.mean_tx_time.is_finite()) {
            return Err(Error::InvalidNetwork(format!(
                "mean transmission time must be > 0, got {}",
                self.mean_tx_time
            )));
        }
        self.tx_time_dist.validate()?;
        let dist_mean = self.tx_time_dist.mean();
        if (dist_mean - self.mean_tx_time).abs() > MEAN_TOLERANCE * self.mean_tx_time {
            return Err(Error::InvalidNetwork(format!(
                "transmission-time distribution mean {dist_mean} differs from mean_tx_time {}",
                self.mean_tx_time
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Oracle,
    FixedRate,
    External,
}

/// Normalized sleep rates: source `l` sleeps for `Exp(mean = E[T] / r_l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SleepRates {
    rates: Vec<f64>,
    provenance: Provenance,
}

impl SleepRates {
    pub fn new(rates: Vec<f64>, provenance: Provenance) -> Result<Self> {
        for (index, &value) in rates.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveRate { index, value });
            }
        }
        Ok(Self { rates, provenance })
    }

    pub fn external(rates: Vec<f64>) -> Result<Self> {
        Self::new(rates, Provenance::External)
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn check_dimension(&self, net: &NetworkSpec) -> Result<()> {
        if self.rates.len() != net.num_sources {
            return Err(Error::DimensionMismatch {
                expected: net.num_sources,
                got: self.rates.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    /// Weighted sum of average peak ages divided by `E[T]`.
    pub objective_normalized: f64,
    /// Weighted sum of average peak ages, seconds.
    pub objective_unnormalized: f64,
    pub per_source_alpha: Vec<f64>,
    pub per_source_sigma: Vec<f64>,
    /// Average peak age per source, seconds.
    pub per_source_peak_age: Vec<f64>,
    pub feasible: bool,
}

impl AnalyticReport {
    /// Probability that a cycle ends in a collision, `1 - Σ α_l`.
    pub fn collision_probability(&self) -> f64 {
        1.0 - self.per_source_alpha.iter().sum::<f64>()
    }
}

/// Probability `α_l` that source `l` wins a cycle and transmits successfully.
pub fn access_probability(rates: &SleepRates, net: &NetworkSpec) -> Result<Vec<f64>> {
    rates.check_dimension(net)?;
    let eps = net.sensing_ratio;
    let total = rates.total();
    // α_l = (r_l / Σr) e^{-(Σr - r_l) ε}; the exponent is never positive.
    Ok(rates
        .rates()
        .iter()
        .map(|&r| r / total * (-(total - r) * eps).exp())
        .collect())
}

/// Expected number of cycles between two successes of each source, `1 / α_l`.
pub fn mean_cycles_between_success(rates: &SleepRates, net: &NetworkSpec) -> Result<Vec<f64>> {
    Ok(access_probability(rates, net)?
        .into_iter()
        .map(|a| 1.0 / a)
        .collect())
}

/// Expected cycle length `E[T] / Σr + E[T]`, seconds.
pub fn mean_cycle_duration(rates: &SleepRates, net: &NetworkSpec) -> Result<f64> {
    rates.check_dimension(net)?;
    Ok(net.mean_tx_time / rates.total() + net.mean_tx_time)
}

/// Long-run fraction of time `σ_l` that source `l` spends transmitting,
/// collisions included.
pub fn busy_fraction(rates: &SleepRates, net: &NetworkSpec) -> Result<Vec<f64>> {
    rates.check_dimension(net)?;
    let eps = net.sensing_ratio;
    let total = rates.total();
    Ok(rates
        .rates()
        .iter()
        .map(|&r| busy_fraction_term(r, total, eps))
        .collect())
}

#[inline]
pub(crate) fn busy_fraction_term(r: f64, total: f64, eps: f64) -> f64 {
    let x = r * eps;
    // 1 - e^{-x} via expm1 keeps precision for tiny x.
    (-(-x).exp_m1() * total + r * (-x).exp()) / (total + 1.0)
}

/// Normalized average peak age of one source, `e^{(Σr - r_l)ε} (1 + Σr) / r_l + 1`.
#[inline]
pub(crate) fn normalized_peak_age(r: f64, total: f64, eps: f64) -> f64 {
    let exponent = (total - r) * eps;
    let term = if total * eps > LOG_SPACE_THRESHOLD {
        (exponent + total.ln_1p() - r.ln()).exp()
    } else {
        exponent.exp() * (1.0 + total) / r
    };
    term + 1.0
}

/// Normalized weighted-sum peak age of a rate vector, without building the
/// full report. Used by the oracle's inner loop.
pub(crate) fn objective_value(rates: &[f64], weights: &[f64], eps: f64) -> f64 {
    let total: f64 = rates.iter().sum();
    rates
        .iter()
        .zip(weights)
        .map(|(&r, &w)| w * normalized_peak_age(r, total, eps))
        .sum()
}

/// Energy feasibility of a rate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCheck {
    pub feasible: bool,
    /// `b_l - σ_l`; negative entries violate the constraint.
    pub slack: Vec<f64>,
}

impl FeasibilityCheck {
    pub fn min_slack(&self) -> f64 {
        self.slack.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Check `σ_l(r) ≤ b_l` for every source. A source with `b_l ≥ 1` is never
/// constrained since `σ_l < 1`.
pub fn check_energy_feasibility(
    rates: &SleepRates,
    sources: &[SourceSpec],
    net: &NetworkSpec,
) -> Result<FeasibilityCheck> {
    check_sources_dimension(sources, net)?;
    let sigma = busy_fraction(rates, net)?;
    let slack: Vec<f64> = sources
        .iter()
        .zip(&sigma)
        .map(|(s, &sig)| s.target_efficiency - sig)
        .collect();
    let feasible = slack.iter().all(|&s| s >= 0.0);
    Ok(FeasibilityCheck { feasible, slack })
}

pub(crate) fn check_sources_dimension(sources: &[SourceSpec], net: &NetworkSpec) -> Result<()> {
    if sources.len() != net.num_sources {
        return Err(Error::DimensionMismatch {
            expected: net.num_sources,
            got: sources.len(),
        });
    }
    Ok(())
}

/// Full analytic evaluation of a rate vector: per-source access probability,
/// busy fraction and peak age, the weighted objective and energy feasibility.
pub fn peak_age_objective(
    rates: &SleepRates,
    sources: &[SourceSpec],
    net: &NetworkSpec,
) -> Result<AnalyticReport> {
    check_sources_dimension(sources, net)?;
    rates.check_dimension(net)?;
    let eps = net.sensing_ratio;
    let total = rates.total();

    let normalized: Vec<f64> = rates
        .rates()
        .iter()
        .map(|&r| normalized_peak_age(r, total, eps))
        .collect();
    let objective_normalized: f64 = sources
        .iter()
        .zip(&normalized)
        .map(|(s, &p)| s.weight * p)
        .sum();

    let per_source_alpha = access_probability(rates, net)?;
    let per_source_sigma = busy_fraction(rates, net)?;
    let feasible = sources
        .iter()
        .zip(&per_source_sigma)
        .all(|(s, &sig)| sig <= s.target_efficiency);

    Ok(AnalyticReport {
        objective_normalized,
        objective_unnormalized: objective_normalized * net.mean_tx_time,
        per_source_alpha,
        per_source_sigma,
        per_source_peak_age: normalized.iter().map(|p| p * net.mean_tx_time).collect(),
        feasible,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen reference values
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn net(m: usize, eps: f64) -> NetworkSpec {
        NetworkSpec::deterministic(m, eps, 1.0).unwrap()
    }

    fn rates(r: &[f64]) -> SleepRates {
        SleepRates::external(r.to_vec()).unwrap()
    }

    fn sources(w: &[f64], b: &[f64]) -> Vec<SourceSpec> {
        w.iter()
            .zip(b)
            .map(|(&w, &b)| SourceSpec::new(w, b).unwrap())
            .collect()
    }

    #[test]
    fn access_probability_examples() {
        let a = access_probability(&rates(&[1.0, 1.0]), &net(2, 0.0)).unwrap();
        assert_eq!(a, vec![0.5, 0.5]);

        let a = access_probability(&rates(&[1.0, 1.0]), &net(2, 0.1)).unwrap();
        for v in a {
            assert_relative_eq!(v, 0.452_418_709_017_979_76, max_relative = 1e-14);
        }

        for eps in [0.0, 0.3, 7.0] {
            let a = access_probability(&rates(&[5.0]), &net(1, eps)).unwrap();
            assert_eq!(a, vec![1.0]);
        }
    }

    #[test]
    fn mean_cycles_examples() {
        let n = mean_cycles_between_success(&rates(&[1.0, 1.0]), &net(2, 0.0)).unwrap();
        assert_eq!(n, vec![2.0, 2.0]);
        let n = mean_cycles_between_success(&rates(&[1.0, 1.0]), &net(2, 0.1)).unwrap();
        assert_relative_eq!(n[0], 2.210341836151295, max_relative = 1e-14);
        let n = mean_cycles_between_success(&rates(&[0.37]), &net(1, 0.2)).unwrap();
        assert_eq!(n, vec![1.0]);
    }

    #[test]
    fn mean_cycle_examples() {
        let net5 = NetworkSpec::deterministic(2, 0.008, 0.005).unwrap();
        assert_relative_eq!(
            mean_cycle_duration(&rates(&[1.0, 1.0]), &net5).unwrap(),
            0.0075,
            max_relative = 1e-15
        );
        assert_eq!(
            mean_cycle_duration(&rates(&[1.0]), &net(1, 0.0)).unwrap(),
            2.0
        );
        let big = mean_cycle_duration(&rates(&[1e12]), &net(1, 0.0)).unwrap();
        assert_relative_eq!(big, 1.0, max_relative = 1e-11);
    }

    #[test]
    fn objective_examples() {
        let rep =
            peak_age_objective(&rates(&[1.0]), &sources(&[1.0], &[1.0]), &net(1, 0.0)).unwrap();
        assert_eq!(rep.objective_normalized, 3.0);

        let rep = peak_age_objective(
            &rates(&[1.0, 1.0]),
            &sources(&[1.0, 1.0], &[1.0, 1.0]),
            &net(2, 0.0),
        )
        .unwrap();
        assert_eq!(rep.objective_normalized, 8.0);

        let net5 = NetworkSpec::deterministic(1, 0.0, 0.005).unwrap();
        let rep = peak_age_objective(&rates(&[1.0]), &sources(&[1.0], &[1.0]), &net5).unwrap();
        assert_relative_eq!(rep.objective_unnormalized, 0.015, max_relative = 1e-15);
        assert_relative_eq!(rep.per_source_peak_age[0], 0.015, max_relative = 1e-15);

        let rep = peak_age_objective(
            &rates(&[1.0, 1.0]),
            &sources(&[1.0, 1.0], &[1.0, 1.0]),
            &net(2, 0.1),
        )
        .unwrap();
        assert_relative_eq!(
            rep.objective_normalized,
            8.631025508453886,
            max_relative = 1e-14
        );
    }

    #[test]
    fn log_space_branch_matches_direct_evaluation() {
        // Σr ε = 40 takes the log-space branch; compare with a direct product
        // that is still representable.
        let r = [10.0, 30.0];
        let eps = 1.0;
        let total = 40.0;
        let direct = (30.0f64 * eps).exp() * 41.0 / 10.0 + 1.0;
        assert_relative_eq!(
            normalized_peak_age(r[0], total, eps),
            direct,
            max_relative = 1e-12
        );
        // Would overflow a naive e^{Σrε}.
        let v = normalized_peak_age(1.0, 800.0, 1.0);
        assert!(v.is_infinite() || v > 1e300);
        let v = normalized_peak_age(700.0, 800.0, 1.0);
        assert!(v.is_finite());
    }

    #[test]
    fn busy_fraction_examples() {
        let s = busy_fraction(&rates(&[1.0, 1.0]), &net(2, 0.0)).unwrap();
        assert_relative_eq!(s[0], 1.0 / 3.0, max_relative = 1e-15);
        let s = busy_fraction(&rates(&[1.0, 1.0]), &net(2, 0.1)).unwrap();
        assert_relative_eq!(s[0], 0.365_054_193_988_013_5, max_relative = 1e-14);
        assert_relative_eq!(s[1], 0.365_054_193_988_013_5, max_relative = 1e-14);
        let s = busy_fraction(&rates(&[4.0]), &net(1, 0.0)).unwrap();
        assert_relative_eq!(s[0], 0.8, max_relative = 1e-15);
    }

    #[test]
    fn feasibility_examples() {
        let chk = check_energy_feasibility(
            &rates(&[1.0, 1.0]),
            &sources(&[1.0, 1.0], &[0.5, 0.5]),
            &net(2, 0.0),
        )
        .unwrap();
        assert!(chk.feasible);
        assert_relative_eq!(chk.slack[0], 1.0 / 6.0, max_relative = 1e-14);

        let chk = check_energy_feasibility(
            &rates(&[50.0, 3.0]),
            &sources(&[1.0, 1.0], &[1.0, 1.0]),
            &net(2, 0.7),
        )
        .unwrap();
        assert!(chk.feasible);

        let chk = check_energy_feasibility(
            &rates(&[1.0, 1.0]),
            &sources(&[1.0, 1.0], &[0.2, 0.2]),
            &net(2, 0.0),
        )
        .unwrap();
        assert!(!chk.feasible);
        assert_relative_eq!(chk.slack[0], -2.0 / 15.0, max_relative = 1e-14);
    }

    #[test]
    fn battery_efficiency_examples() {
        // 8 mAh at 5 V, ten years, 24.75 mW in transmission mode.
        let battery = BatterySpec::new(8e-3 * 3600.0 * 5.0, 3.1536e8, 0.0, 24.75e-3).unwrap();
        let b = target_efficiency_from_battery(&battery).unwrap();
        assert_relative_eq!(b, 1.844_933_351_782_666_7e-5, max_relative = 1e-12);

        let battery = BatterySpec::new(0.0, 100.0, 0.03, 0.03).unwrap();
        assert_eq!(target_efficiency_from_battery(&battery).unwrap(), 1.0);

        let battery = BatterySpec::new(10.0, 1e300, 0.0, 0.03).unwrap();
        assert!(target_efficiency_from_battery(&battery).unwrap() < 1e-290);

        let bad = BatterySpec {
            initial_level: 1.0,
            target_lifetime: 0.0,
            replenishment_rate: 0.0,
            avg_tx_power: 1.0,
        };
        assert!(target_efficiency_from_battery(&bad).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            SleepRates::external(vec![1.0, 0.0]),
            Err(Error::NonPositiveRate { index: 1, .. })
        ));
        assert!(matches!(
            access_probability(&rates(&[1.0, 2.0]), &net(3, 0.1)),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 2
            })
        ));
        assert!(SourceSpec::new(0.0, 0.5).is_err());
        assert!(SourceSpec::new(1.0, 0.0).is_err());
        assert!(NetworkSpec::deterministic(0, 0.1, 1.0).is_err());
        assert!(NetworkSpec::deterministic(2, -0.1, 1.0).is_err());
        assert!(NetworkSpec::new(2, 0.1, 1.0, TxDistribution::Exponential { mean: 2.0 }).is_err());
    }

    #[test]
    fn collision_probability_closes() {
        let rep = peak_age_objective(
            &rates(&[0.3, 2.0, 5.0]),
            &sources(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]),
            &net(3, 0.2),
        )
        .unwrap();
        let c = rep.collision_probability();
        assert!((0.0..1.0).contains(&c));
        let total: f64 = rep.per_source_alpha.iter().sum::<f64>() + c;
        assert_relative_eq!(total, 1.0, max_relative = 1e-15);
    }
}
