//! Near-optimal sleep rates and their optimality certificates.
//!
//! Both energy regimes produce rates of the same shape,
//! `r_l = min{b_l, β √w_l} · x`, so the access point only has to broadcast the
//! pair `(x*, β*)` and every source can compute its own rate locally (see
//! [`Broadcast`]).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    busy_fraction_term, check_sources_dimension, validate_sources, NetworkSpec, Provenance,
    SleepRates, SourceSpec,
};

/// Absolute tolerance on `Σ min{b_i, β √w_i} - 1`.
pub const BETA_TOLERANCE: f64 = 1e-12;

/// Upper end of the fixed-rate bisection bracket.
pub const FIXED_RATE_CAP: f64 = 1e6;

const MAX_BISECTION_STEPS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    /// `Σ b_i ≥ 1`.
    EnergyAdequate,
    /// `Σ b_i < 1`.
    EnergyScarce,
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeKind::EnergyAdequate => f.write_str("energy-adequate"),
            RegimeKind::EnergyScarce => f.write_str("energy-scarce"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub kind: RegimeKind,
    pub total_efficiency: f64,
}

/// Rounding allowance on `Σ b_l = 1`: sums within a few ulps per term of 1
/// count as the tie, which belongs to the energy-adequate regime.
fn tie_tolerance(sources: &[SourceSpec]) -> f64 {
    4.0 * f64::EPSILON * sources.len().max(1) as f64
}

pub fn detect_regime(sources: &[SourceSpec]) -> Regime {
    let total_efficiency: f64 = sources.iter().map(|s| s.target_efficiency).sum();
    let kind = if total_efficiency >= 1.0 - tie_tolerance(sources) {
        RegimeKind::EnergyAdequate
    } else {
        RegimeKind::EnergyScarce
    };
    Regime {
        kind,
        total_efficiency,
    }
}

/// The two numbers the access point broadcasts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Broadcast {
    pub x_star: f64,
    pub beta_star: f64,
}

impl Broadcast {
    /// Rate a source computes locally from its own `(w_l, b_l)`.
    pub fn rate_for(&self, source: &SourceSpec) -> f64 {
        share(source, self.beta_star) * self.x_star
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub rates: SleepRates,
    pub x_star: f64,
    pub beta_star: f64,
    pub regime: Regime,
    /// Per-source feasibility factors, energy-scarce regime only.
    pub c_values: Option<Vec<f64>>,
}

impl Solution {
    pub fn broadcast(&self) -> Broadcast {
        Broadcast {
            x_star: self.x_star,
            beta_star: self.beta_star,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub gap: f64,
    /// `C1` (energy-adequate) or `C2` (energy-scarce).
    pub gap_constant: f64,
    /// First-order gap: `2√ε C1` or `ε C2`.
    pub theoretical_gap_bound: f64,
}

impl BoundCertificate {
    fn new(
        upper_bound: f64,
        lower_bound: f64,
        gap_constant: f64,
        theoretical_gap_bound: f64,
    ) -> Self {
        Self {
            upper_bound,
            lower_bound,
            gap: upper_bound - lower_bound,
            gap_constant,
            theoretical_gap_bound,
        }
    }
}

/// `min{b_l, β √w_l}` with `b_l` capped at 1: a constraint with `b_l ≥ 1`
/// never binds.
#[inline]
fn share(source: &SourceSpec, beta: f64) -> f64 {
    source
        .target_efficiency
        .min(1.0)
        .min(beta * source.weight.sqrt())
}

fn share_sum(sources: &[SourceSpec], beta: f64) -> f64 {
    sources.iter().map(|s| share(s, beta)).sum()
}

fn require_regime(sources: &[SourceSpec], expected: RegimeKind) -> Result<Regime> {
    let regime = detect_regime(sources);
    if regime.kind != expected {
        return Err(Error::RegimeMismatch {
            expected,
            actual: regime.kind,
        });
    }
    Ok(regime)
}

/// Root `β*` of `Σ min{b_i, β √w_i} = 1` by bisection on
/// `[0, max_l b_l / √w_l]`, finished by the linear solve on the saturated set
/// the bisection settles on. The left-hand side is continuous, piecewise
/// linear and nondecreasing in `β`. When `Σ b_i = 1` (up to rounding) every
/// `β ≥ max_l b_l/√w_l` is a root and the interval endpoint is returned.
pub fn solve_beta_adequate(sources: &[SourceSpec]) -> Result<f64> {
    validate_sources(sources)?;
    let regime = require_regime(sources, RegimeKind::EnergyAdequate)?;

    let upper = sources
        .iter()
        .map(|s| s.target_efficiency.min(1.0) / s.weight.sqrt())
        .fold(0.0, f64::max);
    if (regime.total_efficiency - 1.0).abs() <= tie_tolerance(sources) {
        return Ok(upper);
    }

    let (mut lo, mut hi) = (0.0, upper);
    let mut best = hi;
    let mut best_residual = (share_sum(sources, hi) - 1.0).abs();
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let residual = share_sum(sources, mid) - 1.0;
        if residual.abs() < best_residual {
            best = mid;
            best_residual = residual.abs();
        }
        if residual.abs() <= BETA_TOLERANCE {
            break;
        }
        if residual < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Within the bracket the saturated set is known and the root is linear.
    let (saturated, slope) = sources.iter().fold((0.0, 0.0), |(sat, slope), s| {
        if share(s, best) < best * s.weight.sqrt() {
            (sat + share(s, best), slope)
        } else {
            (sat, slope + s.weight.sqrt())
        }
    });
    let exact = (1.0 - saturated) / slope;
    if exact.is_finite() && (share_sum(sources, exact) - 1.0).abs() <= best_residual {
        return Ok(exact);
    }
    Ok(best)
}

/// `x* = -1/2 + √(1/4 + 1/ε)`, evaluated as `(1/ε) / (1/2 + √(1/4 + 1/ε))`
/// to avoid cancellation when `ε` is small.
pub fn x_star_adequate(sensing_ratio: f64) -> f64 {
    let inv = 1.0 / sensing_ratio;
    inv / (0.5 + (0.25 + inv).sqrt())
}

/// Feasibility factor `c_l` of the energy-scarce solution: the positive root
/// of the per-source quadratic, written as `2 / (1 + √(1 + 4(Σb - b_l)ε / (1-Σb)²))`.
pub fn scarce_feasibility_factors(sources: &[SourceSpec], sensing_ratio: f64) -> Vec<f64> {
    let total: f64 = sources.iter().map(|s| s.target_efficiency).sum();
    let deficit = 1.0 - total;
    sources
        .iter()
        .map(|s| {
            let others = total - s.target_efficiency;
            2.0 / (1.0 + (1.0 + 4.0 * others * sensing_ratio / (deficit * deficit)).sqrt())
        })
        .collect()
}

pub fn solve_adequate(sources: &[SourceSpec], net: &NetworkSpec) -> Result<Solution> {
    validate_sources(sources)?;
    check_sources_dimension(sources, net)?;
    let regime = require_regime(sources, RegimeKind::EnergyAdequate)?;
    if net.sensing_ratio == 0.0 {
        return Err(Error::AsymptoticRegime);
    }
    let beta_star = solve_beta_adequate(sources)?;
    let x_star = x_star_adequate(net.sensing_ratio);
    let rates = sources
        .iter()
        .map(|s| share(s, beta_star) * x_star)
        .collect();
    Ok(Solution {
        rates: SleepRates::new(rates, Provenance::ClosedForm)?,
        x_star,
        beta_star,
        regime,
        c_values: None,
    })
}

pub fn solve_scarce(sources: &[SourceSpec], net: &NetworkSpec) -> Result<Solution> {
    validate_sources(sources)?;
    check_sources_dimension(sources, net)?;
    let regime = require_regime(sources, RegimeKind::EnergyScarce)?;

    let beta_star: f64 = sources.iter().map(|s| 1.0 / s.weight.sqrt()).sum();
    let c_values = scarce_feasibility_factors(sources, net.sensing_ratio);
    let c_min = c_values.iter().copied().fold(f64::INFINITY, f64::min);
    let x_star = c_min / (1.0 - regime.total_efficiency);

    let rates = sources
        .iter()
        .map(|s| {
            let m = share(s, beta_star);
            // β* √w_l ≥ 1 > b_l, so the efficiency branch is always active.
            debug_assert_eq!(m, s.target_efficiency);
            m * x_star
        })
        .collect();
    Ok(Solution {
        rates: SleepRates::new(rates, Provenance::ClosedForm)?,
        x_star,
        beta_star,
        regime,
        c_values: Some(c_values),
    })
}

/// Closed-form solution for whichever regime the sources are in.
pub fn solve(sources: &[SourceSpec], net: &NetworkSpec) -> Result<Solution> {
    validate_sources(sources)?;
    match detect_regime(sources).kind {
        RegimeKind::EnergyAdequate => solve_adequate(sources, net),
        RegimeKind::EnergyScarce => solve_scarce(sources, net),
    }
}

pub fn bounds_adequate(
    sources: &[SourceSpec],
    net: &NetworkSpec,
    solution: &Solution,
) -> Result<BoundCertificate> {
    check_sources_dimension(sources, net)?;
    require_regime(sources, RegimeKind::EnergyAdequate)?;
    if solution.regime.kind != RegimeKind::EnergyAdequate {
        return Err(Error::RegimeMismatch {
            expected: RegimeKind::EnergyAdequate,
            actual: solution.regime.kind,
        });
    }
    let eps = net.sensing_ratio;
    let x = solution.x_star;
    let inflation = (x * eps).exp() * (1.0 + 1.0 / x);
    let c1: f64 = sources
        .iter()
        .map(|s| s.weight / share(s, solution.beta_star))
        .sum();
    let weight_sum: f64 = sources.iter().map(|s| s.weight).sum();
    Ok(BoundCertificate::new(
        c1 * inflation + weight_sum,
        c1 + weight_sum,
        c1,
        2.0 * eps.sqrt() * c1,
    ))
}

pub fn bounds_scarce(
    sources: &[SourceSpec],
    net: &NetworkSpec,
    solution: &Solution,
) -> Result<BoundCertificate> {
    check_sources_dimension(sources, net)?;
    let regime = require_regime(sources, RegimeKind::EnergyScarce)?;
    if solution.regime.kind != RegimeKind::EnergyScarce {
        return Err(Error::RegimeMismatch {
            expected: RegimeKind::EnergyScarce,
            actual: solution.regime.kind,
        });
    }
    let eps = net.sensing_ratio;
    let x = solution.x_star;
    let total_b = regime.total_efficiency;
    let deficit = 1.0 - total_b;
    let inv_b: f64 = sources.iter().map(|s| s.weight / s.target_efficiency).sum();
    let weight_sum: f64 = sources.iter().map(|s| s.weight).sum();
    let min_b = sources
        .iter()
        .map(|s| s.target_efficiency)
        .fold(f64::INFINITY, f64::min);

    let upper = inv_b * (total_b * x * eps).exp() * (1.0 / x + total_b) + weight_sum;
    let lower = inv_b * (-total_b / deficit * eps).exp() + weight_sum;
    let c2 = inv_b / deficit * (3.0 * total_b - min_b);
    Ok(BoundCertificate::new(upper, lower, c2, eps * c2))
}

/// Upper/lower bracket on the optimum for the regime of the solution.
pub fn certify(
    sources: &[SourceSpec],
    net: &NetworkSpec,
    solution: &Solution,
) -> Result<BoundCertificate> {
    match solution.regime.kind {
        RegimeKind::EnergyAdequate => bounds_adequate(sources, net, solution),
        RegimeKind::EnergyScarce => bounds_scarce(sources, net, solution),
    }
}

/// Optimal value as the sensing ratio tends to zero,
/// `Σ [w_i / min{b_i, β* √w_i} + w_i]`; in the energy-scarce regime this is
/// `Σ [w_i / b_i + w_i]`.
pub fn asymptotic_optimum(sources: &[SourceSpec]) -> Result<f64> {
    validate_sources(sources)?;
    let weight_sum: f64 = sources.iter().map(|s| s.weight).sum();
    match detect_regime(sources).kind {
        RegimeKind::EnergyAdequate => {
            let beta = solve_beta_adequate(sources)?;
            Ok(sources
                .iter()
                .map(|s| s.weight / share(s, beta))
                .sum::<f64>()
                + weight_sum)
        }
        RegimeKind::EnergyScarce => Ok(sources
            .iter()
            .map(|s| s.weight / s.target_efficiency)
            .sum::<f64>()
            + weight_sum),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynchronizedOptimum {
    pub access_probs: Vec<f64>,
    pub value: f64,
}

/// Optimal collision-free scheduler that hands the channel to source `l`
/// with probability `a_l` after every transmission, subject to `a_l ≤ b_l`.
pub fn synchronized_optimum(sources: &[SourceSpec]) -> Result<SynchronizedOptimum> {
    validate_sources(sources)?;
    let beta = solve_beta_adequate(sources)?;
    let access_probs: Vec<f64> = sources.iter().map(|s| share(s, beta)).collect();
    let value = sources
        .iter()
        .zip(&access_probs)
        .map(|(s, &a)| s.weight / a + s.weight)
        .sum();
    Ok(SynchronizedOptimum {
        access_probs,
        value,
    })
}

/// Equal rate `k` for every source: the largest `k` that keeps every source
/// within its energy budget, capped at an equal split `x*/M` of the
/// energy-adequate total rate for the same sensing ratio (or
/// [`FIXED_RATE_CAP`] at zero sensing).
pub fn fixed_rate_baseline(sources: &[SourceSpec], net: &NetworkSpec) -> Result<SleepRates> {
    validate_sources(sources)?;
    check_sources_dimension(sources, net)?;
    let eps = net.sensing_ratio;
    let m = sources.len();
    let feasible = |k: f64| {
        // Summed like `SleepRates::total` so the check agrees to the last bit.
        let total: f64 = std::iter::repeat_n(k, m).sum();
        let sigma = busy_fraction_term(k, total, eps);
        sources.iter().all(|s| sigma <= s.target_efficiency)
    };

    let cap = if eps > 0.0 {
        (x_star_adequate(eps) / m as f64).min(FIXED_RATE_CAP)
    } else {
        FIXED_RATE_CAP
    };
    let k = if feasible(cap) {
        cap
    } else {
        // σ(k) is increasing in the common rate: `lo` stays feasible, `hi` not.
        let (mut lo, mut hi) = (0.0, cap);
        for _ in 0..MAX_BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    SleepRates::new(vec![k; sources.len()], Provenance::FixedRate)
}
