//! Property tests for the closed forms, checked against independent
//! evaluations (quadrature, exact piecewise-linear roots, direct quadratics).

#![allow(clippy::needless_range_loop)]

use aoi_sleepwake::model::{access_probability, busy_fraction};
use aoi_sleepwake::solver::{scarce_feasibility_factors, solve_beta_adequate, x_star_adequate};
use aoi_sleepwake::{
    certify, check_energy_feasibility, fixed_rate_baseline, peak_age_objective, solve, NetworkSpec,
    RegimeKind, SleepRates, SourceSpec,
};
use proptest::prelude::*;

fn net(m: usize, eps: f64) -> NetworkSpec {
    NetworkSpec::deterministic(m, eps, 1.0).unwrap()
}

fn rates_strategy(max_m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..2.0, 1..=max_m)
        .prop_map(|logs| logs.into_iter().map(|x| 10f64.powf(x)).collect())
}

fn weights_and_efficiencies(max_m: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_m).prop_flat_map(|m| {
        (
            prop::collection::vec(0.01f64..=10.0, m),
            prop::collection::vec(0.01f64..=1.0, m),
        )
    })
}

fn sources(w: &[f64], b: &[f64]) -> Vec<SourceSpec> {
    w.iter()
        .zip(b)
        .map(|(&w, &b)| SourceSpec::new(w, b).unwrap())
        .collect()
}

/// Rescale efficiencies into the requested regime.
fn into_regime(b: &[f64], regime: RegimeKind, scarce_total: f64) -> Vec<f64> {
    let total: f64 = b.iter().sum();
    match regime {
        RegimeKind::EnergyAdequate if total < 1.0 => {
            let mut out: Vec<f64> = b.iter().map(|x| x / total).collect();
            let short = 1.0 - out.iter().sum::<f64>();
            if short > 0.0 {
                let top = out.iter_mut().max_by(|x, y| x.total_cmp(y)).unwrap();
                *top = (*top + short).min(1.0);
            }
            out
        }
        RegimeKind::EnergyScarce => b.iter().map(|x| x * scarce_total / total).collect(),
        _ => b.to_vec(),
    }
}

/// Composite Simpson rule on `[0, upper]`.
fn simpson(f: impl Fn(f64) -> f64, upper: f64, n: usize) -> f64 {
    simpson_on(&f, 0.0, upper, n)
}

fn simpson_on(f: &impl Fn(f64) -> f64, lower: f64, upper: f64, n: usize) -> f64 {
    let h = (upper - lower) / n as f64;
    let mut sum = f(lower) + f(upper);
    for i in 1..n {
        let x = lower + i as f64 * h;
        sum += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    sum * h / 3.0
}

/// `P(l wins alone)`: integrate over the wake-up time `s` of `l` the event
/// that every other source sleeps past `s + ε`.
fn alpha_by_quadrature(r: &[f64], l: usize, eps: f64) -> f64 {
    let others: f64 = r.iter().sum::<f64>() - r[l];
    let total: f64 = r.iter().sum();
    simpson(
        |s| r[l] * (-r[l] * s).exp() * (-others * (s + eps)).exp(),
        40.0 / total,
        20_000,
    )
}

/// `σ_l = P(l joins the busy period) / E[cycle]` with the join probability
/// integrated over the earliest wake-up of the other sources.
fn sigma_by_quadrature(r: &[f64], l: usize, eps: f64) -> f64 {
    let total: f64 = r.iter().sum();
    let others = total - r[l];
    let joins = if r.len() == 1 {
        1.0
    } else {
        // Two exponential scales, 1/others and 1/r_l: split at the shorter.
        let f = |m: f64| others * (-others * m).exp() * (1.0 - (-r[l] * (m + eps)).exp());
        let (short, long) = (40.0 / others.max(r[l]), 40.0 / others.min(r[l]));
        simpson_on(&f, 0.0, short, 20_000) + simpson_on(&f, short, long.max(40.0 / others), 20_000)
    };
    joins / (1.0 / total + 1.0)
}

/// Exact root of `Σ min{b_i, β √w_i} = 1` by walking the sorted breakpoints.
fn beta_by_breakpoints(w: &[f64], b: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&i, &j| (b[i] / w[i].sqrt()).total_cmp(&(b[j] / w[j].sqrt())));
    let mut saturated = 0.0;
    let mut slope: f64 = w.iter().map(|x| x.sqrt()).sum();
    for &i in &idx {
        let bp = b[i] / w[i].sqrt();
        let beta = (1.0 - saturated) / slope;
        if beta <= bp {
            return beta;
        }
        saturated += b[i];
        slope -= w[i].sqrt();
    }
    idx.last().map_or(0.0, |&i| b[i] / w[i].sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn alpha_nonincreasing_in_sensing(r in rates_strategy(8), e1 in 0.0f64..1.0, de in 0.0f64..1.0) {
        let rates = SleepRates::external(r.clone()).unwrap();
        let lo = access_probability(&rates, &net(r.len(), e1)).unwrap();
        let hi = access_probability(&rates, &net(r.len(), e1 + de)).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(b <= a);
        }
    }

    #[test]
    fn probabilities_close(r in rates_strategy(8), eps in 0.0f64..0.5) {
        let rates = SleepRates::external(r.clone()).unwrap();
        let report = peak_age_objective(
            &rates,
            &sources(&vec![1.0; r.len()], &vec![1.0; r.len()]),
            &net(r.len(), eps),
        ).unwrap();
        let total: f64 = report.per_source_alpha.iter().sum();
        let collision = report.collision_probability();
        prop_assert!(total > 0.0 && total <= 1.0 + 1e-15);
        // Σα can underflow, leaving 1 - Σα rounded to exactly 1.
        prop_assert!((0.0..=1.0).contains(&collision));
        prop_assert!((total + collision - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_sensing_reductions_are_exact(r in rates_strategy(8)) {
        let rates = SleepRates::external(r.clone()).unwrap();
        let s: f64 = rates.total();
        let alpha = access_probability(&rates, &net(r.len(), 0.0)).unwrap();
        let sigma = busy_fraction(&rates, &net(r.len(), 0.0)).unwrap();
        for l in 0..r.len() {
            prop_assert_eq!(alpha[l], r[l] / s);
            prop_assert_eq!(sigma[l], r[l] / (s + 1.0));
        }
    }

    #[test]
    fn alpha_matches_quadrature(r in rates_strategy(5), eps in 0.0f64..0.5) {
        let rates = SleepRates::external(r.clone()).unwrap();
        let alpha = access_probability(&rates, &net(r.len(), eps)).unwrap();
        for l in 0..r.len() {
            let q = alpha_by_quadrature(&r, l, eps);
            prop_assert!((alpha[l] - q).abs() <= 1e-9 * alpha[l].max(1e-300) + 1e-15,
                "l = {}: closed form {} quadrature {}", l, alpha[l], q);
        }
    }

    #[test]
    fn sigma_matches_quadrature(r in rates_strategy(5), eps in 0.0f64..0.5) {
        let rates = SleepRates::external(r.clone()).unwrap();
        let sigma = busy_fraction(&rates, &net(r.len(), eps)).unwrap();
        for l in 0..r.len() {
            let q = sigma_by_quadrature(&r, l, eps);
            prop_assert!((sigma[l] - q).abs() <= 1e-9 * sigma[l] + 1e-15,
                "l = {}: closed form {} quadrature {}", l, sigma[l], q);
        }
    }

    #[test]
    fn objective_scales_with_mean_tx_time(r in rates_strategy(6), eps in 0.0f64..0.3, t in 1e-4f64..10.0) {
        let m = r.len();
        let rates = SleepRates::external(r).unwrap();
        let src = sources(&vec![2.0; m], &vec![1.0; m]);
        let unit = peak_age_objective(&rates, &src, &net(m, eps)).unwrap();
        let scaled = peak_age_objective(&rates, &src, &NetworkSpec::deterministic(m, eps, t).unwrap()).unwrap();
        prop_assert_eq!(unit.objective_normalized, scaled.objective_normalized);
        let expected = t * unit.objective_normalized;
        prop_assert!((scaled.objective_unnormalized - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn single_source_zero_sensing(r in 1e-3f64..1e3) {
        let rates = SleepRates::external(vec![r]).unwrap();
        let v = peak_age_objective(&rates, &sources(&[1.0], &[1.0]), &net(1, 0.0)).unwrap();
        let expected = (1.0 + r) / r + 1.0;
        prop_assert!((v.objective_normalized - expected).abs() <= 4.0 * f64::EPSILON * expected);
    }

    #[test]
    fn solutions_are_feasible_and_bracketed(
        (w, b) in weights_and_efficiencies(10),
        adequate in any::<bool>(),
        scarce_total in 0.02f64..0.98,
        log_eps in -6.0f64..-1.0,
    ) {
        let regime = if adequate { RegimeKind::EnergyAdequate } else { RegimeKind::EnergyScarce };
        let src = sources(&w, &into_regime(&b, regime, scarce_total));
        let n = net(src.len(), 10f64.powf(log_eps));
        let solution = solve(&src, &n).unwrap();
        prop_assert_eq!(solution.regime.kind, regime);
        let slack = check_energy_feasibility(&solution.rates, &src, &n).unwrap().min_slack();
        prop_assert!(slack >= -1e-10, "min slack {}", slack);

        let value = peak_age_objective(&solution.rates, &src, &n).unwrap().objective_normalized;
        let cert = certify(&src, &n, &solution).unwrap();
        let tol = 1e-12 * value;
        prop_assert!(cert.lower_bound <= value + tol);
        prop_assert!(value <= cert.upper_bound + tol);
    }

    #[test]
    fn x_star_below_inverse_sqrt(log_eps in -12.0f64..3.0) {
        let eps = 10f64.powf(log_eps);
        prop_assert!(x_star_adequate(eps) <= (1.0 / eps).sqrt());
    }

    #[test]
    fn beta_matches_breakpoint_walk((w, b) in weights_and_efficiencies(10)) {
        let b = into_regime(&b, RegimeKind::EnergyAdequate, 0.0);
        let src = sources(&w, &b);
        let beta = solve_beta_adequate(&src).unwrap();
        let capped: Vec<f64> = b.iter().map(|x| x.min(1.0)).collect();
        let exact = beta_by_breakpoints(&w, &capped);
        let residual: f64 = capped.iter().zip(&w).map(|(&bi, &wi)| bi.min(beta * wi.sqrt())).sum::<f64>() - 1.0;
        prop_assert!(residual.abs() <= 1e-12, "residual {}", residual);
        // β is only pinned down where the sum is strictly increasing.
        let total: f64 = capped.iter().sum();
        if total > 1.0 + 1e-9 {
            prop_assert!((beta - exact).abs() <= 1e-9 * exact, "bisection {} exact {}", beta, exact);
        }
    }

    #[test]
    fn scarce_shares_are_the_efficiencies((w, b) in weights_and_efficiencies(10), total in 0.02f64..0.98, log_eps in -6.0f64..-1.0) {
        let b = into_regime(&b, RegimeKind::EnergyScarce, total);
        let src = sources(&w, &b);
        let solution = solve(&src, &net(src.len(), 10f64.powf(log_eps))).unwrap();
        for s in &src {
            prop_assert_eq!(s.target_efficiency.min(solution.beta_star * s.weight.sqrt()), s.target_efficiency);
        }
    }

    #[test]
    fn scarce_factors_solve_their_quadratic((_, b) in weights_and_efficiencies(10), total in 0.02f64..0.98, log_eps in -6.0f64..0.0) {
        let b = into_regime(&b, RegimeKind::EnergyScarce, total);
        let eps = 10f64.powf(log_eps);
        let src = sources(&vec![1.0; b.len()], &b);
        let c = scarce_feasibility_factors(&src, eps);
        let sum: f64 = b.iter().sum();
        for (l, &cl) in c.iter().enumerate() {
            // a c² + c - 1 = 0 with a = (Σb - b_l) ε / (1 - Σb)².
            let a = (sum - b[l]) * eps / (1.0 - sum).powi(2);
            prop_assert!(cl > 0.0 && cl <= 1.0);
            prop_assert!((a * cl * cl + cl - 1.0).abs() <= 1e-12 * (1.0 + a * cl * cl));
            if a > 1e-4 {
                let direct = (-1.0 + (1.0 + 4.0 * a).sqrt()) / (2.0 * a);
                prop_assert!((cl - direct).abs() <= 1e-9 * cl, "c = {} direct {}", cl, direct);
            }
        }
    }

    #[test]
    fn fixed_rate_is_feasible_and_sigma_grows_with_k(
        (w, b) in weights_and_efficiencies(10),
        log_eps in -6.0f64..-1.0,
        k1 in 1e-3f64..1e2,
        dk in 0.0f64..1e2,
    ) {
        let src = sources(&w, &b);
        let m = src.len();
        let n = net(m, 10f64.powf(log_eps));
        let fixed = fixed_rate_baseline(&src, &n).unwrap();
        prop_assert!(check_energy_feasibility(&fixed, &src, &n).unwrap().feasible);
        prop_assert!(fixed.rates().iter().all(|&k| k == fixed.rates()[0]));

        let lo = busy_fraction(&SleepRates::external(vec![k1; m]).unwrap(), &n).unwrap();
        let hi = busy_fraction(&SleepRates::external(vec![k1 + dk; m]).unwrap(), &n).unwrap();
        prop_assert!(hi[0] >= lo[0]);
    }
}
