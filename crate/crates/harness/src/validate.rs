//! Randomized self-check tying the model, solver, oracle and simulator
//! together. Each property reports how many checks ran, how many passed and
//! its worst margin (tolerance minus violation; negative means failure).

use std::fmt;

use aoi_sleepwake::model::{access_probability, busy_fraction, mean_cycle_duration};
use aoi_sleepwake::solver::{solve_beta_adequate, x_star_adequate};
use aoi_sleepwake::{
    asymptotic_optimum, brute_force_optimize, certify, check_energy_feasibility,
    fixed_rate_baseline, peak_age_objective, run_simulation, run_simulation_traced, solve,
    synchronized_optimum, GridSpec, Horizon, NetworkSpec, RegimeKind, SimConfig, SleepRates,
    SourceSpec, TxDistribution,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub seed: u64,
    /// Random instances per analytic property.
    pub instances: usize,
    /// Instances for the brute-force comparisons (each runs the oracle).
    pub oracle_instances: usize,
    /// Instances simulated against the closed forms.
    pub sim_instances: usize,
    pub sim_cycles: u64,
    /// Negative control: scale the solver's rates up before the feasibility
    /// check so that it must report violations.
    pub inject_infeasible_rates: bool,
}

impl ValidationOptions {
    pub fn new(seed: u64, instances: usize) -> Self {
        Self {
            seed,
            instances,
            oracle_instances: instances.min(20),
            sim_instances: 10,
            sim_cycles: 1_000_000,
            inject_infeasible_rates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub checked: usize,
    pub passed: usize,
    pub worst_margin: f64,
    /// Description of the worst case.
    pub detail: String,
}

impl PropertyResult {
    pub fn ok(&self) -> bool {
        self.checked > 0 && self.passed == self.checked
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub properties: Vec<PropertyResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.properties.iter().all(PropertyResult::ok)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.properties {
            writeln!(
                f,
                "{} {:<34} {:>6}/{:<6} worst margin {:>12.4e}  {}",
                if p.ok() { "PASS" } else { "FAIL" },
                p.name,
                p.passed,
                p.checked,
                p.worst_margin,
                p.detail
            )?;
        }
        Ok(())
    }
}

struct Property {
    result: PropertyResult,
}

impl Property {
    fn new(name: &'static str) -> Self {
        Self {
            result: PropertyResult {
                name,
                checked: 0,
                passed: 0,
                worst_margin: f64::INFINITY,
                detail: String::new(),
            },
        }
    }

    /// `margin >= 0` passes; NaN fails.
    fn check(&mut self, margin: f64, detail: impl FnOnce() -> String) {
        let r = &mut self.result;
        r.checked += 1;
        if margin >= 0.0 {
            r.passed += 1;
        }
        if !r.worst_margin.is_nan() && !(margin >= r.worst_margin) {
            r.worst_margin = margin;
            r.detail = detail();
        }
    }

    /// A check that could not run counts as a failure.
    fn error(&mut self, e: impl fmt::Display) {
        self.check(f64::NAN, || format!("error: {e}"));
    }

    fn finish(self) -> PropertyResult {
        self.result
    }
}

fn sources(weights: &[f64], efficiencies: &[f64]) -> Vec<SourceSpec> {
    weights
        .iter()
        .zip(efficiencies)
        .map(|(&w, &b)| SourceSpec::new(w, b).expect("generated source is valid"))
        .collect()
}

fn uniform(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    hi - (hi - lo) * rng.random::<f64>()
}

fn log_uniform(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

/// Random instance in the requested regime with `m ∈ [1, max_m]`,
/// `w ∈ (0, 10]`, `b ∈ (0, 1]`.
fn random_instance(rng: &mut StdRng, regime: RegimeKind, max_m: usize) -> Vec<SourceSpec> {
    let m = rng.random_range(1..=max_m);
    let w: Vec<f64> = (0..m).map(|_| uniform(rng, 0.0, 10.0)).collect();
    let mut b: Vec<f64> = (0..m).map(|_| uniform(rng, 0.0, 1.0)).collect();
    let total: f64 = b.iter().sum();
    match regime {
        RegimeKind::EnergyAdequate if total < 1.0 => {
            b.iter_mut().for_each(|x| *x /= total);
            // Rounding can leave the sum a few ulps short of 1.
            let short = 1.0 - b.iter().sum::<f64>();
            if short > 0.0 {
                let top = b.iter_mut().max_by(|x, y| x.total_cmp(y)).unwrap();
                *top = (*top + short).min(1.0);
            }
        }
        RegimeKind::EnergyScarce => {
            let target = uniform(rng, 0.02, 0.98);
            b.iter_mut().for_each(|x| *x *= target / total);
        }
        _ => {}
    }
    sources(&w, &b)
}

fn random_rates(rng: &mut StdRng, m: usize) -> SleepRates {
    SleepRates::external((0..m).map(|_| log_uniform(rng, 1e-3, 1e2)).collect())
        .expect("generated rates are positive")
}

fn net(m: usize, eps: f64) -> NetworkSpec {
    NetworkSpec::deterministic(m, eps, 1.0).expect("generated network is valid")
}

/// Distance in standard errors. A zero standard error (e.g. a lone source
/// always wins) only tolerates rounding-level differences.
pub fn z_score(empirical: f64, expected: f64, std_error: f64) -> f64 {
    let diff = (empirical - expected).abs();
    if std_error > 0.0 {
        diff / std_error
    } else if diff <= 1e-12 * expected.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn run_validation_battery(options: &ValidationOptions) -> ValidationReport {
    let mut properties = Vec::new();
    properties.extend(model_properties(options));
    properties.extend(solver_properties(options));
    properties.extend(gap_scaling());
    properties.extend(oracle_properties(options));
    properties.extend(simulation_properties(options));
    ValidationReport {
        seed: options.seed,
        properties,
    }
}

fn model_properties(options: &ValidationOptions) -> Vec<PropertyResult> {
    let mut rng = StdRng::seed_from_u64(options.seed);
    let mut closure = Property::new("probability_closure");
    let mut monotone = Property::new("alpha_nonincreasing_in_epsilon");
    let mut zero = Property::new("zero_sensing_reductions");
    let mut homogeneity = Property::new("homogeneity_in_mean_tx_time");
    let mut single = Property::new("single_source_closed_form");
    let eps_grid = [0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

    for _ in 0..options.instances {
        let m = rng.random_range(1..=10);
        let rates = random_rates(&mut rng, m);
        let eps = log_uniform(&mut rng, 1e-6, 1.0);
        let alpha = access_probability(&rates, &net(m, eps)).unwrap();
        let total: f64 = alpha.iter().sum();
        let collision = 1.0 - total;
        closure.check(
            // 1 - Σα rounds to 1 once Σα underflows, so test Σα > 0 directly.
            if total > 0.0 && (0.0..=1.0).contains(&collision) && alpha.iter().all(|&a| a >= 0.0) {
                1e-12 - (total + collision - 1.0).abs()
            } else {
                -collision.abs()
            },
            || format!("sum alpha = {total}"),
        );

        let curves: Vec<Vec<f64>> = eps_grid
            .iter()
            .map(|&e| access_probability(&rates, &net(m, e)).unwrap())
            .collect();
        for pair in curves.windows(2) {
            let worst = pair[1]
                .iter()
                .zip(&pair[0])
                .map(|(hi_eps, lo_eps)| lo_eps - hi_eps)
                .fold(f64::INFINITY, f64::min);
            monotone.check(worst, || format!("alpha increased by {}", -worst));
        }

        let z = net(m, 0.0);
        let alpha0 = access_probability(&rates, &z).unwrap();
        let sigma0 = busy_fraction(&rates, &z).unwrap();
        let s = rates.total();
        let worst = rates
            .rates()
            .iter()
            .enumerate()
            .map(|(l, &r)| rel(alpha0[l], r / s).max(rel(sigma0[l], r / (s + 1.0))))
            .fold(0.0, f64::max);
        zero.check(4.0 * f64::EPSILON - worst, || {
            format!("relative error {worst:e}")
        });

        let w: Vec<f64> = (0..m).map(|_| uniform(&mut rng, 0.0, 10.0)).collect();
        let src = sources(&w, &vec![1.0; m]);
        let mean_t = log_uniform(&mut rng, 1e-4, 1e1);
        let unit = peak_age_objective(&rates, &src, &net(m, eps)).unwrap();
        let scaled_net = NetworkSpec::deterministic(m, eps, mean_t).unwrap();
        let scaled = peak_age_objective(&rates, &src, &scaled_net).unwrap();
        let err = rel(scaled.objective_normalized, unit.objective_normalized).max(rel(
            scaled.objective_unnormalized,
            mean_t * unit.objective_normalized,
        ));
        homogeneity.check(1e-12 - err, || {
            format!("relative error {err:e} at E[T] = {mean_t}")
        });

        let r = rates.rates()[0];
        let one = SleepRates::external(vec![r]).unwrap();
        let v = peak_age_objective(&one, &sources(&[1.0], &[1.0]), &net(1, 0.0))
            .unwrap()
            .objective_normalized;
        let err = rel(v, (1.0 + r) / r + 1.0);
        single.check(1e-13 - err, || format!("r = {r}: relative error {err:e}"));
    }
    vec![
        closure.finish(),
        monotone.finish(),
        zero.finish(),
        homogeneity.finish(),
        single.finish(),
    ]
}

fn solver_properties(options: &ValidationOptions) -> Vec<PropertyResult> {
    let mut rng = StdRng::seed_from_u64(options.seed.wrapping_add(1));
    let mut feasible_adequate = Property::new("feasibility_energy_adequate");
    let mut feasible_scarce = Property::new("feasibility_energy_scarce");
    let mut sandwich = Property::new("bound_sandwich");
    let mut x_bound = Property::new("x_star_bound");
    let mut scarce_identity = Property::new("scarce_share_identity");
    let mut beta = Property::new("beta_residual");
    let mut synchronized = Property::new("synchronized_equivalence");
    let mut asymptotic = Property::new("asymptotic_matches_synchronized");
    let mut ordering = Property::new("age_optimal_beats_fixed_rate");
    let mut zero_scarce = Property::new("zero_sensing_scarce_rates");
    let scale = if options.inject_infeasible_rates {
        1e3
    } else {
        1.0
    };

    for regime in [RegimeKind::EnergyAdequate, RegimeKind::EnergyScarce] {
        for _ in 0..options.instances {
            let src = random_instance(&mut rng, regime, 10);
            let m = src.len();
            let eps = log_uniform(&mut rng, 1e-6, 1e-1);
            let n = net(m, eps);
            let solution = match solve(&src, &n) {
                Ok(s) => s,
                Err(e) => {
                    sandwich.error(e);
                    continue;
                }
            };

            let rates =
                SleepRates::external(solution.rates.rates().iter().map(|r| r * scale).collect())
                    .unwrap();
            let slack = check_energy_feasibility(&rates, &src, &n)
                .unwrap()
                .min_slack();
            let feasibility = match regime {
                RegimeKind::EnergyAdequate => &mut feasible_adequate,
                RegimeKind::EnergyScarce => &mut feasible_scarce,
            };
            feasibility.check(slack + 1e-10, || {
                format!("min slack {slack:e}, m = {m}, eps = {eps:e}")
            });

            let value = peak_age_objective(&solution.rates, &src, &n)
                .unwrap()
                .objective_normalized;
            match certify(&src, &n, &solution) {
                Ok(cert) => {
                    let tol = 1e-12 * value;
                    let margin = (value - cert.lower_bound).min(cert.upper_bound - value) + tol;
                    sandwich.check(margin, || {
                        format!(
                            "lower {} value {} upper {}",
                            cert.lower_bound, value, cert.upper_bound
                        )
                    });
                }
                Err(e) => sandwich.error(e),
            }

            let x = x_star_adequate(eps);
            x_bound.check((1.0 / eps).sqrt() - x, || {
                format!("eps = {eps:e}, x* = {x}")
            });

            let fixed = fixed_rate_baseline(&src, &n).unwrap();
            let fixed_value = peak_age_objective(&fixed, &src, &n)
                .unwrap()
                .objective_normalized;
            let gap = certify(&src, &n, &solution).map_or(0.0, |c| c.gap);
            ordering.check(fixed_value + gap - value, || {
                format!("age-optimal {value}, fixed-rate {fixed_value}")
            });

            match regime {
                RegimeKind::EnergyScarce => {
                    let worst = src
                        .iter()
                        .map(|s| {
                            (s.target_efficiency
                                .min(solution.beta_star * s.weight.sqrt())
                                - s.target_efficiency)
                                .abs()
                        })
                        .fold(0.0, f64::max);
                    scarce_identity.check(-worst, || {
                        format!("min(b, beta sqrt w) differs from b by {worst:e}")
                    });

                    let zero_net = net(m, 0.0);
                    let total: f64 = src.iter().map(|s| s.target_efficiency).sum();
                    let zero_solution = solve(&src, &zero_net).unwrap();
                    let worst = src
                        .iter()
                        .zip(zero_solution.rates.rates())
                        .map(|(s, &r)| rel(r, s.target_efficiency / (1.0 - total)))
                        .fold(0.0, f64::max);
                    zero_scarce.check(1e-12 - worst, || format!("relative error {worst:e}"));
                }
                RegimeKind::EnergyAdequate => {
                    let b = solve_beta_adequate(&src).unwrap();
                    let residual = (src
                        .iter()
                        .map(|s| s.target_efficiency.min(1.0).min(b * s.weight.sqrt()))
                        .sum::<f64>()
                        - 1.0)
                        .abs();
                    beta.check(1e-12 - residual, || format!("residual {residual:e}"));

                    let sync = synchronized_optimum(&src).unwrap();
                    let tiny = net(m, 1e-8);
                    let near = solve(&src, &tiny).unwrap();
                    let v = peak_age_objective(&near.rates, &src, &tiny)
                        .unwrap()
                        .objective_normalized;
                    let err = rel(v, sync.value);
                    synchronized.check(1e-3 - err, || format!("relative gap {err:e}"));

                    let limit = asymptotic_optimum(&src).unwrap();
                    let err = rel(limit, sync.value);
                    asymptotic.check(1e-12 - err, || format!("relative error {err:e}"));
                }
            }
        }
    }
    vec![
        feasible_adequate.finish(),
        feasible_scarce.finish(),
        sandwich.finish(),
        x_bound.finish(),
        scarce_identity.finish(),
        zero_scarce.finish(),
        beta.finish(),
        synchronized.finish(),
        asymptotic.finish(),
        ordering.finish(),
    ]
}

fn gap_at(src: &[SourceSpec], eps: f64) -> aoi_sleepwake::Result<f64> {
    let n = net(src.len(), eps);
    let solution = solve(src, &n)?;
    Ok(certify(src, &n, &solution)?.gap)
}

/// Gap ratios over fixed instances: a factor 100 in ε shrinks the gap tenfold
/// when energy is adequate, a factor 10 does when it is scarce.
fn gap_scaling() -> Vec<PropertyResult> {
    let mut adequate = Property::new("gap_scaling_energy_adequate");
    let mut scarce = Property::new("gap_scaling_energy_scarce");
    let check = |prop: &mut Property, src: &[SourceSpec], from: f64, to: f64| match (
        gap_at(src, from),
        gap_at(src, to),
    ) {
        (Ok(a), Ok(b)) => {
            let ratio = b / a;
            prop.check((ratio - 0.08).min(0.12 - ratio), || {
                format!("gap({to:e}) / gap({from:e}) = {ratio:.4}")
            });
        }
        (Err(e), _) | (_, Err(e)) => prop.error(e),
    };

    let adequate_instances = [
        sources(&[1.0, 4.0], &[0.9, 0.9]),
        sources(&[2.0, 3.0, 5.0], &[0.5, 0.4, 0.6]),
    ];
    for src in &adequate_instances {
        for (from, to) in [(1e-2, 1e-4), (1e-3, 1e-5)] {
            check(&mut adequate, src, from, to);
        }
    }
    let scarce_instances = [
        sources(&[1.0, 2.0], &[0.2, 0.3]),
        sources(&[3.0, 1.0, 0.5], &[0.1, 0.2, 0.25]),
    ];
    for src in &scarce_instances {
        for (from, to) in [(1e-2, 1e-3), (1e-3, 1e-4), (1e-4, 1e-5)] {
            check(&mut scarce, src, from, to);
        }
    }
    vec![adequate.finish(), scarce.finish()]
}

fn oracle_properties(options: &ValidationOptions) -> Vec<PropertyResult> {
    let mut rng = StdRng::seed_from_u64(options.seed.wrapping_add(2));
    let mut dominance = Property::new("oracle_dominance");
    let mut lower = Property::new("oracle_respects_lower_bound");
    let mut monotone = Property::new("oracle_refinement_monotone");
    let mut anchor = Property::new("oracle_anchor_in_box");
    let grid = GridSpec::default();

    for i in 0..options.oracle_instances {
        let regime = if i % 2 == 0 {
            RegimeKind::EnergyAdequate
        } else {
            RegimeKind::EnergyScarce
        };
        let src = random_instance(&mut rng, regime, 3);
        let m = src.len();
        let eps = if rng.random::<bool>() { 1e-3 } else { 1e-4 };
        let n = net(m, eps);
        let (solution, oracle) = match (solve(&src, &n), brute_force_optimize(&src, &n, &grid)) {
            (Ok(s), Ok(o)) => (s, o),
            (Err(e), _) | (_, Err(e)) => {
                dominance.error(e);
                continue;
            }
        };
        let cert = certify(&src, &n, &solution).unwrap();
        let value = peak_age_objective(&solution.rates, &src, &n)
            .unwrap()
            .objective_normalized;

        let excess = value - oracle.best_value;
        dominance.check(1.1 * cert.theoretical_gap_bound - excess, || {
            format!(
                "r* exceeds oracle by {excess:e}, bound {:e} (m = {m}, eps = {eps:e})",
                cert.theoretical_gap_bound
            )
        });
        lower.check(oracle.best_value - cert.lower_bound + 1e-9, || {
            format!(
                "oracle {} below lower bound {}",
                oracle.best_value, cert.lower_bound
            )
        });
        let worst_step = oracle
            .sweep_values
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min);
        monotone.check(worst_step, || {
            format!("sweep increased objective by {:e}", -worst_step)
        });
        let inside = solution
            .rates
            .rates()
            .iter()
            .zip(&oracle.search_box)
            .map(|(&r, &(lo, hi))| ((r - lo) / r).min((hi - r) / r))
            .fold(f64::INFINITY, f64::min);
        anchor.check(inside, || {
            format!("closed-form rate outside box by {:e}", -inside)
        });
    }
    vec![
        dominance.finish(),
        lower.finish(),
        monotone.finish(),
        anchor.finish(),
    ]
}

fn simulation_properties(options: &ValidationOptions) -> Vec<PropertyResult> {
    let mut rng = StdRng::seed_from_u64(options.seed.wrapping_add(3));
    let mut identity = Property::new("sim_peak_identity");
    let mut accounting = Property::new("sim_cycle_accounting");
    let mut determinism = Property::new("sim_determinism");
    let mut alpha = Property::new("sim_alpha_within_3se");
    let mut sigma = Property::new("sim_sigma_within_3se");
    let mut cycle = Property::new("sim_mean_cycle_within_3se");
    let mut peak = Property::new("sim_peak_age_within_2pct");
    let shapes = [
        TxDistribution::Deterministic { mean: 1.0 },
        TxDistribution::Exponential { mean: 1.0 },
        TxDistribution::Lognormal {
            mean: 1.0,
            sigma: 0.5,
        },
    ];

    for i in 0..options.sim_instances {
        let m = rng.random_range(1..=5);
        let w: Vec<f64> = (0..m).map(|_| uniform(&mut rng, 0.1, 10.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| uniform(&mut rng, 0.05, 1.0)).collect();
        let src = sources(&w, &b);
        let n = NetworkSpec::new(m, 0.008, 1.0, shapes[i % shapes.len()]).unwrap();
        let solution = solve(&src, &n).unwrap();
        let seed = options.seed.wrapping_add(1000 + i as u64);
        let config = SimConfig::new(
            src.clone(),
            n,
            solution.rates.clone(),
            Horizon::NumCycles(options.sim_cycles),
            seed,
        );
        let (report, trackers) = match run_simulation_traced(&config) {
            Ok(v) => v,
            Err(e) => {
                identity.error(e);
                continue;
            }
        };

        let exact = trackers.iter().all(|t| {
            t.peaks
                .iter()
                .zip(&t.inter_departures)
                .zip(&t.tx_times)
                .all(|((&p, &i), &t)| p == i + t)
        });
        identity.check(if exact { 0.0 } else { -1.0 }, || {
            "peak differs from I + T".into()
        });

        let successes: u64 = report.success_cycles.iter().sum();
        let diff = (successes + report.collision_cycles) as f64 - report.cycles_measured as f64;
        accounting.check(-diff.abs(), || format!("off by {diff}"));

        if i == 0 {
            let short = SimConfig {
                horizon: Horizon::NumCycles(options.sim_cycles.min(20_000)),
                ..config.clone()
            };
            let same = run_simulation(&short).ok() == run_simulation(&short).ok();
            determinism.check(if same { 0.0 } else { -1.0 }, || "reports differ".into());
        }

        let analytic = peak_age_objective(&solution.rates, &src, &n).unwrap();
        for l in 0..m {
            let z = z_score(
                report.empirical_alpha[l],
                analytic.per_source_alpha[l],
                report.alpha_std_error[l],
            );
            alpha.check(3.0 - z, || format!("source {l}: {z:.2} standard errors"));
            let z = z_score(
                report.empirical_sigma[l],
                analytic.per_source_sigma[l],
                report.sigma_std_error[l],
            );
            sigma.check(3.0 - z, || format!("source {l}: {z:.2} standard errors"));
        }
        let expected_cycle = mean_cycle_duration(&solution.rates, &n).unwrap();
        let z = z_score(
            report.empirical_mean_cycle,
            expected_cycle,
            report.mean_cycle_std_error,
        );
        cycle.check(3.0 - z, || format!("{z:.2} standard errors"));
        let err = rel(
            report.weighted_avg_peak_age.mean,
            analytic.objective_unnormalized,
        );
        peak.check(0.02 - err, || {
            format!(
                "relative error {err:.4} with {} transmission times",
                n.tx_time_dist.kind_name()
            )
        });
    }
    vec![
        identity.finish(),
        accounting.finish(),
        determinism.finish(),
        alpha.finish(),
        sigma.finish(),
        cycle.finish(),
        peak.finish(),
    ]
}
