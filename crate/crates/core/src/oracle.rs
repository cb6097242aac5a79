//! Brute-force reference optimizer for small networks.
//!
//! Exhaustive log-spaced grid search over the exact (nonconvex) energy
//! constraint, followed by a few sweeps of per-coordinate golden-section
//! refinement. It exists to check the closed-form solution, not to replace it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    busy_fraction_term, check_sources_dimension, objective_value, peak_age_objective,
    validate_sources, NetworkSpec, Provenance, SleepRates, SourceSpec,
};
use crate::solver::{detect_regime, solve, RegimeKind};

pub const MAX_ORACLE_SOURCES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Grid points per coordinate; `None` picks 60 (M ≤ 2) or 30 (M = 3).
    pub points_per_axis: Option<usize>,
    /// Lower end of each axis as a multiple of that source's closed-form rate.
    pub lower_factor: f64,
    /// Upper end of each axis as a multiple of `x*`.
    pub upper_factor: f64,
    pub refine_sweeps: usize,
    /// Relative width at which golden-section search stops.
    pub refine_tolerance: f64,
    /// `x*` to use when the closed form has none (zero sensing, energy-adequate).
    pub asymptotic_anchor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points_per_axis: None,
            lower_factor: 1e-3,
            upper_factor: 10.0,
            refine_sweeps: 3,
            refine_tolerance: 1e-8,
            asymptotic_anchor: 1e3,
        }
    }
}

impl GridSpec {
    fn points_for(&self, m: usize) -> usize {
        self.points_per_axis
            .unwrap_or(if m <= 2 { 60 } else { 30 })
            .max(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_rates: SleepRates,
    pub best_value: f64,
    /// Log-spacing of the grid, `ln(hi/lo) / (n - 1)`, largest over the axes.
    pub grid_resolution: f64,
    pub refined: bool,
    /// Objective after the grid stage and after each refinement sweep.
    pub sweep_values: Vec<f64>,
    /// Per-coordinate search box `(lo, hi)`.
    pub search_box: Vec<(f64, f64)>,
}

struct Problem {
    weights: Vec<f64>,
    budgets: Vec<f64>,
    eps: f64,
}

impl Problem {
    fn feasible(&self, r: &[f64]) -> bool {
        let total: f64 = r.iter().sum();
        r.iter()
            .zip(&self.budgets)
            .all(|(&ri, &b)| busy_fraction_term(ri, total, self.eps) <= b)
    }

    fn value(&self, r: &[f64]) -> f64 {
        objective_value(r, &self.weights, self.eps)
    }
}

/// Centre of the search: the closed-form `x*` and rates.
fn anchor(sources: &[SourceSpec], net: &NetworkSpec, grid: &GridSpec) -> Result<(f64, Vec<f64>)> {
    if net.sensing_ratio == 0.0 && detect_regime(sources).kind == RegimeKind::EnergyAdequate {
        let beta = crate::solver::solve_beta_adequate(sources)?;
        let x = grid.asymptotic_anchor;
        let rates = sources
            .iter()
            .map(|s| s.target_efficiency.min(1.0).min(beta * s.weight.sqrt()) * x)
            .collect();
        return Ok((x, rates));
    }
    let sol = solve(sources, net)?;
    Ok((sol.x_star, sol.rates.rates().to_vec()))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

pub fn brute_force_optimize(
    sources: &[SourceSpec],
    net: &NetworkSpec,
    grid: &GridSpec,
) -> Result<OracleResult> {
    validate_sources(sources)?;
    check_sources_dimension(sources, net)?;
    let m = sources.len();
    if m > MAX_ORACLE_SOURCES {
        return Err(Error::TooManySources {
            max: MAX_ORACLE_SOURCES,
            got: m,
        });
    }

    let problem = Problem {
        weights: sources.iter().map(|s| s.weight).collect(),
        budgets: sources.iter().map(|s| s.target_efficiency).collect(),
        eps: net.sensing_ratio,
    };

    let (x_star, anchor_rates) = anchor(sources, net, grid)?;
    let search_box: Vec<(f64, f64)> = anchor_rates
        .iter()
        .map(|&r| (grid.lower_factor * r, grid.upper_factor * x_star))
        .collect();
    let n = grid.points_for(m);
    let axes: Vec<Vec<f64>> = search_box
        .iter()
        .map(|&(lo, hi)| log_grid(lo, hi, n))
        .collect();
    let grid_resolution = search_box
        .iter()
        .map(|&(lo, hi)| (hi / lo).ln() / (n - 1) as f64)
        .fold(0.0, f64::max);

    // Exhaustive pass over the Cartesian product.
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut index = vec![0usize; m];
    let mut point = vec![0.0; m];
    'outer: loop {
        for (l, &i) in index.iter().enumerate() {
            point[l] = axes[l][i];
        }
        if problem.feasible(&point) {
            let v = problem.value(&point);
            if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                best = Some((point.clone(), v));
            }
        }
        for slot in index.iter_mut() {
            *slot += 1;
            if *slot < n {
                continue 'outer;
            }
            *slot = 0;
        }
        break;
    }

    // The grid's smallest corner is feasible for any realistic box; fall back
    // to a uniformly shrunk anchor otherwise.
    let (mut current, mut current_value) = match best {
        Some(b) => b,
        None => {
            let mut r = anchor_rates.clone();
            while !problem.feasible(&r) {
                r.iter_mut().for_each(|x| *x *= 0.5);
            }
            let v = problem.value(&r);
            (r, v)
        }
    };

    let mut sweep_values = vec![current_value];
    for _ in 0..grid.refine_sweeps {
        for l in 0..m {
            let (lo, hi) = feasible_interval(&problem, &current, l, search_box[l]);
            if let Some((x, v)) =
                golden_section(&problem, &current, l, lo, hi, grid.refine_tolerance)
            {
                if v < current_value {
                    current[l] = x;
                    current_value = v;
                }
            }
        }
        sweep_values.push(current_value);
    }

    let best_rates = SleepRates::new(current, Provenance::Oracle)?;
    let best_value = peak_age_objective(&best_rates, sources, net)?.objective_normalized;
    Ok(OracleResult {
        best_rates,
        best_value,
        grid_resolution,
        refined: grid.refine_sweeps > 0,
        sweep_values,
        search_box,
    })
}

/// Feasible stretch of coordinate `l` around the current (feasible) point,
/// clipped to the search box.
fn feasible_interval(problem: &Problem, point: &[f64], l: usize, bounds: (f64, f64)) -> (f64, f64) {
    let at = |x: f64| {
        let mut p = point.to_vec();
        p[l] = x;
        problem.feasible(&p)
    };
    let centre = point[l];
    let lo = if at(bounds.0) {
        bounds.0
    } else {
        bisect_boundary(&at, centre, bounds.0.min(centre))
    };
    let hi = if at(bounds.1) {
        bounds.1
    } else {
        bisect_boundary(&at, centre, bounds.1.max(centre))
    };
    (lo.min(centre), hi.max(centre))
}

/// Last feasible point on the segment from `inside` (feasible) towards
/// `outside` (infeasible), in log coordinates.
fn bisect_boundary(at: &impl Fn(f64) -> bool, inside: f64, outside: f64) -> f64 {
    let (mut good, mut bad) = (inside.ln(), outside.ln());
    for _ in 0..200 {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if at(mid.exp()) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good.exp()
}

/// Golden-section search for coordinate `l` on `[lo, hi]` in log space.
/// Returns the best feasible point it evaluated.
fn golden_section(
    problem: &Problem,
    point: &[f64],
    l: usize,
    lo: f64,
    hi: f64,
    tolerance: f64,
) -> Option<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut p = point.to_vec();
    let mut eval = |u: f64| -> f64 {
        p[l] = u.exp();
        if problem.feasible(&p) {
            problem.value(&p)
        } else {
            f64::INFINITY
        }
    };

    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut best: Option<(f64, f64)> = None;
    let track = |u: f64, v: f64, best: &mut Option<(f64, f64)>| {
        if v.is_finite() && best.is_none_or(|(_, bv)| v < bv) {
            *best = Some((u.exp(), v));
        }
    };
    for u in [a, b] {
        let v = eval(u);
        track(u, v, &mut best);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    track(c, fc, &mut best);
    track(d, fd, &mut best);
    while (b - a).abs() > tolerance {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
            track(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
            track(d, fd, &mut best);
        }
    }
    best
}
