//! Age-of-information scheduling for energy-harvesting sources that share a
//! channel through sleep-wake carrier sensing.
//!
//! - [`model`]: closed-form channel metrics for given sleep rates.
//! - [`solver`]: near-optimal sleep rates, bounds and baselines.
//! - [`oracle`]: brute-force search over sleep rates for small instances.
//! - [`sim`]: discrete-event simulation of the channel and the age processes.

// `!(x > 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod oracle;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    access_probability, busy_fraction, check_energy_feasibility, mean_cycle_duration,
    mean_cycles_between_success, peak_age_objective, target_efficiency_from_battery,
    AnalyticReport, BatterySpec, FeasibilityCheck, NetworkSpec, Provenance, SleepRates, SourceSpec,
    TxDistribution,
};
pub use oracle::{brute_force_optimize, GridSpec, OracleResult};
pub use sim::{
    run_lifetime_experiment, run_simulation, run_simulation_traced, run_synchronized, AgeTracker,
    Estimate, Horizon, SensingModel, SimConfig, SimReport,
};
pub use solver::{
    asymptotic_optimum, bounds_adequate, bounds_scarce, certify, detect_regime,
    fixed_rate_baseline, solve, solve_adequate, solve_scarce, synchronized_optimum,
    BoundCertificate, Broadcast, Regime, RegimeKind, Solution, SynchronizedOptimum,
};
