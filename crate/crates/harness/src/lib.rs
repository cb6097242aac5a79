//! Experiment harness for the `aoi-sleepwake` solver and simulator:
//! spec parsing, parallel sweeps with CSV output, the validation battery and
//! the command-line front end.

// `!(x > 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod experiment;
pub mod validate;

pub use config::{load_spec, parse_spec, ExperimentKind, ExperimentSpec, Scheduler, SpecError};
pub use experiment::{run_experiment, run_lifetime, Row, CSV_HEADER, CSV_SCHEMA_VERSION};
pub use validate::{run_validation_battery, ValidationOptions, ValidationReport};
