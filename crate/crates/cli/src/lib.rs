//! Experiment runner for the percolab estimators.

// Parameter checks use `!(x > 0.0)` style comparisons so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod run;
pub mod spec;

pub use run::{run_experiment, RunError, RunManifest};
pub use spec::{Cli, Command, ExperimentSpec, SpecError};
