//! Experiment harness: seeded sweeps over sample size, dataset count and
//! observed-context fraction, scored per variant, with CSV, markdown and SVG
//! output.

pub mod config;
pub mod report;
pub mod runner;
pub mod svg;

pub use config::{mix, Cell, CiKind, ExperimentConfig, ModelSource};
pub use report::{compare_variants, write_csv, write_outputs};
pub use runner::{run_experiment, run_realization, CellResult, ExperimentResults};
