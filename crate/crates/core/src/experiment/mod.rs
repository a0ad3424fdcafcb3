//! Declarative experiment configs, the sweep runner and figure output.

pub mod config;
pub mod figures;
pub mod runner;

pub use config::{validate_config, EigenstateSelection, ExperimentConfig, SystemSpec};
pub use figures::emit_figures;
pub use runner::{run_experiment, run_in_directory, ExperimentResult, ResultRow};
