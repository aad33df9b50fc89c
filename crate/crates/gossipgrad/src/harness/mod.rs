//! Experiment orchestration: configuration files, seed sweeps, artifact
//! emission, shipped experiments, and the lemma-inequality check suite.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod runner;

pub use checks::{consensus_recursion_check, run_all_checks, td_contraction_check, LemmaReport};
pub use config::{parse_config, parse_config_str, ExperimentConfig};
pub use experiments::{list as list_experiments, resolve};
pub use runner::{describe, run_experiment, RunOptions, Summary};
