//! Declarative experiments: TOML configs, replicated runs and their outputs.

pub mod config;
pub mod output;
pub mod runner;
pub mod seeds;

pub use config::{CovarianceSpec, ExperimentConfig, InstanceSpec, MeanSpec, Overrides, PolicyEntry, PriorSpec};
pub use runner::{
    replication_seed, run_experiment, run_replication, run_scenario, simulate, ExperimentResult, Metadata,
    PolicyRuns, RegretCurve, ReplicationResult, Scenario,
};
