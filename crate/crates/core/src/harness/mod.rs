//! Configuration-driven Monte Carlo experiments.

pub mod commands;
pub mod config;
pub mod experiment;

pub use config::{ExperimentConfig, LambdaGridConfig, LambdaSpec, ModelConfig, OutputConfig};
pub use experiment::{
    fit_log_log, rate_fit, replay_cell, run_experiment, run_experiment_with_threads, ExperimentResult, Prepared,
    RateFit, ResultRow, SummaryRow,
};
