//! Experiment orchestration: configs, sweeps over generator or model
//! parameters, per-cell error isolation and CSV reports.

mod config;
mod movielens;
mod run;

pub use config::{epsilon_grid, DataSource, ExperimentConfig, ModelSpec, SweepParameter, SweepSpec};
pub use movielens::{age_threshold, ingest_movielens, Attribute, IngestReport, AGE_TARGET_MINORITY};
pub use run::{
    evaluate_metric, replication_seed, run_experiment, run_model, sweep_epsilon, sweep_fairness, sweep_minority,
    sweep_users, write_provenance, EvalContext, MetricSettings, ModelOutputs, SummaryRow, SweepResult,
};
