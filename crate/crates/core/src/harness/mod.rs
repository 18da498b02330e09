//! Experiment orchestration: config files, checkpointed runs, result files,
//! parameter sweeps and the length-distribution analysis.

pub mod checkpoint;
pub mod config;
pub mod dist;
pub mod experiment;
pub mod output;
pub mod plot;
pub mod sweep;

pub use checkpoint::Checkpoint;
pub use config::{ExperimentConfig, Mode};
pub use dist::{
    cdf_table, lengths_from_trial_log, program_table, run_distribution_analysis, sample_programs, LengthCdf,
    MIN_DIST_PROGRAMS,
};
pub use experiment::{load_table, run_experiment, EpisodeResult, EstimateRecord, ExperimentReport, RunOptions};
pub use output::{Provenance, SummaryRow};
pub use plot::{collect_series, series_table};
pub use sweep::{expand_grid, parameter_sweep, SweepResult};
