//! Experiment runner: config parsing, seed sweeps, output files, and
//! cross-seed aggregation.

mod aggregate;
mod cli;
mod config;
mod manifest;

pub use aggregate::{aggregate_reports, summary_to_csv, SummaryRow, SUMMARY_HEADER};
pub use cli::cli_main;
pub use config::{
    BiasConfig, DataConfig, DynamicShiftConfig, ExperimentConfig, GbdtSpaceConfig, LearnerConfig,
    LogregSpaceConfig, NoisyLabelsConfig, RunConfig, RunKind,
};
pub use manifest::{FileEntry, RunManifest};
