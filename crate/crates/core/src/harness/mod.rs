//! Monte-Carlo experiments: configuration, runs, metrics and output files.

mod config;
mod metrics;
mod plot;
mod runner;

pub use config::{DbfSection, ExperimentConfig, ExperimentSection, FilterKind, MpfSection, ScenarioKind};
pub use metrics::{binomial_std_error, divergence_probability, lost_track, rmse};
pub use plot::emit_plot_data;
pub use runner::{
    analytic_flops, attach_counter, build_filter, derive_seed, format_summary, read_csv, run_experiment, run_filter,
    run_single, simulate_scenario, summarize, write_csv, RunRecord, Simulated, SummaryRow, CSV_HEADER,
};
