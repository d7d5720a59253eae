//! Experiment configuration, Monte Carlo sweeps and CSV output.

mod config;
mod csv;
mod experiment;

pub use config::{parse_config, snr_range, ConfigError, ExperimentConfig, Metric, Waveform, DEFAULTS};
pub use csv::{emit_csv, format_value, parse_csv, HEADER};
pub use experiment::{
    config_flops, preset, run_experiment, run_trial, sort_rows, subarray_precoders, trial_channel, PointOutcome,
    Preset, ResultRow, RunError, TrialChannel, TrialOutcome,
};
