//! Configuration, seeded trial orchestration, sweeps and waveform files.

pub mod config;
pub mod sweep;
pub mod trial;
pub mod waveform;

pub use config::{DspConfig, RandomizeConfig, TrainingKind, TrialConfig};
pub use sweep::{canonical_param, sweep, with_param, write_csv, SweepRow, CSV_HEADER, SWEEP_PARAMS};
pub use trial::{
    receive, receive_at, run_trial, run_trials, scenario, RMSE_BLOCK, transmit, trial_rng, Aggregate, ReceiverOutput, Scenario, Stat,
    TrialRecord, TrialReport,
};
