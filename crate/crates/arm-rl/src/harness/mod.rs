//! Experiment harness: config parsing, multi-trial training with CSV
//! metrics, checkpoint evaluation, frame dumps, and learning-curve SVGs.
//!
//! The pieces compose into the `arm-rl` binary's subcommands but are
//! ordinary library calls: [`train`] runs every trial of a [`RunConfig`]
//! and writes `metrics.csv` plus one checkpoint per trial, [`evaluate`]
//! replays a checkpoint greedily, and [`plot`] turns metrics CSVs into
//! reward / episode-length charts.

mod config;
mod evaluate;
mod metrics;
mod pngio;
mod plot;
mod train;

pub use config::{
    parse_config_text, parse_set_arg, AgentKind, ConfigError, RunConfig,
};
pub use evaluate::{evaluate, EpisodeRecord, EvalOptions, EvalSummary};
pub use metrics::{
    parse_csv, read_csv, to_csv, write_csv, MetricsError, MetricsRow, CSV_HEADER,
};
pub use pngio::{save_mask_png, save_png};
pub use plot::{mean_stderr, plot, reduce_rows, sample_series, smooth_trailing, SeriesData};
pub use train::{architecture_for, train, TrainResult};

use crate::agents::AgentError;
use crate::env::EnvError;
use crate::nn::{CheckpointError, NnError};

/// Errors surfaced by harness operations.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Net(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint expects input {expected}, environment provides {found}")]
    ArchitectureMismatch { expected: String, found: String },
    #[error("trial {0} panicked")]
    TrialPanicked(usize),
    #[error("{0}")]
    Other(String),
}
