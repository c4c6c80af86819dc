//! Experiment configuration, sweeps and result files.
//!
//! A sweep is the product of one optional axis with the seed list. Every
//! point runs independently from its own seed, so results do not depend on
//! how many workers execute the sweep or in which order points finish.

mod config;
mod plot;
mod sweep;

use std::sync::Arc;

use thiserror::Error;

pub use config::{
    emit_defaults, load_config, parse_config, validate, ConfigError, ExperimentConfig, ExperimentSection, Mode,
    SweepSection, SweepValue, TrackerSection, ENV_PREFIX, SECTIONS,
};
pub use plot::{aggregate, emit_plot_data, SeriesPoint, PLOT_HEADER};
pub use sweep::{
    expand_points, run_point, run_sweep, write_rows, ResultRow, RowWriter, SweepPoint, CSV_HEADER, SCHEMA_VERSION,
};

use crate::channel::{load_trace, ChannelSource, TraceError};
use crate::neural::checkpoint::CheckpointError;
use crate::rl::RlError;
use crate::trackers::TrackerError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("actor checkpoint has dims {0:?}, expected 4 inputs and 2 outputs")]
    ActorShape(Vec<usize>),
    #[error("no rows to plot")]
    EmptyRows,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Builds the channel source named by `experiment.source`, loading the
/// trace file if there is one.
pub fn build_source(cfg: &ExperimentConfig) -> Result<ChannelSource, HarnessError> {
    let src = cfg.experiment.source.as_str();
    if let Some(path) = src.strip_prefix("trace:") {
        return Ok(ChannelSource::Trace(Arc::new(load_trace(path)?)));
    }
    Ok(match src {
        "synthetic-multipath" => ChannelSource::multipath_from(&cfg.channel),
        _ => ChannelSource::SyntheticLos,
    })
}
