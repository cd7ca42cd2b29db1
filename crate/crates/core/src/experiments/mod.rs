//! Experiment orchestration: baseline ensembles, the train/inference
//! compatibility sweep, latency reports and result export.

pub mod analysis;
pub mod baseline;
pub mod config;
pub mod export;
pub mod latency;
pub mod matrix;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

use crate::hardware::HardwareError;
use crate::training::{CheckpointError, TrainError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Hardware(#[from] HardwareError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(String),
}
