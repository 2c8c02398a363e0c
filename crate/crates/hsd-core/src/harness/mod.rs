//! Experiment orchestration: corpus ingestion, policy presets, decoding
//! runs, aggregation and CSV reporting.

mod corpus;
mod experiment;
mod policy;
mod table;
pub mod text;

pub use corpus::{load_corpus, save_corpus, synth_corpus, CorpusRecord, LengthDist};
pub use experiment::{
    plot_csv, report_csv, run_experiment, CorpusSource, ExperimentSpec, ModelSource, PolicyChoice,
    RecordOutcome, RunReport,
};
pub use policy::{preset, preset_grid, PolicySpec, DEFAULT_LAMBDA0};
pub use table::{format_layer_ranges, schedule_table};

use std::path::PathBuf;

use thiserror::Error;

use crate::confidence::ConfidenceError;
use crate::error::{ConfigError, EngineError};
use crate::metrics::MetricsError;
use crate::model::FormatError;
use crate::schedule::ScheduleError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus line {line}: {message}")]
    CorpusParse { line: usize, message: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid synthetic corpus spec: {0}")]
    BadSynthSpec(String),
    #[error("unknown policy preset '{0}'")]
    UnknownPreset(String),
    #[error("record {index}: {source}")]
    Record {
        index: usize,
        #[source]
        source: EngineError,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Confidence(#[from] ConfidenceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}
