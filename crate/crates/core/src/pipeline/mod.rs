//! Batch pipeline: record files, configuration, synthetic data, plots.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod plot;
pub mod records;
pub mod run;
pub mod stub;

pub use config::{RunConfig, RunSettings};
pub use records::{
    load_records, read_records, write_records, LineDiagnostic, LoadedRecords, RecordLine,
};
pub use run::{run_pipeline, run_records, RunOutput};
pub use stub::{stub_generate, stub_generate_with, StubOptions};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
