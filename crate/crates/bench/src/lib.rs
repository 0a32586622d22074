//! Synthetic workloads and timing harness for the taintexec engine.

pub mod dataset;
pub mod harness;
pub mod report;

use thiserror::Error;

pub use dataset::{generate_dataset, Dataset, DatasetSpec};
pub use harness::{run_benchmark, run_on_dataset, Mode, RunResult, RunStats};
pub use report::{emit_log, write_csv, write_json};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid dataset: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Engine(#[from] taintexec::EngineError),
    #[error(transparent)]
    Validation(#[from] taintexec::ValidationError),
    #[error("replay diverged from the authored block: header root {expected}, replay root {computed}")]
    Nondeterministic { expected: taintexec::Digest, computed: taintexec::Digest },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
