//! Authoring and validation runs with wall-clock timing.
//!
//! Only `author_block` is inside the authoring timer; distribution, genesis
//! construction and encoding are not. The validation timer covers decoding
//! the encoded block and replaying it.

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use taintexec::primitives::Encode;
use taintexec::{author_block, validate_encoded, ConnectedComponents, Digest, Distributor, RoundRobin};

use crate::dataset::{generate_dataset, Dataset, DatasetSpec};
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Sequential,
    RoundRobin,
    ConnectedComponents,
}

impl Mode {
    /// Workers actually used; sequential runs always use one.
    pub fn effective_workers(self, workers: usize) -> usize {
        match self {
            Mode::Sequential => 1,
            _ => workers,
        }
    }

    pub fn label(self, workers: usize) -> String {
        match self {
            Mode::Sequential => "Sequential".to_string(),
            Mode::RoundRobin => format!("Concurrent(RR-{workers})"),
            Mode::ConnectedComponents => format!("Concurrent(CC-{workers})"),
        }
    }

    fn distributor(self) -> Box<dyn Distributor> {
        match self {
            Mode::Sequential | Mode::RoundRobin => Box::new(RoundRobin),
            Mode::ConnectedComponents => Box::new(ConnectedComponents),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sequential => "seq",
            Mode::RoundRobin => "rr",
            Mode::ConnectedComponents => "cc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerSummary {
    pub worker: u8,
    pub executed: usize,
    pub not_executed: usize,
    pub ok: usize,
    pub logic_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub executed_in_place: usize,
    pub forwarded: usize,
    pub orphaned: usize,
    pub orphan_ok: usize,
    pub orphan_logic_errors: usize,
    pub workers: Vec<WorkerSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub label: String,
    pub mode: Mode,
    pub workers: usize,
    pub accounts: usize,
    pub transactions: usize,
    pub seed: u64,
    pub latency_us: u64,
    pub authoring_ms: f64,
    pub authoring_tps: f64,
    pub validation_ms: f64,
    pub validation_tps: f64,
    pub state_root: String,
    pub block_bytes: usize,
    pub stats: RunStats,
}

fn tps(n: usize, elapsed: Duration) -> f64 {
    let secs = elapsed.as_secs_f64();
    if n == 0 || secs == 0.0 {
        0.0
    } else {
        n as f64 / secs
    }
}

pub fn run_benchmark(spec: &DatasetSpec, mode: Mode, workers: usize, latency: Duration) -> Result<RunResult, BenchError> {
    let dataset = generate_dataset(spec)?;
    let mut result = run_on_dataset(&dataset, mode, workers, latency)?;
    result.accounts = spec.accounts;
    result.seed = spec.seed;
    Ok(result)
}

/// Authors one block over `dataset`, replays it on a fresh genesis state and
/// checks that both reach the same root.
pub fn run_on_dataset(dataset: &Dataset, mode: Mode, workers: usize, latency: Duration) -> Result<RunResult, BenchError> {
    let workers = mode.effective_workers(workers);
    if !(1..=taintexec::primitives::MAX_WORKERS).contains(&workers) {
        return Err(taintexec::EngineError::InvalidWorkers(workers).into());
    }
    let n = dataset.queue.len();
    let assignment = mode.distributor().distribute(&dataset.queue, workers);

    let mut state = dataset.genesis_state();
    state.set_latency(latency);
    let start = Instant::now();
    let (block, stats) = author_block(&dataset.queue, &assignment, &state, workers, Digest::ZERO, 1)?;
    let authoring = start.elapsed();

    let bytes = block.encode();
    let mut replica = dataset.genesis_state();
    replica.set_latency(latency);
    let (_, report) = validate_encoded(&bytes, &replica)?;
    if !report.valid {
        return Err(BenchError::Nondeterministic { expected: block.header.state_root, computed: report.computed_root });
    }

    Ok(RunResult {
        label: mode.label(workers),
        mode,
        workers,
        accounts: dataset.genesis.len(),
        transactions: n,
        seed: 0,
        latency_us: latency.as_micros() as u64,
        authoring_ms: authoring.as_secs_f64() * 1e3,
        authoring_tps: tps(n, authoring),
        validation_ms: report.elapsed.as_secs_f64() * 1e3,
        validation_tps: tps(n, report.elapsed),
        state_root: block.header.state_root.to_hex(),
        block_bytes: bytes.len(),
        stats: RunStats {
            executed_in_place: stats.executed_in_place,
            forwarded: stats.forwarded,
            orphaned: stats.orphaned,
            orphan_ok: stats.orphan_ok,
            orphan_logic_errors: stats.orphan_logic_errors,
            workers: stats
                .reports
                .iter()
                .map(|r| WorkerSummary {
                    worker: r.worker.0,
                    executed: r.executed,
                    not_executed: r.forwarded_out,
                    ok: r.ok,
                    logic_errors: r.logic_errors,
                })
                .collect(),
        },
    })
}
