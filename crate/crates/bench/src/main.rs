use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use log::{error, info};
use taintexec_bench::{emit_log, run_benchmark, write_csv, write_json, BenchError, DatasetSpec, Mode};

/// Per-access latency that puts sequential authoring near 130 tps.
const DEFAULT_LATENCY_US: u64 = 1850;

const EXIT_USAGE: u8 = 1;
const EXIT_NONDETERMINISM: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistributorArg {
    Seq,
    Rr,
    Cc,
}

impl From<DistributorArg> for Mode {
    fn from(d: DistributorArg) -> Mode {
        match d {
            DistributorArg::Seq => Mode::Sequential,
            DistributorArg::Rr => Mode::RoundRobin,
            DistributorArg::Cc => Mode::ConnectedComponents,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Level {
    Info,
    Debug,
}

/// Authors and validates blocks of random balance transfers.
#[derive(Debug, Parser)]
#[command(name = "bench", version)]
struct Args {
    #[arg(long, default_value_t = 1000)]
    accounts: usize,
    /// Block sizes to run, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000")]
    transactions: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Distributors to run, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "seq,rr,cc")]
    distributor: Vec<DistributorArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulated storage latency per access, in microseconds.
    #[arg(long, default_value_t = DEFAULT_LATENCY_US)]
    latency_us: u64,
    #[arg(long, default_value_t = DatasetSpec::MILLIONAIRE_BALANCE)]
    initial_balance: u128,
    #[arg(long, default_value_t = DatasetSpec::MILLIONAIRE_AMOUNT)]
    amount: u128,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "info")]
    log_level: Level,
}

fn init_logging(level: Level) {
    // At info the engine's own live lines are muted in favour of the ordered
    // summary printed after each run.
    let filter = match level {
        Level::Info => "info,taintexec=warn",
        Level::Debug => "debug",
    };
    env_logger::Builder::new().parse_filters(filter).format_timestamp(None).target(env_logger::Target::Stderr).init();
}

fn run(args: &Args) -> Result<(), BenchError> {
    let mut results = Vec::new();
    for &transactions in &args.transactions {
        let spec = DatasetSpec {
            accounts: args.accounts,
            transactions,
            initial_balance: args.initial_balance,
            transfer_amount: args.amount,
            seed: args.seed,
        };
        for &d in &args.distributor {
            let result = run_benchmark(&spec, d.into(), args.workers, Duration::from_micros(args.latency_us))?;
            info!(
                "{} with {} transactions: authoring {:.1} tps, validation {:.1} tps",
                result.label, transactions, result.authoring_tps, result.validation_tps
            );
            for line in emit_log(&result) {
                info!("{line}");
            }
            results.push(result);
        }
    }

    let out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    match args.format {
        Format::Csv => write_csv(&results, out),
        Format::Json => write_json(&results, out),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(args.log_level);
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ BenchError::Nondeterministic { .. }) => {
            error!("{e}");
            ExitCode::from(EXIT_NONDETERMINISM)
        }
        Err(e @ (BenchError::InvalidSpec(_) | BenchError::Engine(taintexec::EngineError::InvalidWorkers(_)))) => {
            error!("{e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
