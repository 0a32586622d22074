//! Result tables and execution logs.

use std::io::Write;

use taintexec::executor::{Message, Payload};
use taintexec::ThreadId;

use crate::harness::RunResult;
use crate::BenchError;

pub const CSV_HEADER: [&str; 7] =
    ["type", "members", "transactions", "authoring_ms", "authoring_tps", "validation_ms", "validation_tps"];

/// One row per result under [`CSV_HEADER`]; an empty slice still writes the
/// header.
pub fn write_csv<W: Write>(results: &[RunResult], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.write_record([
            r.label.clone(),
            r.workers.to_string(),
            r.transactions.to_string(),
            format!("{:.3}", r.authoring_ms),
            format!("{:.2}", r.authoring_tps),
            format!("{:.3}", r.validation_ms),
            format!("{:.2}", r.validation_tps),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(results: &[RunResult], mut out: W) -> Result<(), BenchError> {
    serde_json::to_writer_pretty(&mut out, results)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Worker report lines followed by the master's collection summary, in
/// worker order.
pub fn emit_log(result: &RunResult) -> Vec<String> {
    let mut lines: Vec<String> = result
        .stats
        .workers
        .iter()
        .map(|w| {
            let msg = Message { payload: Payload::AuthoringReport(w.executed, w.not_executed), from: ThreadId(w.worker) };
            format!(
                "[Worker#{}] - Sending report {:?}. From {} executed, {} were ok and {} were logic error.",
                w.worker, msg, w.executed, w.ok, w.logic_errors
            )
        })
        .collect();
    lines.push(format!(
        "[Master  ] - Finishing Collection phase with [{} executed][{} forwarded][{} orphaned]",
        result.stats.executed_in_place, result.stats.forwarded, result.stats.orphaned
    ));
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Mode, RunStats, WorkerSummary};

    fn sample() -> RunResult {
        RunResult {
            label: "Concurrent(RR-4)".into(),
            mode: Mode::RoundRobin,
            workers: 4,
            accounts: 1000,
            transactions: 250,
            seed: 1,
            latency_us: 0,
            authoring_ms: 12.5,
            authoring_tps: 20000.0,
            validation_ms: 10.0,
            validation_tps: 25000.0,
            state_root: "00".into(),
            block_bytes: 10,
            stats: RunStats {
                executed_in_place: 179,
                forwarded: 32,
                orphaned: 39,
                orphan_ok: 39,
                orphan_logic_errors: 0,
                workers: vec![WorkerSummary { worker: 0, executed: 42, not_executed: 20, ok: 42, logic_errors: 0 }],
            },
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn csv_row() {
        let mut buf = Vec::new();
        write_csv(&[sample()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "Concurrent(RR-4),4,250,12.500,20000.00,10.000,25000.00");
    }

    #[test]
    fn json_round_trip() {
        let mut buf = Vec::new();
        write_json(&[sample()], &mut buf).unwrap();
        let back: Vec<RunResult> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, vec![sample()]);
    }

    #[test]
    fn log_lines() {
        let lines = emit_log(&sample());
        assert_eq!(
            lines[0],
            "[Worker#0] - Sending report Message { payload: AuthoringReport(42, 20), from: 0 }. \
             From 42 executed, 42 were ok and 0 were logic error."
        );
        assert_eq!(lines[1], "[Master  ] - Finishing Collection phase with [179 executed][32 forwarded][39 orphaned]");
    }
}
