//! Block authoring: one master and `W` workers executing a pre-distributed
//! queue over a shared [`TaintState`].
//!
//! Workers first deplete their local queue. A transaction whose first state
//! access hits a foreign taint is delegated to the owning worker; any later
//! conflict makes it an orphan, sent to the master. After its local queue a
//! worker reports `AuthoringReport(executed, not_executed)` and then serves
//! delegated transactions until told to stop. The master counts reports,
//! forward executions and orphans, and stops the collection phase once
//! `Σ executed + forwarded + orphaned == N`. Orphans then run sequentially
//! with taints ignored, and the block is assembled so that every tag's
//! transactions appear in the order that tag's thread ran them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::thread;

use crossbeam_channel::{unbounded, Receiver, Sender};
use log::{debug, info};
use thiserror::Error;

use crate::block::{Header, TaggedBlock};
use crate::distributor::Assignment;
use crate::primitives::{Digest, StateKey, Tag, ThreadId, MAX_WORKERS};
use crate::runtime::{apply_unchecked, dispatch, ApplyOutcome, DispatchOutcome, RuntimeError, Transaction};
use crate::taint_state::TaintState;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid worker count {0}")]
    InvalidWorkers(usize),
    #[error("assignment covers {assigned} transactions, queue has {queued}")]
    AssignmentMismatch { assigned: usize, queued: usize },
    #[error("transaction at position {pos} assigned to worker {worker}, but only {workers} workers run")]
    WorkerOutOfRange { pos: usize, worker: ThreadId, workers: usize },
    #[error("duplicate transaction id {0} in queue")]
    DuplicateTransaction(u64),
    #[error("worker {worker} failed: {source}")]
    Worker { worker: ThreadId, source: RuntimeError },
    #[error("orphan phase failed: {0}")]
    Orphan(RuntimeError),
    #[error("message channel closed unexpectedly")]
    ChannelClosed,
    #[error("worker thread panicked")]
    WorkerPanicked,
    #[error("block assembly invariant violated: {0}")]
    Invariant(String),
}

/// Message payloads exchanged between master and workers.
#[derive(Debug, Clone)]
pub enum Payload {
    /// Delegation of a transaction to the owner of its first key.
    ForwardTx(Transaction, u64),
    OrphanTx(Transaction),
    ForwardExecuted { tx_id: u64, by: ThreadId, seq: u64 },
    /// `(executed in place, not executed in place)` for the local queue.
    AuthoringReport(usize, usize),
    Terminate,
    Failed(RuntimeError),
}

#[derive(Clone)]
pub struct Message {
    pub payload: Payload,
    pub from: ThreadId,
}

impl fmt::Debug for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Message {{ payload: {:?}, from: {} }}", self.payload, self.from.0)
    }
}

/// Per-worker summary of the local-queue phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerReport {
    pub worker: ThreadId,
    pub executed: usize,
    pub forwarded_out: usize,
    pub ok: usize,
    pub logic_errors: usize,
}

/// A delegated transaction that ran on its new host.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardRecord {
    pub tx_id: u64,
    pub by: ThreadId,
    pub seq: u64,
}

/// Evidence captured when the master receives an orphan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrphanRecord {
    pub tx_id: u64,
    pub from: ThreadId,
    /// Owner of each hinted key at receipt, in hint order.
    pub hint_owners: Vec<Option<ThreadId>>,
}

impl OrphanRecord {
    pub fn distinct_owners(&self) -> usize {
        self.hint_owners.iter().flatten().collect::<HashSet<_>>().len()
    }
}

#[derive(Debug, Clone, Default)]
pub struct AuthoringStats {
    pub executed_in_place: usize,
    pub forwarded: usize,
    pub orphaned: usize,
    pub reports: Vec<WorkerReport>,
    /// Forward executions in the order the master received them.
    pub forward_records: Vec<ForwardRecord>,
    pub orphan_records: Vec<OrphanRecord>,
    /// Every ForwardTx sent: `(tx id, from, to)`.
    pub delegations: Vec<(u64, ThreadId, ThreadId)>,
    /// Transactions each worker executed (Ok or LogicError), in execution order.
    pub worker_sequences: BTreeMap<ThreadId, Vec<u64>>,
    pub orphan_ok: usize,
    pub orphan_logic_errors: usize,
}

impl AuthoringStats {
    pub fn total(&self) -> usize {
        self.executed_in_place + self.forwarded + self.orphaned
    }
}

/// Master-side view of the collection phase.
#[derive(Debug, Clone)]
pub struct CollectionProgress {
    pub total: usize,
    /// In-place execution count per worker, once reported.
    pub reports: Vec<Option<usize>>,
    pub forwarded_executed: usize,
    pub orphaned: usize,
}

impl CollectionProgress {
    pub fn new(total: usize, workers: usize) -> Self {
        CollectionProgress { total, reports: vec![None; workers], forwarded_executed: 0, orphaned: 0 }
    }
}

/// True once every worker reported and `Σ r_t + D + O == N`.
pub fn detect_termination(p: &CollectionProgress) -> bool {
    if p.reports.iter().any(Option::is_none) {
        return false;
    }
    let executed: usize = p.reports.iter().flatten().sum();
    executed + p.forwarded_executed + p.orphaned == p.total
}

struct WorkerOutput {
    in_place: Vec<u64>,
    forward_executed: Vec<u64>,
    delegations: Vec<(u64, ThreadId, ThreadId)>,
    ok: usize,
    logic_errors: usize,
}

struct Worker<'a> {
    id: ThreadId,
    state: &'a TaintState,
    inbox: Receiver<Message>,
    peers: Vec<Sender<Message>>,
    master: Sender<Message>,
    seq: u64,
    out: WorkerOutput,
}

impl Worker<'_> {
    fn send(&self, to: &Sender<Message>, payload: Payload) -> Result<(), EngineError> {
        to.send(Message { payload, from: self.id }).map_err(|_| EngineError::ChannelClosed)
    }

    fn next_seq(&mut self) -> u64 {
        let s = self.seq;
        self.seq += 1;
        s
    }

    fn run(mut self, local: Vec<Transaction>) -> Result<WorkerOutput, EngineError> {
        match self.run_inner(local) {
            Err(EngineError::Worker { worker, source }) => {
                // Unblock the master; it tears everything down.
                let _ = self.send(&self.master, Payload::Failed(source.clone()));
                Err(EngineError::Worker { worker, source })
            }
            other => other.map(|()| self.out),
        }
    }

    fn exec(&self, tx: &Transaction) -> Result<DispatchOutcome, EngineError> {
        dispatch(tx, self.state, self.id).map_err(|source| EngineError::Worker { worker: self.id, source })
    }

    fn run_inner(&mut self, local: Vec<Transaction>) -> Result<(), EngineError> {
        let (mut executed, mut not_executed) = (0, 0);
        for mut tx in local {
            match self.exec(&tx)? {
                DispatchOutcome::Ok => {
                    executed += 1;
                    self.out.ok += 1;
                    self.out.in_place.push(tx.id);
                }
                DispatchOutcome::LogicError(_) => {
                    executed += 1;
                    self.out.logic_errors += 1;
                    self.out.in_place.push(tx.id);
                }
                DispatchOutcome::TaintConflict { owner, first_access: true } => {
                    not_executed += 1;
                    assert!(!tx.forwarded, "transaction {} forwarded twice", tx.id);
                    tx.forwarded = true;
                    debug!("[Worker#{}] forwarding tx {} to worker {}", self.id, tx.id, owner);
                    self.out.delegations.push((tx.id, self.id, owner));
                    let seq = self.next_seq();
                    let peer = self.peers[owner.index()].clone();
                    self.send(&peer, Payload::ForwardTx(tx, seq))?;
                }
                DispatchOutcome::TaintConflict { first_access: false, .. } => {
                    not_executed += 1;
                    debug!("[Worker#{}] orphaning tx {}", self.id, tx.id);
                    self.send(&self.master, Payload::OrphanTx(tx))?;
                }
            }
        }

        let report = Message { payload: Payload::AuthoringReport(executed, not_executed), from: self.id };
        info!(
            "[Worker#{}] - Sending report {:?}. From {} executed, {} were ok and {} were logic error.",
            self.id, report, executed, self.out.ok, self.out.logic_errors
        );
        self.master.send(report).map_err(|_| EngineError::ChannelClosed)?;

        loop {
            let msg = self.inbox.recv().map_err(|_| EngineError::ChannelClosed)?;
            match msg.payload {
                Payload::ForwardTx(tx, _) => match self.exec(&tx)? {
                    DispatchOutcome::Ok | DispatchOutcome::LogicError(_) => {
                        self.out.forward_executed.push(tx.id);
                        let seq = self.next_seq();
                        self.send(&self.master, Payload::ForwardExecuted { tx_id: tx.id, by: self.id, seq })?;
                    }
                    DispatchOutcome::TaintConflict { .. } => {
                        debug!("[Worker#{}] delegated tx {} conflicts again, orphaning", self.id, tx.id);
                        self.send(&self.master, Payload::OrphanTx(tx))?;
                    }
                },
                Payload::Terminate => return Ok(()),
                other => unreachable!("worker received {other:?}"),
            }
        }
    }
}

fn validate_inputs(queue: &[Transaction], assignment: &Assignment, workers: usize) -> Result<(), EngineError> {
    if !(1..=MAX_WORKERS).contains(&workers) {
        return Err(EngineError::InvalidWorkers(workers));
    }
    if assignment.len() != queue.len() {
        return Err(EngineError::AssignmentMismatch { assigned: assignment.len(), queued: queue.len() });
    }
    for (pos, w) in assignment.as_slice().iter().enumerate() {
        if w.index() >= workers {
            return Err(EngineError::WorkerOutOfRange { pos, worker: *w, workers });
        }
    }
    let mut seen = HashSet::with_capacity(queue.len());
    for tx in queue {
        if !seen.insert(tx.id) {
            return Err(EngineError::DuplicateTransaction(tx.id));
        }
    }
    Ok(())
}

/// Authors a block from `queue`, executing it on `workers` threads over
/// `state`. The caller clears taints beforehand.
pub fn author_block(
    queue: &[Transaction],
    assignment: &Assignment,
    state: &TaintState,
    workers: usize,
    parent: Digest,
    number: u64,
) -> Result<(TaggedBlock, AuthoringStats), EngineError> {
    validate_inputs(queue, assignment, workers)?;

    let mut local: Vec<Vec<Transaction>> = vec![Vec::new(); workers];
    for (pos, tx) in queue.iter().enumerate() {
        let mut tx = tx.clone();
        tx.forwarded = false;
        local[assignment.worker_at(pos).index()].push(tx);
    }

    let (master_tx, master_rx) = unbounded::<Message>();
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..workers).map(|_| unbounded::<Message>()).unzip();

    let mut stats = AuthoringStats::default();
    let mut orphans: Vec<Transaction> = Vec::new();

    let collected = thread::scope(|scope| {
        let handles: Vec<_> = receivers
            .into_iter()
            .zip(local)
            .enumerate()
            .map(|(w, (inbox, txs))| {
                let worker = Worker {
                    id: ThreadId(w as u8),
                    state,
                    inbox,
                    peers: senders.clone(),
                    master: master_tx.clone(),
                    seq: 0,
                    out: WorkerOutput {
                        in_place: Vec::new(),
                        forward_executed: Vec::new(),
                        delegations: Vec::new(),
                        ok: 0,
                        logic_errors: 0,
                    },
                };
                thread::Builder::new()
                    .name(format!("worker-{w}"))
                    .spawn_scoped(scope, move || worker.run(txs))
                    .expect("spawn worker thread")
            })
            .collect();
        // Workers hold the remaining master senders; if they all die, recv fails.
        drop(master_tx);

        let collection = collect(&master_rx, state, queue.len(), workers, &mut stats, &mut orphans);

        for s in &senders {
            // A worker that already exited has dropped its inbox.
            let _ = s.send(Message { payload: Payload::Terminate, from: ThreadId::MASTER });
        }

        let mut outputs = Vec::with_capacity(workers);
        let mut worker_err = None;
        for h in handles {
            match h.join() {
                Ok(Ok(out)) => outputs.push(out),
                Ok(Err(e)) => {
                    worker_err.get_or_insert(e);
                }
                Err(_) => {
                    worker_err.get_or_insert(EngineError::WorkerPanicked);
                }
            }
        }
        match (collection, worker_err) {
            (Err(e @ EngineError::Worker { .. }), _) => Err(e),
            (_, Some(e)) => Err(e),
            (Err(e), None) => Err(e),
            (Ok(()), None) => Ok(outputs),
        }
    })?;

    for (w, out) in collected.into_iter().enumerate() {
        let id = ThreadId(w as u8);
        let mut seq = out.in_place;
        seq.extend(out.forward_executed);
        stats.worker_sequences.insert(id, seq);
        stats.delegations.extend(out.delegations);
        let report = stats.reports.iter_mut().find(|r| r.worker == id).expect("every worker reported");
        report.ok = out.ok;
        report.logic_errors = out.logic_errors;
    }
    stats.reports.sort_by_key(|r| r.worker);

    info!(
        "[Master  ] - Finishing Collection phase with [{} executed][{} forwarded][{} orphaned]",
        stats.executed_in_place, stats.forwarded, stats.orphaned
    );

    // Orphan phase: all workers joined, taints no longer matter.
    for tx in &orphans {
        match apply_unchecked(tx, state).map_err(EngineError::Orphan)? {
            ApplyOutcome::Ok => stats.orphan_ok += 1,
            ApplyOutcome::LogicError(_) => stats.orphan_logic_errors += 1,
        }
    }

    let orphan_ids: Vec<u64> = orphans.iter().map(|tx| tx.id).collect();
    let header = Header { parent_hash: parent, number, state_root: state.state_root() };
    let block = assemble_block(queue, assignment, &stats.forward_records, &orphan_ids, header)?;
    Ok((block, stats))
}

fn collect(
    inbox: &Receiver<Message>,
    state: &TaintState,
    total: usize,
    workers: usize,
    stats: &mut AuthoringStats,
    orphans: &mut Vec<Transaction>,
) -> Result<(), EngineError> {
    let mut progress = CollectionProgress::new(total, workers);
    while !detect_termination(&progress) {
        let msg = inbox.recv().map_err(|_| EngineError::ChannelClosed)?;
        match msg.payload {
            Payload::AuthoringReport(executed, forwarded_out) => {
                debug_assert!(progress.reports[msg.from.index()].is_none(), "worker {} reported twice", msg.from);
                progress.reports[msg.from.index()] = Some(executed);
                stats.executed_in_place += executed;
                stats.reports.push(WorkerReport { worker: msg.from, executed, forwarded_out, ok: 0, logic_errors: 0 });
            }
            Payload::ForwardExecuted { tx_id, by, seq } => {
                progress.forwarded_executed += 1;
                stats.forwarded += 1;
                stats.forward_records.push(ForwardRecord { tx_id, by, seq });
            }
            Payload::OrphanTx(tx) => {
                progress.orphaned += 1;
                stats.orphaned += 1;
                let hint_owners = tx.access_hints().0.iter().map(|k: &StateKey| state.taint_of(k)).collect();
                stats.orphan_records.push(OrphanRecord { tx_id: tx.id, from: msg.from, hint_owners });
                orphans.push(tx);
            }
            Payload::Failed(source) => return Err(EngineError::Worker { worker: msg.from, source }),
            other => unreachable!("master received {other:?}"),
        }
    }
    Ok(())
}

/// Orders the authored transactions into a block body.
///
/// For each worker tag in ascending order: its in-place transactions in queue
/// order, then the transactions delegated to it in its `seq` order. Orphans
/// follow in the order the master executed them.
pub fn assemble_block(
    queue: &[Transaction],
    assignment: &Assignment,
    forwarded: &[ForwardRecord],
    orphans: &[u64],
    header: Header,
) -> Result<TaggedBlock, EngineError> {
    let position: HashMap<u64, usize> = queue.iter().enumerate().map(|(p, tx)| (tx.id, p)).collect();
    let lookup = |id: u64| position.get(&id).copied().ok_or_else(|| EngineError::Invariant(format!("unknown transaction {id}")));

    let mut moved = vec![false; queue.len()];
    let mut mark = |pos: usize| {
        if std::mem::replace(&mut moved[pos], true) {
            Err(EngineError::Invariant(format!("transaction {} finalized twice", queue[pos].id)))
        } else {
            Ok(())
        }
    };
    let mut delegated: BTreeMap<ThreadId, Vec<(u64, usize)>> = BTreeMap::new();
    for rec in forwarded {
        let pos = lookup(rec.tx_id)?;
        mark(pos)?;
        delegated.entry(rec.by).or_default().push((rec.seq, pos));
    }
    let mut orphan_positions = Vec::with_capacity(orphans.len());
    for &id in orphans {
        let pos = lookup(id)?;
        mark(pos)?;
        orphan_positions.push(pos);
    }

    let mut in_place: BTreeMap<ThreadId, Vec<usize>> = BTreeMap::new();
    for pos in 0..queue.len() {
        if !moved[pos] {
            in_place.entry(assignment.worker_at(pos)).or_default().push(pos);
        }
    }

    let mut tags: Vec<ThreadId> = in_place.keys().chain(delegated.keys()).copied().collect();
    tags.sort_unstable();
    tags.dedup();

    let mut body = Vec::with_capacity(queue.len());
    for w in tags {
        for &pos in in_place.get(&w).map(Vec::as_slice).unwrap_or_default() {
            body.push((Tag::Worker(w), queue[pos].clone()));
        }
        if let Some(list) = delegated.get_mut(&w) {
            list.sort_unstable_by_key(|&(seq, _)| seq);
            for &(_, pos) in list.iter() {
                body.push((Tag::Worker(w), queue[pos].clone()));
            }
        }
    }
    for pos in orphan_positions {
        body.push((Tag::Orphan, queue[pos].clone()));
    }
    for (_, tx) in &mut body {
        tx.forwarded = false;
    }
    debug_assert_eq!(body.len(), queue.len());
    Ok(TaggedBlock { header, body })
}
