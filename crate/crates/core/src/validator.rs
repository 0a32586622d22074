//! Block validation by tag-parallel replay.
//!
//! One thread per worker tag runs that tag's transactions in block order with
//! taints active, so each access behaves exactly as it did for the author.
//! Honest blocks never conflict across tags; a conflict means the block is
//! malformed. Orphans run afterwards, sequentially, ignoring taints.

use std::collections::BTreeMap;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::block::TaggedBlock;
use crate::primitives::{CodecError, Decode, Digest, Tag, ThreadId};
use crate::runtime::{apply_unchecked, dispatch, DispatchOutcome, RuntimeError};
use crate::taint_state::TaintState;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("undecodable block: {0}")]
    Decode(#[from] CodecError),
    #[error("malformed block: transaction {tx_id} tagged {tag} conflicts with thread {owner}")]
    CrossTagConflict { tx_id: u64, tag: ThreadId, owner: ThreadId },
    #[error("execution failed: {0}")]
    Runtime(#[from] RuntimeError),
    #[error("validation thread panicked")]
    Panicked,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub computed_root: Digest,
    pub valid: bool,
    pub elapsed: Duration,
    /// Transaction ids each tag thread executed, in order.
    pub tag_sequences: BTreeMap<ThreadId, Vec<u64>>,
}

/// Replays `block` on `state`, which must hold the author's pre-block state
/// with taints cleared.
pub fn validate_block(block: &TaggedBlock, state: &TaintState) -> Result<ValidationReport, ValidationError> {
    let start = Instant::now();
    let mut report = replay(block, state)?;
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Decodes and validates an encoded block; `elapsed` includes decoding.
pub fn validate_encoded(bytes: &[u8], state: &TaintState) -> Result<(TaggedBlock, ValidationReport), ValidationError> {
    let start = Instant::now();
    let block = TaggedBlock::decode(bytes)?;
    let mut report = replay(&block, state)?;
    report.elapsed = start.elapsed();
    Ok((block, report))
}

fn replay(block: &TaggedBlock, state: &TaintState) -> Result<ValidationReport, ValidationError> {
    let mut groups: BTreeMap<ThreadId, Vec<&_>> = BTreeMap::new();
    let mut orphans = Vec::new();
    for (tag, tx) in &block.body {
        match tag {
            Tag::Worker(t) => groups.entry(*t).or_default().push(tx),
            Tag::Orphan => orphans.push(tx),
        }
    }

    let results: Vec<Result<(ThreadId, Vec<u64>), ValidationError>> = thread::scope(|scope| {
        let handles: Vec<_> = groups
            .iter()
            .map(|(&tag, txs)| {
                scope.spawn(move || {
                    let mut executed = Vec::with_capacity(txs.len());
                    for tx in txs {
                        match dispatch(tx, state, tag)? {
                            DispatchOutcome::Ok | DispatchOutcome::LogicError(_) => executed.push(tx.id),
                            DispatchOutcome::TaintConflict { owner, .. } => {
                                return Err(ValidationError::CrossTagConflict { tx_id: tx.id, tag, owner });
                            }
                        }
                    }
                    Ok((tag, executed))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or(Err(ValidationError::Panicked))).collect()
    });

    let mut tag_sequences = BTreeMap::new();
    for r in results {
        let (tag, seq) = r?;
        tag_sequences.insert(tag, seq);
    }

    for tx in orphans {
        apply_unchecked(tx, state)?;
    }

    let computed_root = state.state_root();
    Ok(ValidationReport {
        computed_root,
        valid: computed_root == block.header.state_root,
        elapsed: Duration::ZERO,
        tag_sequences,
    })
}
