//! End-to-end authoring and replay properties.

use std::collections::HashSet;
use std::time::Duration;

use proptest::prelude::*;
use taintexec::executor::assemble_block;
use taintexec::primitives::Encode;
use taintexec::runtime::balances::{balance_key, AccountBalance, BALANCE_OF};
use taintexec::runtime::{apply_unchecked, dispatch_traced};
use taintexec::{
    author_block, validate_encoded, AccountId, Assignment, ConnectedComponents, Digest, Distributor, RoundRobin, Tag,
    TaintState, ThreadId, Transaction,
};

fn acct(i: u64) -> AccountId {
    AccountId::from_index(i)
}

fn genesis(accounts: u64, balance: u128) -> TaintState {
    let s = TaintState::new();
    for i in 0..accounts {
        BALANCE_OF.insert_unchecked(&s, &acct(i), &AccountBalance::free(balance));
    }
    s
}

fn issuance(state: &TaintState, accounts: u64) -> u128 {
    (0..accounts).map(|i| BALANCE_OF.peek(state, &acct(i)).unwrap().free).sum()
}

fn queue_strategy(accounts: u64) -> impl Strategy<Value = Vec<Transaction>> {
    prop::collection::vec((0..accounts, 1..accounts, 1u128..40), 0..120).prop_map(move |v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (o, off, amt))| Transaction::transfer(i as u64, acct(o), acct((o + off) % accounts), amt))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn authored_blocks_replay_and_conserve(
        queue in queue_strategy(12),
        workers in 1usize..6,
        cc in any::<bool>(),
        balance in 0u128..100,
    ) {
        let assignment = if cc { ConnectedComponents.distribute(&queue, workers) } else { RoundRobin.distribute(&queue, workers) };
        let state = genesis(12, balance).with_latency(Duration::from_micros(5));
        let before = issuance(&state, 12);
        let (block, stats) = author_block(&queue, &assignment, &state, workers, Digest::ZERO, 1).unwrap();

        prop_assert_eq!(stats.total(), queue.len());
        prop_assert_eq!(block.body.len(), queue.len());
        prop_assert_eq!(issuance(&state, 12), before);
        prop_assert_eq!(block.header.state_root, state.state_root());

        let ids: HashSet<u64> = block.body.iter().map(|(_, tx)| tx.id).collect();
        prop_assert_eq!(ids.len(), queue.len());

        let mut delegated = HashSet::new();
        for (id, from, to) in &stats.delegations {
            prop_assert!(delegated.insert(*id));
            prop_assert_ne!(from, to);
        }
        for o in &stats.orphan_records {
            prop_assert!(o.distinct_owners() >= 2);
        }
        if cc {
            prop_assert_eq!(stats.forwarded + stats.orphaned, 0);
        }

        let replica = genesis(12, balance);
        let (decoded, report) = validate_encoded(&block.encode(), &replica).unwrap();
        prop_assert_eq!(&decoded, &block);
        prop_assert!(report.valid);
        let busy: std::collections::BTreeMap<_, _> =
            stats.worker_sequences.iter().filter(|(_, s)| !s.is_empty()).map(|(t, s)| (*t, s.clone())).collect();
        prop_assert_eq!(&report.tag_sequences, &busy);
    }

    #[test]
    fn single_worker_matches_sequential_oracle(queue in queue_strategy(6), balance in 0u128..60) {
        let state = genesis(6, balance);
        let (block, stats) = author_block(&queue, &RoundRobin.distribute(&queue, 1), &state, 1, Digest::ZERO, 1).unwrap();
        prop_assert_eq!(stats.executed_in_place, queue.len());

        let oracle = genesis(6, balance);
        for tx in &queue {
            apply_unchecked(tx, &oracle).unwrap();
        }
        prop_assert_eq!(block.header.state_root, oracle.state_root());
        let order: Vec<u64> = block.body.iter().map(|(_, t)| t.id).collect();
        prop_assert_eq!(order, queue.iter().map(|t| t.id).collect::<Vec<_>>());

        let again = genesis(6, balance);
        let (_, stats2) = author_block(&queue, &RoundRobin.distribute(&queue, 1), &again, 1, Digest::ZERO, 1).unwrap();
        prop_assert_eq!(stats.worker_sequences, stats2.worker_sequences);
        prop_assert_eq!(stats.reports, stats2.reports);
    }

    #[test]
    fn exact_hints_cover_every_access(o in 0u64..8, off in 1u64..8, amt in 0u128..50, bal in 0u128..50) {
        let tx = Transaction::transfer(0, acct(o), acct((o + off) % 8), amt);
        let state = genesis(8, bal);
        let (_, touched) = dispatch_traced(&tx, &state, ThreadId(0)).unwrap();
        let hints: HashSet<_> = tx.access_hints().0.into_iter().collect();
        for key in touched {
            prop_assert!(hints.contains(&key));
        }
    }
}

#[test]
fn three_thread_orphan_scenario() {
    let (a, b) = (acct(0), acct(1));
    let state = genesis(2, 100);
    state.acquire(&balance_key(&a), ThreadId(1)).unwrap();
    state.acquire(&balance_key(&b), ThreadId(2)).unwrap();
    let queue = vec![Transaction::transfer(7, a, b, 10)];
    let (block, stats) = author_block(&queue, &Assignment::new(vec![ThreadId(0)]), &state, 3, Digest::ZERO, 1).unwrap();
    assert_eq!(stats.delegations, vec![(7, ThreadId(0), ThreadId(1))]);
    assert_eq!((stats.executed_in_place, stats.forwarded, stats.orphaned), (0, 0, 1));
    assert_eq!(block.body[0].0, Tag::Orphan);
    assert_eq!(BALANCE_OF.peek(&state, &b).unwrap().free, 110);
}

#[test]
fn conflicting_queue_forwards_to_owner() {
    // Worker 0 credits account 9 first; worker 1's later debit of 9 is delegated
    // to worker 0 on its first access.
    let queue = vec![Transaction::transfer(0, acct(1), acct(9), 5), Transaction::transfer(1, acct(9), acct(2), 5)];
    let state = genesis(10, 100);
    state.acquire(&balance_key(&acct(9)), ThreadId(0)).unwrap();
    let (block, stats) = author_block(&queue, &RoundRobin.distribute(&queue, 2), &state, 2, Digest::ZERO, 1).unwrap();
    assert_eq!(stats.delegations, vec![(1, ThreadId(1), ThreadId(0))]);
    assert_eq!(stats.forwarded, 1);
    assert!(block.body.iter().all(|(t, _)| *t == Tag::Worker(ThreadId(0))));
}

#[test]
fn assembly_rejects_double_finalization() {
    let queue = vec![Transaction::transfer(0, acct(0), acct(1), 1)];
    let header = taintexec::Header { parent_hash: Digest::ZERO, number: 1, state_root: Digest::ZERO };
    let assignment = Assignment::new(vec![ThreadId(0)]);
    let forwarded = vec![taintexec::executor::ForwardRecord { tx_id: 0, by: ThreadId(0), seq: 0 }];
    assert!(assemble_block(&queue, &assignment, &forwarded, &[0], header).is_err());
}
