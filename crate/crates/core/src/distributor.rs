//! Initial assignment of queued transactions to worker threads.

use std::collections::HashMap;

use crate::primitives::{StateKey, ThreadId, MAX_WORKERS};
use crate::runtime::Transaction;

/// Proposed worker for each queue position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment(Vec<ThreadId>);

impl Assignment {
    pub fn new(workers: Vec<ThreadId>) -> Self {
        Assignment(workers)
    }

    /// Worker proposed for the transaction at queue position `pos`.
    pub fn worker_at(&self, pos: usize) -> ThreadId {
        self.0[pos]
    }

    pub fn as_slice(&self) -> &[ThreadId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Transactions per worker, indexed by worker id.
    pub fn load(&self, workers: usize) -> Vec<usize> {
        let mut load = vec![0; workers];
        for t in &self.0 {
            load[t.index()] += 1;
        }
        load
    }
}

/// Strategy tagging each transaction with a worker id.
pub trait Distributor {
    fn name(&self) -> &'static str;

    /// # Panics
    ///
    /// Implementations panic if `workers` is 0 or exceeds [`MAX_WORKERS`].
    fn distribute(&self, queue: &[Transaction], workers: usize) -> Assignment;
}

fn check_workers(workers: usize) {
    assert!((1..=MAX_WORKERS).contains(&workers), "worker count must be in 1..={MAX_WORKERS}, got {workers}");
}

/// Position `i` goes to worker `i mod W`; hints are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct RoundRobin;

impl Distributor for RoundRobin {
    fn name(&self) -> &'static str {
        "round-robin"
    }

    fn distribute(&self, queue: &[Transaction], workers: usize) -> Assignment {
        check_workers(workers);
        Assignment((0..queue.len()).map(|i| ThreadId((i % workers) as u8)).collect())
    }
}

/// Groups transactions whose access hints overlap into connected components
/// and spreads whole components over the workers.
///
/// Components are placed largest first (ties: smallest contained tx id), each
/// on the currently least loaded worker (ties: lowest worker id).
#[derive(Debug, Clone, Copy, Default)]
pub struct ConnectedComponents;

impl Distributor for ConnectedComponents {
    fn name(&self) -> &'static str {
        "connected-components"
    }

    fn distribute(&self, queue: &[Transaction], workers: usize) -> Assignment {
        check_workers(workers);
        let hints: Vec<Vec<StateKey>> = queue.iter().map(|tx| tx.access_hints().0).collect();
        let mut comps = components(&hints);
        comps.sort_by_key(|c| (std::cmp::Reverse(c.len()), c.iter().map(|&p| queue[p].id).min()));

        let mut load = vec![0usize; workers];
        let mut out = vec![ThreadId(0); queue.len()];
        for comp in comps {
            let (w, _) = load.iter().enumerate().min_by_key(|&(w, l)| (*l, w)).expect("workers >= 1");
            load[w] += comp.len();
            for pos in comp {
                out[pos] = ThreadId(w as u8);
            }
        }
        Assignment(out)
    }
}

/// Partition of queue positions into components of the bipartite
/// transaction/key graph. Each component lists positions in ascending order;
/// components are ordered by their first position.
pub fn components(hints: &[Vec<StateKey>]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(hints.len());
    let mut first_toucher: HashMap<&StateKey, usize> = HashMap::new();
    for (pos, keys) in hints.iter().enumerate() {
        for key in keys {
            match first_toucher.get(key) {
                Some(&other) => uf.union(pos, other),
                None => {
                    first_toucher.insert(key, pos);
                }
            }
        }
    }

    let mut index_of_root: HashMap<usize, usize> = HashMap::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for pos in 0..hints.len() {
        let root = uf.find(pos);
        let idx = *index_of_root.entry(root).or_insert_with(|| {
            out.push(Vec::new());
            out.len() - 1
        });
        out[idx].push(pos);
    }
    out
}

/// Union by size with path halving.
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::AccountId;

    fn acct(i: u64) -> AccountId {
        AccountId::from_index(i)
    }

    fn tx(id: u64, o: u64, d: u64) -> Transaction {
        Transaction::transfer(id, acct(o), acct(d), 1)
    }

    fn ids(a: &Assignment) -> Vec<u8> {
        a.as_slice().iter().map(|t| t.0).collect()
    }

    #[test]
    fn round_robin_cycles() {
        let q: Vec<_> = (0..5).map(|i| tx(i, i, i + 100)).collect();
        assert_eq!(ids(&RoundRobin.distribute(&q, 2)), vec![0, 1, 0, 1, 0]);
        assert_eq!(ids(&RoundRobin.distribute(&q, 1)), vec![0; 5]);
        assert!(RoundRobin.distribute(&[], 3).is_empty());
    }

    #[test]
    #[should_panic]
    fn zero_workers_rejected() {
        RoundRobin.distribute(&[], 0);
    }

    #[test]
    fn overlapping_hints_share_a_worker() {
        // tx0 {A,B}, tx1 {B,C}, tx2 {D,E}
        let q = vec![tx(0, 0, 1), tx(1, 1, 2), tx(2, 3, 4)];
        let a = ConnectedComponents.distribute(&q, 2);
        assert_eq!(a.worker_at(0), a.worker_at(1));
        assert_ne!(a.worker_at(0), a.worker_at(2));
        // The larger component is placed first, on worker 0.
        assert_eq!(ids(&a), vec![0, 0, 1]);
    }

    #[test]
    fn shared_key_means_one_worker() {
        let q: Vec<_> = (0..40).map(|i| tx(i, 7, 1000 + i)).collect();
        let a = ConnectedComponents.distribute(&q, 4);
        assert_eq!(a.load(4), vec![40, 0, 0, 0]);
    }

    #[test]
    fn disjoint_hints_balance_evenly() {
        let q: Vec<_> = (0..23).map(|i| tx(i, 2 * i, 2 * i + 1)).collect();
        let load = ConnectedComponents.distribute(&q, 4).load(4);
        assert_eq!(load, vec![6, 6, 6, 5]);
    }

    #[test]
    fn components_are_ordered_and_sorted() {
        let q = [tx(0, 0, 1), tx(1, 5, 6), tx(2, 1, 2), tx(3, 6, 9)];
        let hints: Vec<_> = q.iter().map(|t| t.access_hints().0).collect();
        assert_eq!(components(&hints), vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn deterministic() {
        let q: Vec<_> = (0..200).map(|i| tx(i, (i * 7) % 50, (i * 13 + 1) % 50)).collect();
        assert_eq!(ConnectedComponents.distribute(&q, 4), ConnectedComponents.distribute(&q, 4));
    }
}
