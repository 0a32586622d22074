//! The taintable state store.
//!
//! Every key carries an optional taint naming the worker that first touched
//! it. The owner's accesses always succeed, any other worker's access fails
//! immediately with the owner's id, and nothing ever waits on another thread
//! except while a first-time taint is being installed.
//!
//! Locking follows two rules: taints are only installed while holding the map
//! exclusively, and entry data is only touched under the shared lock after the
//! taint check passed. Entry data sits behind its own mutex, which the owning
//! thread is the only one to contend on.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use parking_lot::{Mutex, RwLock};
use thiserror::Error;

use crate::primitives::{hash, CodecError, Digest, StateKey, ThreadId};

/// Encoded value bytes as stored in the state.
pub type Value = Vec<u8>;

/// Access denied because another thread owns the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("key tainted by thread {owner}")]
pub struct TaintError {
    pub owner: ThreadId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error(transparent)]
    Taint(#[from] TaintError),
    #[error("corrupt state value: {0}")]
    Corrupt(#[from] CodecError),
}

#[derive(Debug)]
struct StateEntry {
    taint: Option<ThreadId>,
    /// `None` is the absent marker left by a tainting read of a missing key.
    data: Mutex<Option<Value>>,
}

impl StateEntry {
    fn new(data: Option<Value>) -> Self {
        StateEntry { taint: None, data: Mutex::new(data) }
    }
}

/// Result of taint acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acquired {
    /// This call installed the taint.
    Installed,
    /// The caller already owned the key.
    Owned,
}

#[derive(Debug, Default)]
pub struct TaintState {
    backend: RwLock<HashMap<StateKey, StateEntry>>,
    latency: Duration,
    in_flight: AtomicUsize,
}

struct InFlight<'a>(&'a AtomicUsize);

impl<'a> InFlight<'a> {
    fn enter(counter: &'a AtomicUsize) -> Self {
        counter.fetch_add(1, Ordering::AcqRel);
        InFlight(counter)
    }
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::AcqRel);
    }
}

impl TaintState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an untainted state holding `pairs`.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (StateKey, Value)>) -> Self {
        let backend = pairs.into_iter().map(|(k, v)| (k, StateEntry::new(Some(v)))).collect();
        TaintState { backend: RwLock::new(backend), ..Default::default() }
    }

    /// Sets the artificial storage latency slept on every read and write.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn set_latency(&mut self, latency: Duration) {
        self.latency = latency;
    }

    pub fn latency(&self) -> Duration {
        self.latency
    }

    fn simulate_io(&self) {
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
    }

    /// Installs `current`'s taint on `key` unless another thread owns it.
    /// Missing keys are inserted with the absent marker.
    pub fn acquire(&self, key: &StateKey, current: ThreadId) -> Result<Acquired, TaintError> {
        debug_assert_ne!(current, ThreadId::MASTER, "master never takes taints");
        {
            let map = self.backend.read();
            if let Some(owner) = map.get(key).and_then(|e| e.taint) {
                return if owner == current { Ok(Acquired::Owned) } else { Err(TaintError { owner }) };
            }
        }
        let mut map = self.backend.write();
        let entry = map.entry(key.clone()).or_insert_with(|| StateEntry::new(None));
        match entry.taint {
            Some(owner) if owner == current => Ok(Acquired::Owned),
            Some(owner) => Err(TaintError { owner }),
            None => {
                entry.taint = Some(current);
                Ok(Acquired::Installed)
            }
        }
    }

    fn with_owned_data<R>(&self, key: &StateKey, f: impl FnOnce(&mut Option<Value>) -> R) -> R {
        let map = self.backend.read();
        let entry = map.get(key).expect("acquired key has an entry");
        let mut data = entry.data.lock();
        f(&mut data)
    }

    /// Reads `key` as `current`, tainting it on first access. `Ok(None)`
    /// means the key holds no value.
    pub fn read(&self, key: &StateKey, current: ThreadId) -> Result<Option<Value>, TaintError> {
        let _guard = InFlight::enter(&self.in_flight);
        self.simulate_io();
        self.acquire(key, current)?;
        Ok(self.with_owned_data(key, |d| d.clone()))
    }

    pub fn write(&self, key: &StateKey, value: Value, current: ThreadId) -> Result<(), TaintError> {
        let _guard = InFlight::enter(&self.in_flight);
        self.simulate_io();
        self.acquire(key, current)?;
        self.with_owned_data(key, |d| *d = Some(value));
        Ok(())
    }

    /// Read-modify-write of `key` as `current`, atomic with respect to other
    /// threads. `update` sees the current bytes (or `None`) and returns the
    /// new bytes; a decode failure inside it leaves the value untouched.
    pub fn mutate<F>(&self, key: &StateKey, current: ThreadId, update: F) -> Result<(), StateError>
    where
        F: FnOnce(Option<&[u8]>) -> Result<Value, CodecError>,
    {
        let _guard = InFlight::enter(&self.in_flight);
        // A mutate is one read plus one write against storage.
        self.simulate_io();
        self.simulate_io();
        self.acquire(key, current)?;
        self.with_owned_data(key, |d| {
            let next = update(d.as_deref())?;
            *d = Some(next);
            Ok(())
        })
    }

    /// Puts back a value overwritten earlier in the same attempt. With
    /// `owner` set, only legal on keys that thread owns; with `None`, only
    /// while no worker runs.
    pub(crate) fn restore(&self, key: &StateKey, value: Option<Value>, owner: Option<ThreadId>) {
        let map = self.backend.read();
        let entry = map.get(key).expect("restored key has an entry");
        if owner.is_some() {
            assert_eq!(entry.taint, owner, "restore on a key the thread does not own");
        }
        *entry.data.lock() = value;
    }

    fn assert_quiescent(&self) {
        debug_assert_eq!(
            self.in_flight.load(Ordering::Acquire),
            0,
            "unchecked state access while tainted operations are in flight"
        );
    }

    /// Reads without looking at taints. Only valid while no worker runs.
    pub fn unchecked_read(&self, key: &StateKey) -> Option<Value> {
        self.assert_quiescent();
        self.simulate_io();
        self.backend.read().get(key).and_then(|e| e.data.lock().clone())
    }

    /// Writes without looking at taints. Only valid while no worker runs.
    pub fn unchecked_write(&self, key: &StateKey, value: Value) {
        self.assert_quiescent();
        self.simulate_io();
        {
            let map = self.backend.read();
            if let Some(entry) = map.get(key) {
                *entry.data.lock() = Some(value);
                return;
            }
        }
        let mut map = self.backend.write();
        *map.entry(key.clone()).or_insert_with(|| StateEntry::new(None)).data.get_mut() = Some(value);
    }

    /// Current owner of `key`, without tainting it.
    pub fn taint_of(&self, key: &StateKey) -> Option<ThreadId> {
        self.backend.read().get(key).and_then(|e| e.taint)
    }

    /// Current value of `key`, ignoring taints and latency.
    pub fn peek(&self, key: &StateKey) -> Option<Value> {
        self.backend.read().get(key).and_then(|e| e.data.lock().clone())
    }

    /// Drops every taint. Values are untouched.
    pub fn clear_taints(&self) {
        self.assert_quiescent();
        for entry in self.backend.write().values_mut() {
            entry.taint = None;
        }
    }

    /// All present `(key, value)` pairs in ascending key order.
    pub fn snapshot(&self) -> Vec<(StateKey, Value)> {
        let map = self.backend.read();
        let mut pairs: Vec<_> = map
            .iter()
            .filter_map(|(k, e)| e.data.lock().clone().map(|v| (k.clone(), v)))
            .collect();
        pairs.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        pairs
    }

    /// Number of keys holding a value.
    pub fn len(&self) -> usize {
        self.backend.read().values().filter(|e| e.data.lock().is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `hash(concat of hash(key) ++ hash(value))` over present pairs in key
    /// order. Taints and absent markers do not contribute.
    pub fn state_root(&self) -> Digest {
        let pairs = self.snapshot();
        let mut buf = Vec::with_capacity(pairs.len() * 64);
        for (k, v) in &pairs {
            buf.extend_from_slice(hash(k.as_bytes()).as_bytes());
            buf.extend_from_slice(hash(v).as_bytes());
        }
        hash(&buf)
    }
}

impl Clone for TaintState {
    /// Copies values only; the clone starts untainted.
    fn clone(&self) -> Self {
        TaintState::from_pairs(self.snapshot()).with_latency(self.latency)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(i: u8) -> StateKey {
        StateKey::new(vec![i])
    }

    const T1: ThreadId = ThreadId(1);
    const T2: ThreadId = ThreadId(2);
    const T3: ThreadId = ThreadId(3);

    #[test]
    fn owner_reads_repeatedly_foreign_read_fails() {
        let s = TaintState::new();
        assert_eq!(s.read(&key(1), T1), Ok(None));
        assert_eq!(s.read(&key(1), T1), Ok(None));
        assert_eq!(s.taint_of(&key(1)), Some(T1));
        assert_eq!(s.read(&key(1), T2), Err(TaintError { owner: T1 }));
    }

    #[test]
    fn write_rules() {
        let s = TaintState::new();
        s.write(&key(1), b"v1".to_vec(), T1).unwrap();
        assert_eq!(s.read(&key(1), T1).unwrap(), Some(b"v1".to_vec()));
        assert_eq!(s.write(&key(1), b"x".to_vec(), T2), Err(TaintError { owner: T1 }));
        assert_eq!(s.peek(&key(1)), Some(b"v1".to_vec()));
        s.write(&key(1), b"v2".to_vec(), T1).unwrap();
        assert_eq!(s.read(&key(1), T1).unwrap(), Some(b"v2".to_vec()));
    }

    fn add(n: u64) -> impl FnOnce(Option<&[u8]>) -> Result<Value, CodecError> {
        move |old| {
            use crate::primitives::{Decode, Encode};
            let v = old.map(u64::decode).transpose()?.unwrap_or(0);
            Ok((v + n).encode())
        }
    }

    #[test]
    fn mutate_rules() {
        use crate::primitives::Encode;
        let s = TaintState::from_pairs([(key(1), 10u64.encode())]);
        s.mutate(&key(1), T1, add(5)).unwrap();
        assert_eq!(s.peek(&key(1)), Some(15u64.encode()));
        s.mutate(&key(1), T1, add(0)).unwrap();
        assert_eq!(s.peek(&key(1)), Some(15u64.encode()));
        assert_eq!(s.mutate(&key(1), T2, add(1)), Err(StateError::Taint(TaintError { owner: T1 })));
        assert_eq!(s.peek(&key(1)), Some(15u64.encode()));
    }

    #[test]
    fn mutate_surfaces_corrupt_values() {
        let s = TaintState::from_pairs([(key(1), vec![1, 2, 3])]);
        assert!(matches!(s.mutate(&key(1), T1, add(1)), Err(StateError::Corrupt(_))));
        assert_eq!(s.peek(&key(1)), Some(vec![1, 2, 3]));
    }

    #[test]
    fn unchecked_access_ignores_taints() {
        let s = TaintState::new();
        s.write(&key(1), b"a".to_vec(), T3).unwrap();
        s.unchecked_write(&key(1), b"b".to_vec());
        assert_eq!(s.unchecked_read(&key(1)), Some(b"b".to_vec()));
        assert_eq!(s.unchecked_read(&key(2)), None);
        s.unchecked_write(&key(2), b"c".to_vec());
        assert_eq!(s.unchecked_read(&key(2)), Some(b"c".to_vec()));
        assert_eq!(s.taint_of(&key(2)), None);
    }

    // Standard SHA-256 of the empty string: the root of an empty state.
    const EMPTY_ROOT: &str = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";

    #[test]
    fn state_root_rules() {
        let s = TaintState::new();
        assert_eq!(s.state_root().to_hex(), EMPTY_ROOT);
        // Absent markers do not count.
        s.read(&key(9), T1).unwrap();
        assert_eq!(s.state_root().to_hex(), EMPTY_ROOT);

        let a = TaintState::from_pairs([(key(1), vec![1]), (key(2), vec![2])]);
        let b = TaintState::from_pairs([(key(2), vec![2]), (key(1), vec![1])]);
        a.read(&key(1), T1).unwrap();
        b.read(&key(1), T2).unwrap();
        assert_eq!(a.state_root(), b.state_root());

        let mut expect = Vec::new();
        for (k, v) in [(vec![1u8], vec![1u8]), (vec![2], vec![2])] {
            expect.extend_from_slice(hash(&k).as_bytes());
            expect.extend_from_slice(hash(&v).as_bytes());
        }
        assert_eq!(a.state_root(), hash(&expect));

        let c = TaintState::from_pairs([(key(1), vec![1]), (key(2), vec![3])]);
        assert_ne!(a.state_root(), c.state_root());
    }

    #[test]
    fn clear_taints_releases_keys() {
        let s = TaintState::from_pairs([(key(1), vec![7])]);
        s.read(&key(1), T1).unwrap();
        let root = s.state_root();
        s.clear_taints();
        assert_eq!(s.state_root(), root);
        assert_eq!(s.read(&key(1), T2), Ok(Some(vec![7])));
        assert_eq!(s.taint_of(&key(1)), Some(T2));
        TaintState::new().clear_taints();
    }

    #[test]
    fn acquire_reports_installation_once() {
        let s = TaintState::new();
        assert_eq!(s.acquire(&key(1), T1), Ok(Acquired::Installed));
        assert_eq!(s.acquire(&key(1), T1), Ok(Acquired::Owned));
        assert_eq!(s.acquire(&key(1), T2), Err(TaintError { owner: T1 }));
    }

    #[test]
    fn clone_drops_taints_keeps_values() {
        let s = TaintState::from_pairs([(key(1), vec![1])]).with_latency(Duration::from_micros(3));
        s.read(&key(1), T1).unwrap();
        s.read(&key(5), T1).unwrap();
        let c = s.clone();
        assert_eq!(c.taint_of(&key(1)), None);
        assert_eq!(c.state_root(), s.state_root());
        assert_eq!(c.len(), 1);
        assert_eq!(c.latency(), Duration::from_micros(3));
    }
}
