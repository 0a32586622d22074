//! State-transition logic: storage maps over the taintable state, the call
//! registry, transactions, and dispatch.
//!
//! Each runtime module contributes a call enum and its storage maps. A call
//! is dispatched against an [`ExecContext`], which routes every storage
//! access either through the taint protocol (worker threads) or around it
//! (orphan phase, sequential replay). The context counts accesses so that a
//! taint failure can be classified as first-access (forwardable) or later
//! (orphan), and it remembers overwritten values so a failed attempt leaves
//! no trace in the state.

pub mod balances;

use std::marker::PhantomData;

use thiserror::Error;

use crate::primitives::codec::{encode_bytes, CodecError, Decode, Encode, Reader};
use crate::primitives::{derive_map_key, AccountId, StateKey, ThreadId};
use crate::taint_state::{StateError, TaintState, Value};

/// Names of the registered runtime modules, indexed by their call byte.
pub const MODULES: &[&str] = &[balances::MODULE];

/// A dispatchable call, one variant per registered module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Call {
    Balances(balances::Call),
}

impl Call {
    fn module_index(&self) -> u8 {
        match self {
            Call::Balances(_) => 0,
        }
    }

    /// Storage keys the call is expected to touch, derived from the payload
    /// alone.
    pub fn access_hints(&self, origin: &AccountId) -> Vec<StateKey> {
        match self {
            Call::Balances(c) => c.access_hints(origin),
        }
    }

    fn execute(&self, origin: &AccountId, ctx: &mut ExecContext<'_>) -> Result<(), DispatchError> {
        match self {
            Call::Balances(c) => c.execute(origin, ctx),
        }
    }
}

impl Encode for Call {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.push(self.module_index());
        match self {
            Call::Balances(c) => c.encode_to(out),
        }
    }
}

impl Decode for Call {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match u8::decode_from(r)? {
            0 => Ok(Call::Balances(balances::Call::decode_from(r)?)),
            v => Err(CodecError::InvalidVariant { what: "module index", value: v as u64 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub id: u64,
    pub origin: AccountId,
    pub call: Call,
    /// Set once when the transaction is delegated to a peer worker. Not part
    /// of the encoding.
    pub forwarded: bool,
}

impl Transaction {
    pub fn new(id: u64, origin: AccountId, call: Call) -> Self {
        Transaction { id, origin, call, forwarded: false }
    }

    pub fn transfer(id: u64, origin: AccountId, dest: AccountId, value: u128) -> Self {
        Self::new(id, origin, Call::Balances(balances::Call::Transfer { dest, value }))
    }

    pub fn access_hints(&self) -> AccessHints {
        AccessHints(self.call.access_hints(&self.origin))
    }
}

/// Layout: `id u64 ‖ origin [32] ‖ module u8 ‖ call fields`.
impl Encode for Transaction {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.id.encode_to(out);
        self.origin.encode_to(out);
        self.call.encode_to(out);
    }
}

impl Decode for Transaction {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Transaction::new(u64::decode_from(r)?, AccountId::decode_from(r)?, Call::decode_from(r)?))
    }
}

/// Writes a transaction as a length-prefixed byte string.
pub(crate) fn encode_tx_framed(tx: &Transaction, out: &mut Vec<u8>) {
    encode_bytes(&tx.encode(), out);
}

/// Ordered list of keys a transaction is expected to access.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AccessHints(pub Vec<StateKey>);

impl AccessHints {
    pub fn keys(&self) -> &[StateKey] {
        &self.0
    }
}

/// Result of executing a transaction on a worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DispatchOutcome {
    Ok,
    LogicError(&'static str),
    TaintConflict { owner: ThreadId, first_access: bool },
}

impl DispatchOutcome {
    /// Ok and LogicError both count as executed.
    pub fn is_executed(&self) -> bool {
        !matches!(self, DispatchOutcome::TaintConflict { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("corrupt value under a runtime storage key: {0}")]
    CorruptState(#[from] CodecError),
}

/// Why a call body stopped early.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DispatchError {
    Logic(&'static str),
    Taint { owner: ThreadId, first_access: bool },
    Corrupt(CodecError),
}

impl From<CodecError> for DispatchError {
    fn from(e: CodecError) -> Self {
        DispatchError::Corrupt(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AccessMode {
    Tainted(ThreadId),
    Unchecked,
}

/// Per-attempt execution context handed to call bodies.
pub struct ExecContext<'a> {
    state: &'a TaintState,
    mode: AccessMode,
    accesses: usize,
    // Pre-attempt bytes of every key written so far, first write only.
    undo: Vec<(StateKey, Option<Value>)>,
    touched: Vec<StateKey>,
}

impl<'a> ExecContext<'a> {
    fn new(state: &'a TaintState, mode: AccessMode) -> Self {
        ExecContext { state, mode, accesses: 0, undo: Vec::new(), touched: Vec::new() }
    }

    fn taint_failure(&self, owner: ThreadId) -> DispatchError {
        DispatchError::Taint { owner, first_access: self.accesses == 0 }
    }

    fn note_access(&mut self, key: &StateKey) {
        self.accesses += 1;
        if !self.touched.contains(key) {
            self.touched.push(key.clone());
        }
    }

    pub fn read_raw(&mut self, key: &StateKey) -> Result<Option<Value>, DispatchError> {
        let value = match self.mode {
            AccessMode::Tainted(t) => self.state.read(key, t).map_err(|e| self.taint_failure(e.owner))?,
            AccessMode::Unchecked => self.state.unchecked_read(key),
        };
        self.note_access(key);
        Ok(value)
    }

    fn remember(&mut self, key: &StateKey) {
        if !self.undo.iter().any(|(k, _)| k == key) {
            // Either the key is ours or nobody else runs, so peeking is race-free.
            self.undo.push((key.clone(), self.state.peek(key)));
        }
    }

    pub fn write_raw(&mut self, key: &StateKey, value: Value) -> Result<(), DispatchError> {
        match self.mode {
            AccessMode::Tainted(t) => {
                self.state.acquire(key, t).map_err(|e| self.taint_failure(e.owner))?;
                self.remember(key);
                self.state.write(key, value, t).map_err(|e| self.taint_failure(e.owner))?;
            }
            AccessMode::Unchecked => {
                self.remember(key);
                self.state.unchecked_write(key, value);
            }
        }
        self.note_access(key);
        Ok(())
    }

    pub fn mutate_raw<F>(&mut self, key: &StateKey, update: F) -> Result<(), DispatchError>
    where
        F: FnOnce(Option<&[u8]>) -> Result<Value, CodecError>,
    {
        match self.mode {
            AccessMode::Tainted(t) => {
                self.state.acquire(key, t).map_err(|e| self.taint_failure(e.owner))?;
                self.remember(key);
                self.state.mutate(key, t, update).map_err(|e| match e {
                    StateError::Taint(e) => self.taint_failure(e.owner),
                    StateError::Corrupt(e) => DispatchError::Corrupt(e),
                })?;
            }
            AccessMode::Unchecked => {
                self.remember(key);
                let next = update(self.state.unchecked_read(key).as_deref())?;
                self.state.unchecked_write(key, next);
            }
        }
        self.note_access(key);
        Ok(())
    }

    /// Keys accessed so far in this attempt, in first-access order.
    pub fn touched(&self) -> &[StateKey] {
        &self.touched
    }

    fn rollback(&mut self) {
        let owner = match self.mode {
            AccessMode::Tainted(t) => Some(t),
            AccessMode::Unchecked => None,
        };
        for (key, old) in self.undo.drain(..).rev() {
            self.state.restore(&key, old, owner);
        }
    }
}

/// A typed map inside a runtime module's storage namespace.
pub struct StorageMap<K, V> {
    module: &'static str,
    name: &'static str,
    _types: PhantomData<fn(K) -> V>,
}

impl<K: Encode, V: Encode + Decode + Default> StorageMap<K, V> {
    pub const fn new(module: &'static str, name: &'static str) -> Self {
        StorageMap { module, name, _types: PhantomData }
    }

    pub fn key_for(&self, key: &K) -> StateKey {
        derive_map_key(self.module, self.name, &key.encode())
    }

    /// Reads the value, substituting the default for a missing key.
    pub fn read(&self, ctx: &mut ExecContext<'_>, key: &K) -> Result<V, DispatchError> {
        match ctx.read_raw(&self.key_for(key))? {
            Some(bytes) => Ok(V::decode(&bytes)?),
            None => Ok(V::default()),
        }
    }

    pub fn write(&self, ctx: &mut ExecContext<'_>, key: &K, value: &V) -> Result<(), DispatchError> {
        ctx.write_raw(&self.key_for(key), value.encode())
    }

    /// Applies `f` to the stored value (default if missing). An error from
    /// `f` becomes a logic error; the attempt's rollback undoes the write.
    pub fn mutate<F>(&self, ctx: &mut ExecContext<'_>, key: &K, f: F) -> Result<(), DispatchError>
    where
        F: FnOnce(&mut V) -> Result<(), &'static str>,
    {
        let mut logic = None;
        let res = ctx.mutate_raw(&self.key_for(key), |old| {
            let mut v = match old {
                Some(bytes) => V::decode(bytes)?,
                None => V::default(),
            };
            match f(&mut v) {
                Ok(()) => Ok(v.encode()),
                Err(msg) => {
                    // Rolled back by the caller together with the attempt.
                    logic = Some(msg);
                    Ok(v.encode())
                }
            }
        });
        res?;
        match logic {
            Some(msg) => Err(DispatchError::Logic(msg)),
            None => Ok(()),
        }
    }

    /// Writes directly, bypassing taints. For genesis construction.
    pub fn insert_unchecked(&self, state: &TaintState, key: &K, value: &V) {
        state.unchecked_write(&self.key_for(key), value.encode());
    }

    /// Reads directly without tainting or latency.
    pub fn peek(&self, state: &TaintState, key: &K) -> Result<V, CodecError> {
        state.peek(&self.key_for(key)).map(|b| V::decode(&b)).transpose().map(Option::unwrap_or_default)
    }
}

/// Executes `tx` as worker `current` under the taint protocol.
///
/// Writes made by an attempt that does not complete (taint conflict or
/// logic error) are rolled back before returning; taints the attempt
/// installed stay.
pub fn dispatch(tx: &Transaction, state: &TaintState, current: ThreadId) -> Result<DispatchOutcome, RuntimeError> {
    dispatch_traced(tx, state, current).map(|(o, _)| o)
}

/// Like [`dispatch`], also returning the keys the attempt accessed.
pub fn dispatch_traced(
    tx: &Transaction,
    state: &TaintState,
    current: ThreadId,
) -> Result<(DispatchOutcome, Vec<StateKey>), RuntimeError> {
    let mut ctx = ExecContext::new(state, AccessMode::Tainted(current));
    let res = tx.call.execute(&tx.origin, &mut ctx);
    if res.is_err() {
        ctx.rollback();
    }
    let touched = std::mem::take(&mut ctx.touched);
    let outcome = match res {
        Ok(()) => DispatchOutcome::Ok,
        Err(DispatchError::Logic(msg)) => DispatchOutcome::LogicError(msg),
        Err(DispatchError::Taint { owner, first_access }) => DispatchOutcome::TaintConflict { owner, first_access },
        Err(DispatchError::Corrupt(e)) => return Err(RuntimeError::CorruptState(e)),
    };
    Ok((outcome, touched))
}

/// Outcome of an unchecked (sequential) execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApplyOutcome {
    Ok,
    LogicError(&'static str),
}

/// Executes `tx` ignoring taints. Only valid while no worker thread runs.
pub fn apply_unchecked(tx: &Transaction, state: &TaintState) -> Result<ApplyOutcome, RuntimeError> {
    let mut ctx = ExecContext::new(state, AccessMode::Unchecked);
    let res = tx.call.execute(&tx.origin, &mut ctx);
    if res.is_err() {
        ctx.rollback();
    }
    match res {
        Ok(()) => Ok(ApplyOutcome::Ok),
        Err(DispatchError::Logic(msg)) => Ok(ApplyOutcome::LogicError(msg)),
        Err(DispatchError::Corrupt(e)) => Err(RuntimeError::CorruptState(e)),
        Err(DispatchError::Taint { .. }) => unreachable!("unchecked access cannot conflict"),
    }
}
