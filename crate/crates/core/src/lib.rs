//! Concurrent block authoring over a taintable key/value state, with
//! deterministic validation from per-transaction executor tags.
//!
//! The pieces, bottom up:
//!
//! - [`primitives`]: keys, ids, tags, SHA-256 digests, the canonical codec.
//! - [`taint_state`]: the shared store where the first accessor of a key owns it.
//! - [`runtime`]: storage maps, the balances module, dispatch and access hints.
//! - [`distributor`]: round-robin and connected-components work assignment.
//! - [`executor`]: the master/worker authoring protocol and block assembly.
//! - [`validator`]: tag-parallel replay of an authored block.

pub mod block;
pub mod distributor;
pub mod executor;
pub mod primitives;
pub mod runtime;
pub mod taint_state;
pub mod validator;

pub use block::{Header, TaggedBlock};
pub use distributor::{Assignment, ConnectedComponents, Distributor, RoundRobin};
pub use executor::{author_block, AuthoringStats, EngineError};
pub use primitives::{AccountId, Digest, StateKey, Tag, ThreadId};
pub use runtime::{dispatch, apply_unchecked, DispatchOutcome, Transaction};
pub use taint_state::{TaintError, TaintState};
pub use validator::{validate_block, validate_encoded, ValidationError, ValidationReport};
