//! Value types shared by every layer of the engine: keys, account ids, thread
//! ids and tags, the digest type, and the canonical binary codec.

pub mod codec;

use std::fmt;

use sha2::{Digest as _, Sha256};

pub use codec::{CodecError, Decode, Encode, Reader};

/// Width of every digest produced by [`hash`].
pub const DIGEST_LEN: usize = 32;

/// A 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// SHA-256 of `data`.
pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// An opaque state key. Runtime storage maps derive these with
/// [`derive_map_key`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateKey(Vec<u8>);

impl StateKey {
    /// Wraps raw key bytes.
    ///
    /// # Panics
    ///
    /// Panics if `bytes` is empty.
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        let bytes = bytes.into();
        assert!(!bytes.is_empty(), "state keys must be non-empty");
        StateKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex: String = self.0.iter().take(6).map(|b| format!("{b:02x}")).collect();
        write!(f, "StateKey({hex}..;{})", self.0.len())
    }
}

/// Storage key of `encoded_key` inside `module`'s map `map`:
/// `hash("module:map") ++ hash(encoded_key)`, 64 bytes.
pub fn derive_map_key(module: &str, map: &str, encoded_key: &[u8]) -> StateKey {
    debug_assert!(!module.is_empty() && module.is_ascii());
    debug_assert!(!map.is_empty() && map.is_ascii());
    let mut prefix = Vec::with_capacity(module.len() + map.len() + 1);
    prefix.extend_from_slice(module.as_bytes());
    prefix.push(b':');
    prefix.extend_from_slice(map.as_bytes());

    let mut key = Vec::with_capacity(2 * DIGEST_LEN);
    key.extend_from_slice(hash(&prefix).as_bytes());
    key.extend_from_slice(hash(encoded_key).as_bytes());
    StateKey(key)
}

/// A 32-byte account identifier. Stands in for a public key; no signature
/// scheme is attached.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AccountId(pub [u8; 32]);

impl AccountId {
    /// Deterministic test/dataset account derived from an index.
    pub fn from_index(index: u64) -> Self {
        let mut seed = b"account".to_vec();
        seed.extend_from_slice(&index.to_le_bytes());
        AccountId(hash(&seed).0)
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex: String = self.0.iter().take(4).map(|b| format!("{b:02x}")).collect();
        write!(f, "AccountId({hex}..)")
    }
}

/// Identifier of a worker thread. Worker ids run `0..W`; the byte value
/// [`ORPHAN_TAG_BYTE`] is reserved and never assigned to a worker.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct ThreadId(pub u8);

/// Reserved tag byte for orphan transactions, also used as the master's
/// sender id on the message bus.
pub const ORPHAN_TAG_BYTE: u8 = u8::MAX;

/// Largest number of workers a single authoring run can use.
pub const MAX_WORKERS: usize = ORPHAN_TAG_BYTE as usize;

impl ThreadId {
    pub const MASTER: ThreadId = ThreadId(ORPHAN_TAG_BYTE);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-transaction executor tag carried in a block.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Tag {
    Worker(ThreadId),
    Orphan,
}

impl Tag {
    pub fn to_byte(self) -> u8 {
        match self {
            Tag::Worker(t) => {
                debug_assert_ne!(t.0, ORPHAN_TAG_BYTE);
                t.0
            }
            Tag::Orphan => ORPHAN_TAG_BYTE,
        }
    }

    pub fn from_byte(b: u8) -> Self {
        if b == ORPHAN_TAG_BYTE {
            Tag::Orphan
        } else {
            Tag::Worker(ThreadId(b))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Standard SHA-256 test vectors.
    const SHA256_EMPTY: &str = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
    const SHA256_ABC: &str = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";

    #[test]
    fn hash_golden() {
        assert_eq!(hash(b"").to_hex(), SHA256_EMPTY);
        assert_eq!(hash(b"abc").to_hex(), SHA256_ABC);
        assert_eq!(hash(b"x"), hash(b"x"));
        assert_ne!(hash(b"a"), hash(b"b"));
    }

    #[test]
    fn map_key_layout() {
        let alice = AccountId::from_index(0);
        let key = derive_map_key("balances", "balance_of", &alice.0);
        assert_eq!(key.as_bytes().len(), 64);
        assert_eq!(&key.as_bytes()[..32], hash(b"balances:balance_of").as_bytes());
        assert_eq!(&key.as_bytes()[32..], hash(&alice.0).as_bytes());
        assert_eq!(key, derive_map_key("balances", "balance_of", &alice.0));

        let bob = AccountId::from_index(1);
        assert_ne!(key, derive_map_key("balances", "balance_of", &bob.0));
    }

    #[test]
    fn map_keys_do_not_collide() {
        let mut seen = std::collections::HashSet::new();
        let maps = [("balances", "balance_of"), ("balances", "reserved_of"), ("assets", "balance_of"), ("a", "b")];
        for (module, map) in maps {
            for i in 0..25_000u64 {
                assert!(seen.insert(derive_map_key(module, map, &i.to_le_bytes())));
            }
        }
        assert_eq!(seen.len(), 100_000);
    }

    #[test]
    fn tag_byte_layout() {
        assert_eq!(Tag::Orphan.to_byte(), 255);
        assert_eq!(Tag::from_byte(255), Tag::Orphan);
        for b in 0..255u8 {
            assert_eq!(Tag::from_byte(b), Tag::Worker(ThreadId(b)));
            assert_eq!(Tag::from_byte(b).to_byte(), b);
        }
    }

    #[test]
    #[should_panic]
    fn empty_state_key_rejected() {
        StateKey::new(Vec::new());
    }
}
