//! Tagged blocks and their wire format.
//!
//! ```text
//! header : parent [32] ‖ number u64 LE ‖ state_root [32]
//! body   : count u32 LE, then per transaction: tag u8 ‖ len u32 LE ‖ tx bytes
//! ```
//!
//! Tag bytes `0..=254` name a worker; `255` marks an orphan.

use crate::primitives::codec::{decode_bytes, encode_len, CodecError, Decode, Encode, Reader};
use crate::primitives::{hash, Digest, Tag};
use crate::runtime::{encode_tx_framed, Transaction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub parent_hash: Digest,
    pub number: u64,
    pub state_root: Digest,
}

impl Encode for Header {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.parent_hash.encode_to(out);
        self.number.encode_to(out);
        self.state_root.encode_to(out);
    }
}

impl Decode for Header {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Header { parent_hash: Digest::decode_from(r)?, number: u64::decode_from(r)?, state_root: Digest::decode_from(r)? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedBlock {
    pub header: Header,
    pub body: Vec<(Tag, Transaction)>,
}

impl TaggedBlock {
    /// Hash of the encoded header, usable as the next block's parent.
    pub fn hash(&self) -> Digest {
        hash(&self.header.encode())
    }

    /// Distinct worker tags in ascending order.
    pub fn worker_tags(&self) -> Vec<Tag> {
        let mut tags: Vec<Tag> = self.body.iter().map(|(t, _)| *t).filter(|t| *t != Tag::Orphan).collect();
        tags.sort_unstable();
        tags.dedup();
        tags
    }

    pub fn transactions_with(&self, tag: Tag) -> impl Iterator<Item = &Transaction> {
        self.body.iter().filter(move |(t, _)| *t == tag).map(|(_, tx)| tx)
    }
}

impl Encode for TaggedBlock {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.header.encode_to(out);
        encode_len(self.body.len(), out);
        for (tag, tx) in &self.body {
            tag.encode_to(out);
            encode_tx_framed(tx, out);
        }
    }
}

impl Decode for TaggedBlock {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let header = Header::decode_from(r)?;
        let n = u32::decode_from(r)? as usize;
        let mut body = Vec::with_capacity(n.min(r.remaining()));
        for _ in 0..n {
            let tag = Tag::decode_from(r)?;
            let tx = Transaction::decode(decode_bytes(r)?)?;
            body.push((tag, tx));
        }
        Ok(TaggedBlock { header, body })
    }
}
