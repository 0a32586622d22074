//! Canonical binary encoding.
//!
//! Integers are fixed-width little-endian. Sequences carry a `u32` LE element
//! count, byte strings a `u32` LE byte length. Fixed-size arrays (account ids,
//! digests) are written raw. Every value has exactly one encoding, and
//! [`Decode::decode`] rejects truncated input and trailing bytes.

use thiserror::Error;

use super::{AccountId, Digest, Tag, DIGEST_LEN};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("unexpected end of input: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("invalid {what}: {value}")]
    InvalidVariant { what: &'static str, value: u64 },
}

/// Cursor over an input buffer.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated { offset: self.pos, needed: n - self.remaining() });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn take_array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub fn finish(self) -> Result<(), CodecError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

pub trait Encode {
    fn encode_to(&self, out: &mut Vec<u8>);

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_to(&mut out);
        out
    }
}

pub trait Decode: Sized {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError>;

    /// Decodes exactly one value spanning all of `bytes`.
    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}

macro_rules! int_codec {
    ($($t:ty),*) => {$(
        impl Encode for $t {
            fn encode_to(&self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
        }
        impl Decode for $t {
            fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
                Ok(<$t>::from_le_bytes(r.take_array()?))
            }
        }
    )*};
}

int_codec!(u8, u16, u32, u64, u128);

impl Encode for bool {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.push(*self as u8);
    }
}

impl Decode for bool {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match u8::decode_from(r)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(CodecError::InvalidVariant { what: "bool", value: v as u64 }),
        }
    }
}

impl Encode for AccountId {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
}

impl Decode for AccountId {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(AccountId(r.take_array()?))
    }
}

impl Encode for Digest {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
}

impl Decode for Digest {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Digest(r.take_array::<DIGEST_LEN>()?))
    }
}

impl Encode for Tag {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.push(self.to_byte());
    }
}

impl Decode for Tag {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Tag::from_byte(u8::decode_from(r)?))
    }
}

impl<T: Encode> Encode for Vec<T> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        encode_len(self.len(), out);
        for item in self {
            item.encode_to(out);
        }
    }
}

impl<T: Decode> Decode for Vec<T> {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let n = u32::decode_from(r)? as usize;
        // Cap the preallocation so a hostile length cannot exhaust memory.
        let mut out = Vec::with_capacity(n.min(r.remaining()));
        for _ in 0..n {
            out.push(T::decode_from(r)?);
        }
        Ok(out)
    }
}

impl<A: Encode, B: Encode> Encode for (A, B) {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.0.encode_to(out);
        self.1.encode_to(out);
    }
}

impl<A: Decode, B: Decode> Decode for (A, B) {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok((A::decode_from(r)?, B::decode_from(r)?))
    }
}

/// Writes a `u32` LE length.
///
/// # Panics
///
/// Panics if `len` does not fit in a `u32`.
pub fn encode_len(len: usize, out: &mut Vec<u8>) {
    let len = u32::try_from(len).expect("sequence longer than u32::MAX");
    len.encode_to(out);
}

/// Writes a length-prefixed byte string.
pub fn encode_bytes(bytes: &[u8], out: &mut Vec<u8>) {
    encode_len(bytes.len(), out);
    out.extend_from_slice(bytes);
}

/// Reads a length-prefixed byte string.
pub fn decode_bytes<'a>(r: &mut Reader<'a>) -> Result<&'a [u8], CodecError> {
    let n = u32::decode_from(r)? as usize;
    r.take(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_u128_is_sixteen_zero_bytes() {
        assert_eq!(0u128.encode(), vec![0u8; 16]);
        assert_eq!(1u64.encode(), vec![1, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn truncated_and_trailing_input_rejected() {
        let bytes = 7u64.encode();
        assert!(matches!(u64::decode(&bytes[..7]), Err(CodecError::Truncated { .. })));
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(u64::decode(&long), Err(CodecError::TrailingBytes(1)));
        assert!(matches!(bool::decode(&[2]), Err(CodecError::InvalidVariant { .. })));
    }

    #[test]
    fn byte_strings_are_length_prefixed() {
        let mut out = Vec::new();
        encode_bytes(b"abc", &mut out);
        assert_eq!(out, vec![3, 0, 0, 0, b'a', b'b', b'c']);
        let mut r = Reader::new(&out);
        assert_eq!(decode_bytes(&mut r).unwrap(), b"abc");
        r.finish().unwrap();
    }

    #[test]
    fn hostile_length_does_not_allocate() {
        let bytes = u32::MAX.encode();
        assert!(Vec::<u64>::decode(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn vec_round_trip(v in proptest::collection::vec((any::<u64>(), any::<u128>()), 0..32)) {
            let bytes = v.encode();
            prop_assert_eq!(Vec::<(u64, u128)>::decode(&bytes).unwrap(), v);
        }
    }
}
