//! Canonical byte encoding used everywhere something is hashed.
//!
//! The rules are deliberately tiny so they can be restated in one line:
//! integers are fixed-width little-endian, variable-length byte strings are
//! length-prefixed with a u32, fixed-width digests and targets are written
//! raw. There is no framing and no self-description; every consumer knows
//! the layout of what it reads. FORMATS.md in the repository root documents
//! each hashed structure field by field.

use sha2::{Digest, Sha256};

/// Accumulates canonical bytes and hashes them.
#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Domain separation tag, written as a length-prefixed string so
    /// distinct structures can never collide byte-for-byte.
    pub fn tag(mut self, tag: &str) -> Self {
        self.put_bytes(tag.as_bytes());
        self
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    /// Raw bytes, no prefix. Only for fixed-width fields.
    pub fn put_raw(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    /// u32 length prefix followed by the bytes.
    pub fn put_bytes(&mut self, v: &[u8]) {
        self.put_u32(v.len() as u32);
        self.buf.extend_from_slice(v);
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.buf
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    /// SHA-256 of everything written so far.
    pub fn digest(&self) -> [u8; 32] {
        sha256(&self.buf)
    }
}

pub fn sha256(data: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(data);
    h.finalize().into()
}
