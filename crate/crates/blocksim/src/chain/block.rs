//! Blocks, proof-of-work and the reward schedule.
//!
//! A block header is exactly 120 bytes:
//!
//! ```text
//! parent id     32  SHA-256 of the parent header
//! tx commitment 32  SHA-256 over concatenated tx ids, coinbase first
//! target        32  big-endian threshold the block id must stay under
//! nonce          8  little-endian
//! height         8  little-endian
//! timestamp_ms   8  little-endian
//! ```
//!
//! The block id is the SHA-256 digest of those bytes and the proof of work
//! is `id < target` as 256-bit big-endian integers. Mining is a real nonce
//! search; simulations keep targets cheap (for example 2^248, an expected
//! 256 attempts) so the work is genuine but affordable.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::sync::Arc;

use crate::ledger::{sha256, Amount, Transaction, TxId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub [u8; 32]);

impl BlockId {
    pub const ZERO: BlockId = BlockId([0; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let v = hex::decode(s).ok()?;
        v.try_into().ok().map(BlockId)
    }

    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for BlockId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for BlockId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BlockId::from_hex(&s).ok_or_else(|| serde::de::Error::custom("bad block id hex"))
    }
}

/// 256-bit big-endian proof-of-work threshold. Never zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Target(pub [u8; 32]);

impl Target {
    pub const MAX: Target = Target([0xff; 32]);

    /// The target `2^exp`, so difficulty is `2^(256-exp)` expected hashes.
    pub fn pow2(exp: u32) -> Target {
        assert!(exp < 256);
        let mut b = [0u8; 32];
        b[31 - (exp / 8) as usize] = 1 << (exp % 8);
        Target(b)
    }

    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }

    /// Clamps into [1, 2^256-1] and fixes the width.
    pub fn from_biguint(v: &BigUint) -> Target {
        let max = Target::MAX.to_biguint();
        let v = if *v > max { max } else if v.bits() == 0 { BigUint::from(1u8) } else { v.clone() };
        let bytes = v.to_bytes_be();
        let mut out = [0u8; 32];
        out[32 - bytes.len()..].copy_from_slice(&bytes);
        Target(out)
    }

    /// Expected number of hash attempts per block: floor(2^256 / target).
    pub fn work(&self) -> BigUint {
        let two256 = BigUint::from(1u8) << 256;
        two256 / self.to_biguint()
    }

    /// Ratio of this target to `other` as f64, for scaling mining rates.
    pub fn ratio_to(&self, other: &Target) -> f64 {
        let a = self.to_biguint().to_f64().unwrap_or(f64::MAX);
        let b = other.to_biguint().to_f64().unwrap_or(f64::MAX);
        a / b
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let v = hex::decode(s).ok()?;
        v.try_into().ok().map(Target)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Target::from_hex(&s).ok_or_else(|| serde::de::Error::custom("bad target hex"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockHeader {
    pub parent: BlockId,
    pub tx_commitment: [u8; 32],
    pub target: Target,
    pub nonce: u64,
    pub height: u64,
    pub timestamp_ms: u64,
}

impl BlockHeader {
    pub fn encode(&self) -> [u8; 120] {
        let mut b = [0u8; 120];
        b[0..32].copy_from_slice(&self.parent.0);
        b[32..64].copy_from_slice(&self.tx_commitment);
        b[64..96].copy_from_slice(&self.target.0);
        b[96..104].copy_from_slice(&self.nonce.to_le_bytes());
        b[104..112].copy_from_slice(&self.height.to_le_bytes());
        b[112..120].copy_from_slice(&self.timestamp_ms.to_le_bytes());
        b
    }

    pub fn id(&self) -> BlockId {
        BlockId(sha256(&self.encode()))
    }
}

/// `id < target`, both read as 256-bit big-endian integers. Byte-wise
/// lexicographic comparison is the same ordering.
pub fn check_pow(header: &BlockHeader) -> bool {
    header.id().0 < header.target.0
}

/// SHA-256 over the concatenated transaction ids in block order, coinbase
/// first. Ids are fixed-width, so plain concatenation is unambiguous.
pub fn tx_commitment(coinbase: TxId, txs: &[Arc<Transaction>]) -> [u8; 32] {
    let mut buf = Vec::with_capacity(32 * (1 + txs.len()));
    buf.extend_from_slice(&coinbase.0);
    for tx in txs {
        buf.extend_from_slice(&tx.id().0);
    }
    sha256(&buf)
}

#[derive(Debug, Clone)]
pub struct Block {
    header: BlockHeader,
    id: BlockId,
    coinbase: Transaction,
    txs: Vec<Arc<Transaction>>,
}

impl Block {
    pub fn new(header: BlockHeader, coinbase: Transaction, txs: Vec<Arc<Transaction>>) -> Block {
        let id = header.id();
        Block { header, id, coinbase, txs }
    }

    pub fn header(&self) -> &BlockHeader {
        &self.header
    }

    pub fn id(&self) -> BlockId {
        self.id
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn parent(&self) -> BlockId {
        self.header.parent
    }

    pub fn timestamp_ms(&self) -> u64 {
        self.header.timestamp_ms
    }

    pub fn coinbase(&self) -> &Transaction {
        &self.coinbase
    }

    /// Non-coinbase transactions in block order.
    pub fn txs(&self) -> &[Arc<Transaction>] {
        &self.txs
    }
}

/// Subsidy halves every `halving_interval` blocks: reward at height `h` is
/// `initial >> (h / halving_interval)`, reaching zero once the shift
/// exhausts the bits. Fees are on top and never halve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardSchedule {
    pub initial: Amount,
    pub halving_interval: u64,
}

impl RewardSchedule {
    pub fn reward(&self, height: u64) -> Amount {
        assert!(self.halving_interval > 0, "halving interval must be positive");
        let halvings = height / self.halving_interval;
        if halvings >= 64 {
            return Amount::ZERO;
        }
        Amount(self.initial.base() >> halvings)
    }
}

/// Everything a miner commits to before searching for a nonce.
#[derive(Debug, Clone)]
pub struct BlockTemplate {
    pub parent: BlockId,
    pub height: u64,
    pub target: Target,
    pub timestamp_ms: u64,
    pub coinbase: Transaction,
    pub txs: Vec<Arc<Transaction>>,
}

#[derive(Debug, Clone)]
pub struct Mined {
    pub block: Arc<Block>,
    pub attempts: u64,
}

/// Searches nonces until the header id beats the template's target. The
/// starting nonce comes from `rng` and subsequent attempts increment it,
/// so the search order is reproducible from the seed. Returns `None` after
/// `max_attempts` failures.
pub fn mine_block<R: RngCore>(
    template: BlockTemplate,
    max_attempts: u64,
    rng: &mut R,
) -> Option<Mined> {
    let BlockTemplate { parent, height, target, timestamp_ms, coinbase, txs } = template;
    let commitment = tx_commitment(coinbase.id(), &txs);
    let mut header = BlockHeader {
        parent,
        tx_commitment: commitment,
        target,
        nonce: rng.next_u64(),
        height,
        timestamp_ms,
    };
    let mut buf = header.encode();
    for attempt in 1..=max_attempts {
        buf[96..104].copy_from_slice(&header.nonce.to_le_bytes());
        if sha256(&buf) < header.target.0 {
            let block = Block::new(header, coinbase, txs);
            debug_assert!(check_pow(block.header()));
            return Some(Mined { block: Arc::new(block), attempts: attempt });
        }
        header.nonce = header.nonce.wrapping_add(1);
    }
    None
}
