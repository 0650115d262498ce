//! Transactions: references to unspent outputs in, fresh outputs out.
//!
//! A transfer consumes previously created outputs whole and creates new
//! ones; overpayment returns to the payer through an explicit change
//! output, and any amount not re-created is the fee claimed by whoever
//! mines the transaction. A coinbase has no inputs and mints the block
//! subsidy plus fees. The transaction id is the SHA-256 digest of the
//! canonical encoding, so ids recompute identically from serialized form.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use thiserror::Error;

use super::encoding::{sha256, Encoder};
use super::keys::{Address, KeyPair, PublicKey, Signature};

/// Base units per coin. All amounts are integer base units.
pub const COIN: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Amount(pub u64);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub fn coins(n: u64) -> Amount {
        Amount(n * COIN)
    }

    pub fn base(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_add(rhs.0).map(Amount)
    }

    pub fn checked_sub(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_sub(rhs.0).map(Amount)
    }
}

impl fmt::Display for Amount {
    /// Renders as whole coins with up to eight decimals, trailing zeros
    /// trimmed: `Amount(150_000_000)` prints `1.5`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / COIN;
        let frac = self.0 % COIN;
        if frac == 0 {
            return write!(f, "{whole}");
        }
        let s = format!("{frac:08}");
        write!(f, "{whole}.{}", s.trim_end_matches('0'))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub [u8; 32]);

impl TxId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let v = hex::decode(s).ok()?;
        v.try_into().ok().map(TxId)
    }

    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for TxId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for TxId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TxId::from_hex(&s).ok_or_else(|| serde::de::Error::custom("bad tx id hex"))
    }
}

/// Pointer to one output of an earlier transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutPoint {
    pub tx: TxId,
    pub index: u32,
}

impl fmt::Display for OutPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.tx.short(), self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxInput {
    pub outpoint: OutPoint,
    pub public_key: PublicKey,
    pub signature: Signature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxOutput {
    pub address: Address,
    pub amount: Amount,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TxError {
    #[error("transfer has no inputs")]
    NoInputs,
    #[error("transfer has no outputs")]
    NoOutputs,
    #[error("output {0} has zero amount")]
    ZeroOutput(usize),
    #[error("need {need} signing keys, got {got}")]
    WrongKeyCount { need: usize, got: usize },
    #[error("key {0} does not match the input's public key")]
    KeyMismatch(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    inputs: Vec<TxInput>,
    outputs: Vec<TxOutput>,
    /// `Some(h)` marks a coinbase minted at height `h`. The height is part
    /// of the hashed encoding, so coinbases with identical outputs at
    /// different heights still get distinct ids.
    coinbase_height: Option<u64>,
    id: TxId,
}

impl Transaction {
    /// A transfer whose inputs carry placeholder signatures. Call
    /// [`Transaction::sign`] before expecting it to validate.
    pub fn transfer(
        spends: Vec<(OutPoint, PublicKey)>,
        outputs: Vec<TxOutput>,
    ) -> Result<Transaction, TxError> {
        if spends.is_empty() {
            return Err(TxError::NoInputs);
        }
        if outputs.is_empty() {
            return Err(TxError::NoOutputs);
        }
        check_outputs(&outputs)?;
        let inputs = spends
            .into_iter()
            .map(|(outpoint, public_key)| TxInput {
                outpoint,
                signature: Signature::unsigned(public_key.scheme()),
                public_key,
            })
            .collect();
        Ok(Self::assemble(inputs, outputs, None))
    }

    /// Coinbase claiming `outputs` at `height`. Outputs may be empty (a
    /// miner may claim less than it is owed, including nothing at all).
    pub fn coinbase(height: u64, outputs: Vec<TxOutput>) -> Result<Transaction, TxError> {
        check_outputs(&outputs)?;
        Ok(Self::assemble(Vec::new(), outputs, Some(height)))
    }

    /// Signs every input with the matching key, in input order. Key `i`
    /// must own input `i`'s public key.
    pub fn sign(mut self, keys: &[&KeyPair]) -> Result<Transaction, TxError> {
        if keys.len() != self.inputs.len() {
            return Err(TxError::WrongKeyCount { need: self.inputs.len(), got: keys.len() });
        }
        let body = self.body_bytes();
        for (i, key) in keys.iter().enumerate() {
            if key.public() != &self.inputs[i].public_key {
                return Err(TxError::KeyMismatch(i));
            }
            self.inputs[i].signature = key.sign(&body);
        }
        self.id = TxId(sha256(&self.canonical_bytes()));
        Ok(self)
    }

    /// Builds and signs a transfer in one step.
    pub fn transfer_signed(
        spends: &[(OutPoint, &KeyPair)],
        outputs: Vec<TxOutput>,
    ) -> Result<Transaction, TxError> {
        let unsigned = Self::transfer(
            spends.iter().map(|(op, k)| (*op, *k.public())).collect(),
            outputs,
        )?;
        let keys: Vec<&KeyPair> = spends.iter().map(|(_, k)| *k).collect();
        unsigned.sign(&keys)
    }

    fn assemble(
        inputs: Vec<TxInput>,
        outputs: Vec<TxOutput>,
        coinbase_height: Option<u64>,
    ) -> Transaction {
        let mut tx = Transaction { inputs, outputs, coinbase_height, id: TxId([0; 32]) };
        tx.id = TxId(sha256(&tx.canonical_bytes()));
        tx
    }

    pub fn id(&self) -> TxId {
        self.id
    }

    pub fn inputs(&self) -> &[TxInput] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[TxOutput] {
        &self.outputs
    }

    pub fn is_coinbase(&self) -> bool {
        self.coinbase_height.is_some()
    }

    pub fn coinbase_height(&self) -> Option<u64> {
        self.coinbase_height
    }

    pub fn output_total(&self) -> Option<Amount> {
        self.outputs.iter().try_fold(Amount::ZERO, |acc, o| acc.checked_add(o.amount))
    }

    /// Addresses of the keys that signed the inputs.
    pub fn input_addresses(&self) -> Vec<Address> {
        self.inputs.iter().map(|i| i.public_key.address()).collect()
    }

    /// The message every input signs: the coinbase marker, all outpoints
    /// and all outputs. Public keys and signatures stay outside so signing
    /// one input cannot invalidate another.
    pub fn body_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new().tag("blocksim/txbody/v1");
        encode_common(&mut e, self.coinbase_height, &self.outputs);
        e.put_u32(self.inputs.len() as u32);
        for input in &self.inputs {
            encode_outpoint(&mut e, &input.outpoint);
        }
        e.into_bytes()
    }

    /// Full canonical encoding, including keys and signatures. The tx id is
    /// the SHA-256 digest of these bytes.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new().tag("blocksim/tx/v1");
        encode_common(&mut e, self.coinbase_height, &self.outputs);
        e.put_u32(self.inputs.len() as u32);
        for input in &self.inputs {
            encode_outpoint(&mut e, &input.outpoint);
            e.put_bytes(&input.public_key.canonical_bytes());
            e.put_bytes(&input.signature.canonical_bytes());
        }
        e.into_bytes()
    }
}

fn check_outputs(outputs: &[TxOutput]) -> Result<(), TxError> {
    for (i, o) in outputs.iter().enumerate() {
        if o.amount.is_zero() {
            return Err(TxError::ZeroOutput(i));
        }
    }
    Ok(())
}

fn encode_common(e: &mut Encoder, coinbase_height: Option<u64>, outputs: &[TxOutput]) {
    match coinbase_height {
        Some(h) => {
            e.put_u8(1);
            e.put_u64(h);
        }
        None => e.put_u8(0),
    }
    e.put_u32(outputs.len() as u32);
    for o in outputs {
        e.put_raw(o.address.as_bytes());
        e.put_u64(o.amount.base());
    }
}

fn encode_outpoint(e: &mut Encoder, op: &OutPoint) {
    e.put_raw(&op.tx.0);
    e.put_u32(op.index);
}

/// Convenience for tests and examples.
pub fn pay(address: Address, amount: Amount) -> TxOutput {
    TxOutput { address, amount }
}
