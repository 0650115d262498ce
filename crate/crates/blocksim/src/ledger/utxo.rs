//! The unspent-output set and transaction validation against it.
//!
//! Outputs are spent whole: applying a transaction removes every consumed
//! outpoint and inserts every created one. Once an output is referenced by
//! an applied transaction it is gone, so a second spend of the same
//! outpoint fails with `MissingUtxo`. That is the whole double-spend
//! defense at the ledger level; which of two competing transactions gets
//! applied is decided by the chain and the network above.

use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

use super::tx::{Amount, OutPoint, Transaction, TxOutput};

/// Read access to unspent outputs. Implemented by [`UtxoSet`] and by the
/// chain's copy-on-write overlays.
pub trait UtxoView {
    fn lookup(&self, op: &OutPoint) -> Option<&TxOutput>;
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("input refers to missing or already spent output {0}")]
    MissingUtxo(OutPoint),
    #[error("outpoint {0} consumed twice by the same transaction")]
    InternalConflict(OutPoint),
    #[error("input {input}: public key does not hash to the paid address")]
    AddressMismatch { input: usize },
    #[error("input {input}: signature does not verify")]
    BadSignature { input: usize },
    #[error("outputs total {out_total:?} exceed inputs total {in_total:?}")]
    Overspend { in_total: Amount, out_total: Amount },
    #[error("amount arithmetic overflow")]
    AmountOverflow,
}

/// Checks a transfer against `view` and returns its fee (inputs minus
/// outputs). Does not mutate anything.
///
/// Coinbases are not meant to come through here; their claim is only
/// bounded by block context (subsidy plus fees), which the chain checks.
pub fn validate_transaction(
    tx: &Transaction,
    view: &impl UtxoView,
) -> Result<Amount, ValidationError> {
    let body = tx.body_bytes();
    let mut seen = HashSet::with_capacity(tx.inputs().len());
    let mut in_total = Amount::ZERO;
    for (i, input) in tx.inputs().iter().enumerate() {
        if !seen.insert(input.outpoint) {
            return Err(ValidationError::InternalConflict(input.outpoint));
        }
        let funding = view
            .lookup(&input.outpoint)
            .ok_or(ValidationError::MissingUtxo(input.outpoint))?;
        if input.public_key.address() != funding.address {
            return Err(ValidationError::AddressMismatch { input: i });
        }
        if !input.public_key.verify(&body, &input.signature) {
            return Err(ValidationError::BadSignature { input: i });
        }
        in_total = in_total
            .checked_add(funding.amount)
            .ok_or(ValidationError::AmountOverflow)?;
    }
    let out_total = tx.output_total().ok_or(ValidationError::AmountOverflow)?;
    in_total
        .checked_sub(out_total)
        .ok_or(ValidationError::Overspend { in_total, out_total })
}

/// What `apply` removed, kept so `revert` can restore it exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndoEntry {
    spent: Vec<(OutPoint, TxOutput)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UtxoSet {
    live: BTreeMap<OutPoint, TxOutput>,
    total: Amount,
}

impl UtxoSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies a validated transaction. Panics if an input is missing:
    /// callers must run [`validate_transaction`] (or block validation)
    /// first, and a panic here means that contract was broken.
    pub fn apply(&mut self, tx: &Transaction) -> UndoEntry {
        let mut spent = Vec::with_capacity(tx.inputs().len());
        for input in tx.inputs() {
            let out = self
                .live
                .remove(&input.outpoint)
                .unwrap_or_else(|| panic!("apply of unvalidated tx: {} missing", input.outpoint));
            self.total = self.total.checked_sub(out.amount).expect("total underflow");
            spent.push((input.outpoint, out));
        }
        let id = tx.id();
        for (i, out) in tx.outputs().iter().enumerate() {
            let op = OutPoint { tx: id, index: i as u32 };
            let prev = self.live.insert(op, *out);
            assert!(prev.is_none(), "outpoint collision at {op}");
            self.total = self.total.checked_add(out.amount).expect("total overflow");
        }
        UndoEntry { spent }
    }

    /// Undoes `apply(tx)`. Must be called in reverse application order with
    /// the entry that `apply` returned.
    pub fn revert(&mut self, tx: &Transaction, undo: UndoEntry) {
        let id = tx.id();
        for (i, out) in tx.outputs().iter().enumerate() {
            let op = OutPoint { tx: id, index: i as u32 };
            let removed = self.live.remove(&op);
            assert!(removed.is_some(), "revert: created output {op} missing");
            self.total = self.total.checked_sub(out.amount).expect("total underflow");
        }
        for (op, out) in undo.spent {
            self.total = self.total.checked_add(out.amount).expect("total overflow");
            let prev = self.live.insert(op, out);
            assert!(prev.is_none(), "revert: outpoint {op} resurrected twice");
        }
    }

    pub fn contains(&self, op: &OutPoint) -> bool {
        self.live.contains_key(op)
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    /// Sum of all unspent amounts. Maintained incrementally. Applying a
    /// transfer shrinks it by the fee; the fee reappears when a coinbase
    /// claims it, so across whole blocks the total moves by exactly the
    /// coinbase claims minus the fees their blocks collected.
    pub fn total(&self) -> Amount {
        self.total
    }

    /// Deterministic iteration in outpoint order.
    pub fn iter(&self) -> impl Iterator<Item = (&OutPoint, &TxOutput)> {
        self.live.iter()
    }
}

impl UtxoView for UtxoSet {
    fn lookup(&self, op: &OutPoint) -> Option<&TxOutput> {
        self.live.get(op)
    }
}
