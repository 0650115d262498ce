//! A simulated node: chain store, mempool and peer list.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use crate::chain::{BlockId, ChainStore};
use crate::ledger::{
    validate_transaction, Amount, OutPoint, Transaction, TxId, UtxoSet, ValidationError,
};

#[derive(Debug, Clone, PartialEq)]
pub enum MempoolVerdict {
    Accepted { fee: Amount },
    /// An earlier transaction already claims one of the outpoints;
    /// first-seen wins and the newcomer is dropped.
    Conflict { with: TxId },
    Invalid(ValidationError),
    Known,
}

/// Pending transactions, all valid against the node's current tip state
/// and pairwise input-disjoint, so any subset of them makes a valid block
/// body in any order.
#[derive(Debug, Clone, Default)]
pub struct Mempool {
    txs: BTreeMap<TxId, (Arc<Transaction>, Amount)>,
    by_outpoint: HashMap<OutPoint, TxId>,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn try_insert(&mut self, tx: Arc<Transaction>, state: &UtxoSet) -> MempoolVerdict {
        let id = tx.id();
        if self.txs.contains_key(&id) {
            return MempoolVerdict::Known;
        }
        for input in tx.inputs() {
            if let Some(prior) = self.by_outpoint.get(&input.outpoint) {
                return MempoolVerdict::Conflict { with: *prior };
            }
        }
        let fee = match validate_transaction(tx.as_ref(), state) {
            Ok(fee) => fee,
            Err(e) => return MempoolVerdict::Invalid(e),
        };
        for input in tx.inputs() {
            self.by_outpoint.insert(input.outpoint, id);
        }
        self.txs.insert(id, (tx, fee));
        MempoolVerdict::Accepted { fee }
    }

    pub fn contains(&self, id: &TxId) -> bool {
        self.txs.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    /// Highest-fee transactions first (ties broken by id), up to `max`.
    /// The pool's standing invariants make any such slice a consistent
    /// block body.
    pub fn select(&self, max: usize) -> Vec<(Arc<Transaction>, Amount)> {
        let mut all: Vec<_> = self.txs.values().cloned().collect();
        all.sort_by(|(a, fa), (b, fb)| fb.cmp(fa).then(a.id().cmp(&b.id())));
        all.truncate(max);
        all
    }

    /// Drops everything no longer valid against `state` and returns the
    /// dropped ids. Called after every tip change: it clears out freshly
    /// confirmed transactions (their inputs are now spent) and anything a
    /// reorg invalidated.
    pub fn revalidate(&mut self, state: &UtxoSet) -> Vec<TxId> {
        let mut dropped = Vec::new();
        let old = std::mem::take(&mut self.txs);
        self.by_outpoint.clear();
        for (id, (tx, _)) in old {
            match validate_transaction(tx.as_ref(), state) {
                Ok(fee) => {
                    for input in tx.inputs() {
                        self.by_outpoint.insert(input.outpoint, id);
                    }
                    self.txs.insert(id, (tx, fee));
                }
                Err(_) => dropped.push(id),
            }
        }
        dropped
    }
}

/// Transactions that referenced outputs this node had not heard of yet,
/// typically because the payment overtook its funding block on some path.
/// Retried after every tip change. Bounded FIFO.
#[derive(Debug, Clone, Default)]
pub struct TxBacklog {
    txs: Vec<Arc<Transaction>>,
    limit: usize,
}

impl TxBacklog {
    pub fn new(limit: usize) -> Self {
        TxBacklog { txs: Vec::new(), limit }
    }

    pub fn push(&mut self, tx: Arc<Transaction>) {
        if self.txs.len() == self.limit && !self.txs.is_empty() {
            self.txs.remove(0);
        }
        if self.txs.len() < self.limit {
            self.txs.push(tx);
        }
    }

    pub fn drain(&mut self) -> Vec<Arc<Transaction>> {
        std::mem::take(&mut self.txs)
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: usize,
    pub chain: ChainStore,
    pub mempool: Mempool,
    pub backlog: TxBacklog,
    pub peers: Vec<usize>,
    pub seen_txs: HashSet<TxId>,
    pub seen_blocks: HashSet<BlockId>,
    /// A spy records but never mines, originates or relays.
    pub is_spy: bool,
}

impl Node {
    pub fn new(id: usize, chain: ChainStore, peers: Vec<usize>, is_spy: bool) -> Node {
        Node {
            id,
            chain,
            mempool: Mempool::new(),
            backlog: TxBacklog::new(1024),
            peers,
            seen_txs: HashSet::new(),
            seen_blocks: HashSet::new(),
            is_spy,
        }
    }
}
