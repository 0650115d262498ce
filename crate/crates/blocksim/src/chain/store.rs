//! Block storage, fork choice and reorganization.
//!
//! Every block ever accepted is kept, including stale branches. The best
//! tip is the one with the greatest cumulative work (the sum of
//! `floor(2^256 / target)` over its ancestry); ties keep the incumbent, so
//! a switch happens only on strictly more work. With a constant target
//! this is exactly the longest-chain rule, and under retargeting it stays
//! correct where block counting would not.
//!
//! One full UTXO set is materialized at the best tip. Extending the tip
//! mutates it in place; a reorg rolls back per-block undo data to the fork
//! point and replays the other branch. Transactions that fall out of the
//! chain during a reorg are handed back to the caller so a mempool can
//! reconsider them.

use num_bigint::BigUint;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use thiserror::Error;

use super::block::{
    check_pow, tx_commitment, Block, BlockId, RewardSchedule, Target,
};
use crate::ledger::{
    validate_transaction, Amount, OutPoint, Transaction, TxId, TxOutput, UndoEntry, UtxoSet,
    UtxoView, ValidationError,
};

/// `window == 0` disables retargeting and the target stays at its initial
/// value forever.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RetargetParams {
    pub window: u64,
    pub desired_interval_ms: u64,
}

impl RetargetParams {
    pub const OFF: RetargetParams = RetargetParams { window: 0, desired_interval_ms: 0 };
}

#[derive(Debug, Clone)]
pub struct ChainParams {
    pub initial_target: Target,
    pub reward: RewardSchedule,
    pub retarget: RetargetParams,
    /// Capacity in non-coinbase transactions.
    pub max_block_txs: usize,
    pub orphan_limit: usize,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams {
            initial_target: Target::pow2(248),
            reward: RewardSchedule { initial: Amount::coins(50), halving_interval: 210_000 },
            retarget: RetargetParams::OFF,
            max_block_txs: 100,
            orphan_limit: 1024,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BlockError {
    #[error("block already known")]
    Duplicate,
    #[error("parent block not known")]
    UnknownParent,
    #[error("height {got}, parent implies {want}")]
    WrongHeight { got: u64, want: u64 },
    #[error("header target does not match the retarget rule")]
    WrongTarget,
    #[error("block id does not beat its target")]
    BadPow,
    #[error("tx commitment does not match block contents")]
    BadCommitment,
    #[error("bad coinbase: {0}")]
    BadCoinbase(String),
    #[error("{got} transactions exceed capacity {max}")]
    TooManyTxs { got: usize, max: usize },
    #[error("transaction {index} invalid: {source}")]
    InvalidTx { index: usize, source: ValidationError },
    #[error("coinbase claims {claimed:?}, allowed {allowed:?}")]
    ExcessCoinbase { claimed: Amount, allowed: Amount },
    #[error("amount arithmetic overflow in block")]
    AmountOverflow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConnectOutcome {
    /// Parent was the best tip; the chain simply grew.
    ExtendedBest,
    /// Valid block on a side branch with no more work than the best tip.
    CreatedFork,
    /// A side branch overtook the best chain. `depth` counts disconnected
    /// blocks; `returned_txs` are the transactions they contained that the
    /// new branch does not.
    Reorganized { depth: u64, returned_txs: Vec<Arc<Transaction>> },
    /// Parent unknown; the block is buffered until the parent shows up.
    Orphaned,
}

#[derive(Debug, Clone)]
struct BlockEntry {
    block: Arc<Block>,
    /// Cumulative work from genesis, inclusive.
    work: BigUint,
}

#[derive(Debug, Clone)]
pub struct ChainStore {
    params: ChainParams,
    entries: HashMap<BlockId, BlockEntry>,
    genesis: BlockId,
    best: BlockId,
    /// Best-chain block ids indexed by height.
    best_chain: Vec<BlockId>,
    /// UTXO set at the best tip.
    utxo: UtxoSet,
    /// Undo data per best-chain block: one entry per transaction, coinbase
    /// first. Dropped when a block leaves the best chain.
    undo: HashMap<BlockId, Vec<UndoEntry>>,
    /// Transactions on the best chain, by containing block.
    tx_index: HashMap<TxId, BlockId>,
    orphans: HashMap<BlockId, Vec<Arc<Block>>>,
    orphan_ids: HashSet<BlockId>,
}

impl ChainStore {
    /// Builds the store around a genesis block: all-zeros parent, the
    /// configured initial target, and a coinbase that claims nothing.
    /// Genesis is exempt from proof of work and carries zero work itself.
    pub fn new(params: ChainParams) -> ChainStore {
        let coinbase = Transaction::coinbase(0, vec![]).expect("empty coinbase");
        let header = super::block::BlockHeader {
            parent: BlockId::ZERO,
            tx_commitment: tx_commitment(coinbase.id(), &[]),
            target: params.initial_target,
            nonce: 0,
            height: 0,
            timestamp_ms: 0,
        };
        let genesis = Arc::new(Block::new(header, coinbase, vec![]));
        let gid = genesis.id();
        let mut utxo = UtxoSet::new();
        let cb_undo = utxo.apply(genesis.coinbase());
        let mut store = ChainStore {
            params,
            entries: HashMap::new(),
            genesis: gid,
            best: gid,
            best_chain: vec![gid],
            utxo,
            undo: HashMap::new(),
            tx_index: HashMap::new(),
            orphans: HashMap::new(),
            orphan_ids: HashSet::new(),
        };
        store.entries.insert(gid, BlockEntry { block: genesis.clone(), work: BigUint::ZERO });
        store.undo.insert(gid, vec![cb_undo]);
        store.tx_index.insert(genesis.coinbase().id(), gid);
        store
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn genesis_id(&self) -> BlockId {
        self.genesis
    }

    pub fn best_tip(&self) -> BlockId {
        self.best
    }

    pub fn best_height(&self) -> u64 {
        self.best_chain.len() as u64 - 1
    }

    pub fn best_work(&self) -> &BigUint {
        &self.entries[&self.best].work
    }

    pub fn tip_utxo(&self) -> &UtxoSet {
        &self.utxo
    }

    pub fn block(&self, id: &BlockId) -> Option<&Arc<Block>> {
        self.entries.get(id).map(|e| &e.block)
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn cumulative_work(&self, id: &BlockId) -> Option<&BigUint> {
        self.entries.get(id).map(|e| &e.work)
    }

    /// Best-chain ids from genesis to tip, indexed by height.
    pub fn best_chain(&self) -> &[BlockId] {
        &self.best_chain
    }

    pub fn on_best_chain(&self, id: &BlockId) -> bool {
        match self.entries.get(id) {
            Some(e) => self.best_chain.get(e.block.height() as usize) == Some(id),
            None => false,
        }
    }

    /// Best-chain block containing `tx`, if any.
    pub fn tx_block(&self, tx: &TxId) -> Option<&BlockId> {
        self.tx_index.get(tx)
    }

    /// Confirmation count on the best chain: 1 for a tx in the tip block.
    pub fn confirmations(&self, tx: &TxId) -> Option<u64> {
        let bid = self.tx_index.get(tx)?;
        let h = self.entries[bid].block.height();
        Some(self.best_height() - h + 1)
    }

    /// The target a child of `parent` must carry. Outside retarget
    /// boundaries that is the parent's own target; at a boundary (height
    /// divisible by the window) the target scales by observed span over
    /// desired span, clamped to a factor of four per step.
    pub fn expected_target(&self, parent: &BlockId) -> Result<Target, BlockError> {
        let p = self.entries.get(parent).ok_or(BlockError::UnknownParent)?;
        let w = self.params.retarget.window;
        let height = p.block.height() + 1;
        let parent_target = p.block.header().target;
        if w == 0 || height % w != 0 {
            return Ok(parent_target);
        }
        // Anchor one full window above the parent; the first boundary
        // reaches genesis and spans one interval less, a small one-off
        // bias that the next window corrects.
        let anchor_height = (height - 1).saturating_sub(w);
        let anchor = self.ancestor_at(parent, anchor_height).expect("anchor below parent");
        let span_ms =
            p.block.timestamp_ms().saturating_sub(self.entries[&anchor].block.timestamp_ms());
        Ok(retarget_step(parent_target, span_ms, w, self.params.retarget.desired_interval_ms))
    }

    /// Walks parent links from `from` down to `height`.
    pub fn ancestor_at(&self, from: &BlockId, height: u64) -> Option<BlockId> {
        let mut cur = *from;
        loop {
            let e = self.entries.get(&cur)?;
            if e.block.height() == height {
                return Some(cur);
            }
            if e.block.height() < height {
                return None;
            }
            cur = e.block.parent();
        }
    }

    /// Full validity check of `block` against its parent's state. The
    /// parent must already be connected.
    pub fn validate_block(&self, block: &Block) -> Result<(), BlockError> {
        let parent = self.entries.get(&block.parent()).ok_or(BlockError::UnknownParent)?;
        let want_height = parent.block.height() + 1;
        if block.height() != want_height {
            return Err(BlockError::WrongHeight { got: block.height(), want: want_height });
        }
        if block.header().target != self.expected_target(&block.parent())? {
            return Err(BlockError::WrongTarget);
        }
        if !check_pow(block.header()) {
            return Err(BlockError::BadPow);
        }
        if block.header().tx_commitment != tx_commitment(block.coinbase().id(), block.txs()) {
            return Err(BlockError::BadCommitment);
        }
        if !block.coinbase().is_coinbase() {
            return Err(BlockError::BadCoinbase("not a coinbase transaction".into()));
        }
        if block.coinbase().coinbase_height() != Some(block.height()) {
            return Err(BlockError::BadCoinbase(format!(
                "height tag {:?} != block height {}",
                block.coinbase().coinbase_height(),
                block.height()
            )));
        }
        if block.txs().len() > self.params.max_block_txs {
            return Err(BlockError::TooManyTxs {
                got: block.txs().len(),
                max: self.params.max_block_txs,
            });
        }
        if block.parent() == self.best {
            self.validate_txs(&self.utxo, block)
        } else {
            let state = self.state_at(&block.parent()).expect("parent state");
            self.validate_txs(&state, block)
        }
    }

    /// Sequential transaction validation over a copy-on-write overlay:
    /// coinbase outputs land first, then each transfer must be valid given
    /// everything before it. An in-block double spend therefore surfaces
    /// as `MissingUtxo` on the later transaction.
    fn validate_txs(&self, base: &UtxoSet, block: &Block) -> Result<(), BlockError> {
        let mut overlay = Overlay { base, spent: HashSet::new(), created: HashMap::new() };
        overlay.add_outputs(block.coinbase());
        let mut fees = Amount::ZERO;
        for (index, tx) in block.txs().iter().enumerate() {
            if tx.is_coinbase() {
                return Err(BlockError::BadCoinbase(format!(
                    "coinbase at tx position {index}"
                )));
            }
            let fee = validate_transaction(tx.as_ref(), &overlay)
                .map_err(|source| BlockError::InvalidTx { index, source })?;
            fees = fees.checked_add(fee).ok_or(BlockError::AmountOverflow)?;
            for input in tx.inputs() {
                overlay.spent.insert(input.outpoint);
            }
            overlay.add_outputs(tx);
        }
        let allowed = self
            .params
            .reward
            .reward(block.height())
            .checked_add(fees)
            .ok_or(BlockError::AmountOverflow)?;
        let claimed = block.coinbase().output_total().ok_or(BlockError::AmountOverflow)?;
        if claimed > allowed {
            return Err(BlockError::ExcessCoinbase { claimed, allowed });
        }
        Ok(())
    }

    /// Validates and stores a block, then updates the best tip if the
    /// block's branch now carries strictly the most work.
    pub fn connect_block(&mut self, block: Arc<Block>) -> Result<ConnectOutcome, BlockError> {
        let id = block.id();
        if self.entries.contains_key(&id) || self.orphan_ids.contains(&id) {
            return Err(BlockError::Duplicate);
        }
        if !self.entries.contains_key(&block.parent()) {
            if self.orphan_ids.len() < self.params.orphan_limit {
                self.orphan_ids.insert(id);
                self.orphans.entry(block.parent()).or_default().push(block);
            } else {
                log::warn!("orphan buffer full, dropping block {}", id.short());
            }
            return Ok(ConnectOutcome::Orphaned);
        }
        self.validate_block(&block)?;
        let work = &self.entries[&block.parent()].work + block.header().target.work();
        let wins = work > self.entries[&self.best].work;
        let extends_best = block.parent() == self.best;
        self.entries.insert(id, BlockEntry { block: block.clone(), work });
        if extends_best {
            self.apply_tip_block(&block);
            Ok(ConnectOutcome::ExtendedBest)
        } else if wins {
            let (depth, returned_txs) = self.reorg_to(id);
            Ok(ConnectOutcome::Reorganized { depth, returned_txs })
        } else {
            Ok(ConnectOutcome::CreatedFork)
        }
    }

    /// `connect_block`, then repeatedly connects any buffered orphans whose
    /// parent just arrived. Returns every (block, outcome) in connection
    /// order; buffered orphans that turn out invalid are dropped.
    pub fn connect_recursive(
        &mut self,
        block: Arc<Block>,
    ) -> Result<Vec<(BlockId, ConnectOutcome)>, BlockError> {
        let id = block.id();
        let first = self.connect_block(block)?;
        let orphaned = matches!(first, ConnectOutcome::Orphaned);
        let mut out = vec![(id, first)];
        if orphaned {
            return Ok(out);
        }
        let mut queue = vec![id];
        while let Some(parent) = queue.pop() {
            for child in self.take_orphans(&parent) {
                let cid = child.id();
                match self.connect_block(child) {
                    Ok(outcome) => {
                        out.push((cid, outcome));
                        queue.push(cid);
                    }
                    Err(e) => log::warn!("dropping invalid orphan {}: {e}", cid.short()),
                }
            }
        }
        Ok(out)
    }

    fn take_orphans(&mut self, parent: &BlockId) -> Vec<Arc<Block>> {
        let children = self.orphans.remove(parent).unwrap_or_default();
        for c in &children {
            self.orphan_ids.remove(&c.id());
        }
        children
    }

    pub fn orphan_count(&self) -> usize {
        self.orphan_ids.len()
    }

    /// Reconstructs the UTXO set as of `block`, which may sit on any
    /// branch: roll the tip state back to the fork point, then replay the
    /// side branch. Linear in reorg depth plus one UTXO clone.
    pub fn state_at(&self, block: &BlockId) -> Option<UtxoSet> {
        if !self.entries.contains_key(block) {
            return None;
        }
        let mut side = Vec::new();
        let mut cur = *block;
        while !self.on_best_chain(&cur) {
            let e = &self.entries[&cur];
            side.push(e.block.clone());
            cur = e.block.parent();
        }
        let meet = self.entries[&cur].block.height();
        let mut state = self.utxo.clone();
        for h in ((meet + 1)..=self.best_height()).rev() {
            let bid = self.best_chain[h as usize];
            let b = self.entries[&bid].block.clone();
            let undos = self.undo[&bid].clone();
            revert_block(&mut state, &b, undos);
        }
        for b in side.iter().rev() {
            apply_block(&mut state, b);
        }
        Some(state)
    }

    /// Applies a validated block on top of the current best tip.
    fn apply_tip_block(&mut self, block: &Arc<Block>) {
        let id = block.id();
        let mut undos = Vec::with_capacity(1 + block.txs().len());
        undos.push(self.utxo.apply(block.coinbase()));
        self.tx_index.insert(block.coinbase().id(), id);
        for tx in block.txs() {
            undos.push(self.utxo.apply(tx));
            self.tx_index.insert(tx.id(), id);
        }
        self.undo.insert(id, undos);
        self.best_chain.push(id);
        self.best = id;
    }

    fn disconnect_tip_block(&mut self) -> Arc<Block> {
        let id = self.best_chain.pop().expect("never disconnect genesis");
        let block = self.entries[&id].block.clone();
        let undos = self.undo.remove(&id).expect("undo data for best-chain block");
        revert_block(&mut self.utxo, &block, undos);
        self.tx_index.remove(&block.coinbase().id());
        for tx in block.txs() {
            self.tx_index.remove(&tx.id());
        }
        self.best = *self.best_chain.last().expect("genesis stays");
        block
    }

    fn reorg_to(&mut self, new_tip: BlockId) -> (u64, Vec<Arc<Transaction>>) {
        let mut side = Vec::new();
        let mut cur = new_tip;
        while !self.on_best_chain(&cur) {
            let e = &self.entries[&cur];
            side.push(e.block.clone());
            cur = e.block.parent();
        }
        let fork_height = self.entries[&cur].block.height();
        let depth = self.best_height() - fork_height;

        let mut rolled_back = Vec::new();
        while self.best_height() > fork_height {
            let block = self.disconnect_tip_block();
            rolled_back.extend(block.txs().iter().cloned());
        }
        let mut readded: HashSet<TxId> = HashSet::new();
        for b in side.iter().rev() {
            for tx in b.txs() {
                readded.insert(tx.id());
            }
            self.apply_tip_block(b);
        }
        debug_assert_eq!(self.best, new_tip);
        let returned: Vec<Arc<Transaction>> =
            rolled_back.into_iter().filter(|t| !readded.contains(&t.id())).collect();
        (depth, returned)
    }
}

/// Next-block target from the last `window` spans of the best chain,
/// regardless of boundary alignment. `None` if the chain is shorter than
/// the window. Same clamping as boundary retargets.
pub fn retarget(store: &ChainStore, window: u64, desired_interval_ms: u64) -> Option<Target> {
    if window == 0 || store.best_height() < window {
        return None;
    }
    let tip = store.block(&store.best_tip()).unwrap();
    let anchor_id = store.ancestor_at(&store.best_tip(), tip.height() - window)?;
    let anchor = store.block(&anchor_id).unwrap();
    let span = tip.timestamp_ms().saturating_sub(anchor.timestamp_ms());
    Some(retarget_step(tip.header().target, span, window, desired_interval_ms))
}

/// `new = old * observed_span / (window * desired)`, clamped to
/// [old/4, old*4] and then into the valid target range.
fn retarget_step(old: Target, span_ms: u64, window: u64, desired_ms: u64) -> Target {
    let old_n = old.to_biguint();
    let denom = window as u128 * desired_ms as u128;
    assert!(denom > 0, "retarget with zero desired interval");
    let raw = &old_n * span_ms / BigUint::from(denom);
    let lo = &old_n / 4u8;
    let hi = &old_n * 4u8;
    let clamped = raw.clamp(lo, hi);
    Target::from_biguint(&clamped)
}

fn apply_block(state: &mut UtxoSet, block: &Block) {
    state.apply(block.coinbase());
    for tx in block.txs() {
        state.apply(tx);
    }
}

fn revert_block(state: &mut UtxoSet, block: &Block, mut undos: Vec<UndoEntry>) {
    assert_eq!(undos.len(), 1 + block.txs().len());
    for tx in block.txs().iter().rev() {
        state.revert(tx, undos.pop().unwrap());
    }
    state.revert(block.coinbase(), undos.pop().unwrap());
}

struct Overlay<'a> {
    base: &'a UtxoSet,
    spent: HashSet<OutPoint>,
    created: HashMap<OutPoint, TxOutput>,
}

impl Overlay<'_> {
    fn add_outputs(&mut self, tx: &Transaction) {
        let id = tx.id();
        for (i, out) in tx.outputs().iter().enumerate() {
            self.created.insert(OutPoint { tx: id, index: i as u32 }, *out);
        }
    }
}

impl UtxoView for Overlay<'_> {
    fn lookup(&self, op: &OutPoint) -> Option<&TxOutput> {
        if self.spent.contains(op) {
            return None;
        }
        self.created.get(op).or_else(|| self.base.lookup(op))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::block::{mine_block, BlockHeader, BlockTemplate};
    use crate::ledger::{pay, Address, KeyPair, SigScheme};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn kp(seed: u64) -> KeyPair {
        SigScheme::Simulated.generate_keypair(&mut rng(seed))
    }

    fn easy_params() -> ChainParams {
        ChainParams {
            initial_target: Target::pow2(250),
            reward: RewardSchedule { initial: Amount::coins(50), halving_interval: 100 },
            retarget: RetargetParams::OFF,
            max_block_txs: 10,
            orphan_limit: 8,
        }
    }

    /// Mines a child of `parent` claiming `claim` to `to` (nothing if
    /// zero), carrying `txs`.
    fn grow(
        store: &ChainStore,
        parent: &BlockId,
        ts: u64,
        txs: Vec<Arc<Transaction>>,
        claim: Amount,
        to: Address,
        r: &mut ChaCha12Rng,
    ) -> Arc<Block> {
        let height = store.block(parent).unwrap().height() + 1;
        let outputs = if claim.is_zero() { vec![] } else { vec![pay(to, claim)] };
        let template = BlockTemplate {
            parent: *parent,
            height,
            target: store.expected_target(parent).unwrap(),
            timestamp_ms: ts,
            coinbase: Transaction::coinbase(height, outputs).unwrap(),
            txs,
        };
        mine_block(template, u64::MAX, r).unwrap().block
    }

    #[test]
    fn extending_the_tip_accumulates_rewards_and_confirmations() {
        let mut store = ChainStore::new(easy_params());
        let mut r = rng(1);
        let alice = kp(1);
        let b1 = grow(&store, &store.best_tip(), 1000, vec![], Amount::coins(50), alice.address(), &mut r);
        let cb1 = b1.coinbase().id();
        assert_eq!(store.connect_block(b1.clone()).unwrap(), ConnectOutcome::ExtendedBest);
        for i in 2..=3u64 {
            let b = grow(&store, &store.best_tip(), 1000 * i, vec![], Amount::coins(50), alice.address(), &mut r);
            assert_eq!(store.connect_block(b).unwrap(), ConnectOutcome::ExtendedBest);
        }
        assert_eq!(store.best_height(), 3);
        assert_eq!(store.tip_utxo().total(), Amount::coins(150));
        assert_eq!(store.confirmations(&cb1), Some(3));
        assert_eq!(store.best_work(), &BigUint::from(3u32 * 64));
    }

    #[test]
    fn coinbase_may_claim_subsidy_plus_fees_and_not_more() {
        let mut store = ChainStore::new(easy_params());
        let mut r = rng(2);
        let (alice, bob, miner) = (kp(1), kp(2), kp(3));
        let b1 = grow(&store, &store.best_tip(), 1000, vec![], Amount::coins(50), alice.address(), &mut r);
        let funding = OutPoint { tx: b1.coinbase().id(), index: 0 };
        store.connect_block(b1).unwrap();

        // alice -> bob with a fee of 5 coins
        let t = Arc::new(
            Transaction::transfer_signed(&[(funding, &alice)], vec![pay(bob.address(), Amount::coins(45))])
                .unwrap(),
        );
        let parent = store.best_tip();
        let greedy = grow(&store, &parent, 2000, vec![t.clone()], Amount::coins(56), miner.address(), &mut r);
        assert_eq!(
            store.connect_block(greedy),
            Err(BlockError::ExcessCoinbase {
                claimed: Amount::coins(56),
                allowed: Amount::coins(55),
            })
        );
        let fair = grow(&store, &parent, 2000, vec![t], Amount::coins(55), miner.address(), &mut r);
        assert_eq!(store.connect_block(fair).unwrap(), ConnectOutcome::ExtendedBest);
        // Issuance is the two 50-coin subsidies; the fee moved from alice
        // to the miner inside the coinbase claim.
        assert_eq!(store.tip_utxo().total(), Amount::coins(100));
    }

    #[test]
    fn equal_work_keeps_first_seen_and_strictly_more_work_reorganizes() {
        let mut store = ChainStore::new(easy_params());
        let mut r = rng(3);
        let (alice, bob, m_a, m_b) = (kp(1), kp(2), kp(3), kp(4));
        let g = store.best_tip();

        let a1 = grow(&store, &g, 1000, vec![], Amount::coins(50), alice.address(), &mut r);
        store.connect_block(a1.clone()).unwrap();
        let spend = Arc::new(
            Transaction::transfer_signed(
                &[(OutPoint { tx: a1.coinbase().id(), index: 0 }, &alice)],
                vec![pay(bob.address(), Amount::coins(50))],
            )
            .unwrap(),
        );
        let a2 = grow(&store, &a1.id(), 2000, vec![spend.clone()], Amount::coins(50), m_a.address(), &mut r);
        store.connect_block(a2.clone()).unwrap();

        let b1 = grow(&store, &g, 1100, vec![], Amount::coins(50), m_b.address(), &mut r);
        assert_eq!(store.connect_block(b1.clone()).unwrap(), ConnectOutcome::CreatedFork);
        let b2 = grow(&store, &b1.id(), 2100, vec![], Amount::coins(50), m_b.address(), &mut r);
        assert_eq!(
            store.connect_block(b2.clone()).unwrap(),
            ConnectOutcome::CreatedFork,
            "equal cumulative work must not displace the incumbent"
        );
        assert_eq!(store.best_tip(), a2.id());

        let b3 = grow(&store, &b2.id(), 3100, vec![], Amount::coins(50), m_b.address(), &mut r);
        let outcome = store.connect_block(b3.clone()).unwrap();
        match outcome {
            ConnectOutcome::Reorganized { depth, returned_txs } => {
                assert_eq!(depth, 2);
                assert_eq!(returned_txs, vec![spend]);
            }
            other => panic!("expected reorg, got {other:?}"),
        }
        assert_eq!(store.best_tip(), b3.id());
        assert_eq!(store.best_height(), 3);
        assert_eq!(store.tip_utxo().total(), Amount::coins(150));
        assert_eq!(store.confirmations(&a2.coinbase().id()), None, "stale branch txs unindexed");
        assert!(store.on_best_chain(&b1.id()));
        assert!(!store.on_best_chain(&a1.id()));
    }

    #[test]
    fn transactions_present_on_both_branches_are_not_returned() {
        let mut store = ChainStore::new(easy_params());
        let mut r = rng(4);
        let (alice, bob, m) = (kp(1), kp(2), kp(3));
        let g = store.best_tip();
        let a1 = grow(&store, &g, 1000, vec![], Amount::coins(50), alice.address(), &mut r);
        store.connect_block(a1.clone()).unwrap();
        let spend = Arc::new(
            Transaction::transfer_signed(
                &[(OutPoint { tx: a1.coinbase().id(), index: 0 }, &alice)],
                vec![pay(bob.address(), Amount::coins(50))],
            )
            .unwrap(),
        );
        // Same tx confirmed on both branches above a1.
        let a2 = grow(&store, &a1.id(), 2000, vec![spend.clone()], Amount::coins(50), m.address(), &mut r);
        store.connect_block(a2).unwrap();
        let b2 = grow(&store, &a1.id(), 2100, vec![spend.clone()], Amount::coins(50), m.address(), &mut r);
        store.connect_block(b2.clone()).unwrap();
        let b3 = grow(&store, &b2.id(), 3100, vec![], Amount::coins(50), m.address(), &mut r);
        match store.connect_block(b3).unwrap() {
            ConnectOutcome::Reorganized { depth, returned_txs } => {
                assert_eq!(depth, 1);
                assert!(returned_txs.is_empty(), "tx re-included on the new branch");
            }
            other => panic!("expected reorg, got {other:?}"),
        }
        assert_eq!(store.confirmations(&spend.id()), Some(2));
    }

    #[test]
    fn orphans_buffer_until_their_parent_arrives() {
        let mut store = ChainStore::new(easy_params());
        let mut r = rng(5);
        let m = kp(1);
        let g = store.best_tip();
        let b1 = grow(&store, &g, 1000, vec![], Amount::coins(50), m.address(), &mut r);
        // Children built against a private copy so the public store never
        // sees the parents early.
        let mut scratch = store.clone();
        scratch.connect_block(b1.clone()).unwrap();
        let b2 = grow(&scratch, &b1.id(), 2000, vec![], Amount::coins(50), m.address(), &mut r);
        scratch.connect_block(b2.clone()).unwrap();
        let b3 = grow(&scratch, &b2.id(), 3000, vec![], Amount::coins(50), m.address(), &mut r);

        assert_eq!(store.connect_block(b3.clone()).unwrap(), ConnectOutcome::Orphaned);
        assert_eq!(store.connect_block(b2.clone()).unwrap(), ConnectOutcome::Orphaned);
        assert_eq!(store.orphan_count(), 2);
        let connected = store.connect_recursive(b1.clone()).unwrap();
        assert_eq!(
            connected,
            vec![
                (b1.id(), ConnectOutcome::ExtendedBest),
                (b2.id(), ConnectOutcome::ExtendedBest),
                (b3.id(), ConnectOutcome::ExtendedBest),
            ]
        );
        assert_eq!(store.best_tip(), b3.id());
        assert_eq!(store.orphan_count(), 0);
        assert_eq!(store.connect_block(b2), Err(BlockError::Duplicate));
    }

    #[test]
    fn rejects_malformed_blocks() {
        let mut store = ChainStore::new(easy_params());
        let mut r = rng(6);
        let m = kp(1);
        let g = store.best_tip();
        let good = grow(&store, &g, 1000, vec![], Amount::coins(50), m.address(), &mut r);

        // wrong height: header says 2 under a height-2 coinbase tag
        let bad_height = {
            let template = BlockTemplate {
                parent: g,
                height: 2,
                target: store.expected_target(&g).unwrap(),
                timestamp_ms: 1000,
                coinbase: Transaction::coinbase(2, vec![]).unwrap(),
                txs: vec![],
            };
            mine_block(template, u64::MAX, &mut r).unwrap().block
        };
        assert_eq!(
            store.connect_block(bad_height),
            Err(BlockError::WrongHeight { got: 2, want: 1 })
        );

        // wrong target: easier than the rule demands
        let bad_target = {
            let template = BlockTemplate {
                parent: g,
                height: 1,
                target: Target::pow2(252),
                timestamp_ms: 1000,
                coinbase: Transaction::coinbase(1, vec![]).unwrap(),
                txs: vec![],
            };
            mine_block(template, u64::MAX, &mut r).unwrap().block
        };
        assert_eq!(store.connect_block(bad_target), Err(BlockError::WrongTarget));

        // no proof of work: correctly-shaped header that was never mined,
        // against a target nothing passes by accident
        let mut hard = easy_params();
        hard.initial_target = Target::pow2(8);
        let mut hard_store = ChainStore::new(hard);
        let cb = Transaction::coinbase(1, vec![]).unwrap();
        let header = BlockHeader {
            parent: hard_store.best_tip(),
            tx_commitment: tx_commitment(cb.id(), &[]),
            target: Target::pow2(8),
            nonce: 12345,
            height: 1,
            timestamp_ms: 1000,
        };
        let unmined = Arc::new(Block::new(header, cb, vec![]));
        assert_eq!(hard_store.connect_block(unmined), Err(BlockError::BadPow));

        // commitment mismatch: header from `good`, body with an extra tx
        let alien = Arc::new(
            Transaction::coinbase(9, vec![pay(m.address(), Amount(1))]).unwrap(),
        );
        let franken = Arc::new(Block::new(*good.header(), good.coinbase().clone(), vec![alien]));
        assert_eq!(store.connect_block(franken), Err(BlockError::BadCommitment));

        // coinbase tagged with the wrong height
        let bad_cb = {
            let template = BlockTemplate {
                parent: g,
                height: 1,
                target: store.expected_target(&g).unwrap(),
                timestamp_ms: 1000,
                coinbase: Transaction::coinbase(7, vec![]).unwrap(),
                txs: vec![],
            };
            mine_block(template, u64::MAX, &mut r).unwrap().block
        };
        assert!(matches!(store.connect_block(bad_cb), Err(BlockError::BadCoinbase(_))));

        // a transfer resting on nothing
        let ghost = OutPoint { tx: TxId([9; 32]), index: 0 };
        let alice = kp(2);
        let phantom = Arc::new(
            Transaction::transfer_signed(&[(ghost, &alice)], vec![pay(m.address(), Amount(1))])
                .unwrap(),
        );
        let bad_tx = grow(&store, &g, 1000, vec![phantom], Amount::coins(50), m.address(), &mut r);
        assert_eq!(
            store.connect_block(bad_tx),
            Err(BlockError::InvalidTx { index: 0, source: ValidationError::MissingUtxo(ghost) })
        );

        // the good block still connects after all that
        assert_eq!(store.connect_block(good).unwrap(), ConnectOutcome::ExtendedBest);
    }

    #[test]
    fn in_block_double_spend_fails_on_the_second_tx() {
        let mut store = ChainStore::new(easy_params());
        let mut r = rng(7);
        let (alice, bob, carol, m) = (kp(1), kp(2), kp(3), kp(4));
        let b1 = grow(&store, &store.best_tip(), 1000, vec![], Amount::coins(50), alice.address(), &mut r);
        let funding = OutPoint { tx: b1.coinbase().id(), index: 0 };
        store.connect_block(b1).unwrap();
        let to_bob = Arc::new(
            Transaction::transfer_signed(&[(funding, &alice)], vec![pay(bob.address(), Amount::coins(50))])
                .unwrap(),
        );
        let to_carol = Arc::new(
            Transaction::transfer_signed(&[(funding, &alice)], vec![pay(carol.address(), Amount::coins(50))])
                .unwrap(),
        );
        let evil = grow(
            &store,
            &store.best_tip(),
            2000,
            vec![to_bob, to_carol],
            Amount::coins(50),
            m.address(),
            &mut r,
        );
        assert_eq!(
            store.connect_block(evil),
            Err(BlockError::InvalidTx { index: 1, source: ValidationError::MissingUtxo(funding) })
        );
    }

    #[test]
    fn retarget_scales_by_observed_span_with_clamps() {
        let mut params = easy_params();
        params.initial_target = Target::pow2(248);
        params.retarget = RetargetParams { window: 4, desired_interval_ms: 1000 };
        let mut store = ChainStore::new(params.clone());
        let mut r = rng(8);
        let m = kp(1);
        // Blocks land every 2000 ms, twice the desired interval.
        for i in 1..=3u64 {
            let b = grow(&store, &store.best_tip(), 2000 * i, vec![], Amount::coins(50), m.address(), &mut r);
            store.connect_block(b).unwrap();
        }
        // Boundary at height 4: span 6000 over target 4000 gives x1.5,
        // and 1.5 * 2^248 is 0x0180 followed by zeros.
        let mut want = [0u8; 32];
        want[0] = 0x01;
        want[1] = 0x80;
        assert_eq!(store.expected_target(&store.best_tip()).unwrap(), Target(want));

        // A block still carrying the parent target is rejected.
        let stale = {
            let template = BlockTemplate {
                parent: store.best_tip(),
                height: 4,
                target: Target::pow2(248),
                timestamp_ms: 8000,
                coinbase: Transaction::coinbase(4, vec![]).unwrap(),
                txs: vec![],
            };
            mine_block(template, u64::MAX, &mut r).unwrap().block
        };
        assert_eq!(store.connect_block(stale), Err(BlockError::WrongTarget));

        let b4 = grow(&store, &store.best_tip(), 8000, vec![], Amount::coins(50), m.address(), &mut r);
        store.connect_block(b4).unwrap();
        // Off-boundary heights inherit the parent target.
        assert_eq!(store.expected_target(&store.best_tip()).unwrap(), Target(want));

        // Clamps: a crawl caps the step at x4, a sprint floors it at /4.
        let mut slow = ChainStore::new(params.clone());
        for i in 1..=3u64 {
            let b = grow(&slow, &slow.best_tip(), 1_000_000 * i, vec![], Amount::coins(50), m.address(), &mut rng(9));
            slow.connect_block(b).unwrap();
        }
        assert_eq!(slow.expected_target(&slow.best_tip()).unwrap(), Target::pow2(250));

        let mut fast = ChainStore::new(params);
        for i in 1..=3u64 {
            let b = grow(&fast, &fast.best_tip(), i, vec![], Amount::coins(50), m.address(), &mut rng(10));
            fast.connect_block(b).unwrap();
        }
        assert_eq!(fast.expected_target(&fast.best_tip()).unwrap(), Target::pow2(246));
    }

    #[test]
    fn retarget_hint_over_evenly_spaced_blocks_keeps_the_target() {
        let mut store = ChainStore::new(easy_params());
        let mut r = rng(11);
        let m = kp(1);
        for i in 1..=5u64 {
            let b = grow(&store, &store.best_tip(), 1000 * i, vec![], Amount::coins(50), m.address(), &mut r);
            store.connect_block(b).unwrap();
        }
        assert_eq!(retarget(&store, 4, 1000), Some(Target::pow2(250)));
        assert_eq!(retarget(&store, 6, 1000), None, "chain shorter than window");
        // Running twice as fast as desired halves the target.
        assert_eq!(retarget(&store, 4, 2000), Some(Target::pow2(249)));
    }

    #[test]
    fn state_at_reconstructs_any_branch() {
        let mut store = ChainStore::new(easy_params());
        let mut r = rng(12);
        let (alice, bob, m) = (kp(1), kp(2), kp(3));
        let g = store.best_tip();
        let a1 = grow(&store, &g, 1000, vec![], Amount::coins(50), alice.address(), &mut r);
        store.connect_block(a1.clone()).unwrap();
        let spend = Arc::new(
            Transaction::transfer_signed(
                &[(OutPoint { tx: a1.coinbase().id(), index: 0 }, &alice)],
                vec![pay(bob.address(), Amount::coins(50))],
            )
            .unwrap(),
        );
        let a2 = grow(&store, &a1.id(), 2000, vec![], Amount::coins(50), m.address(), &mut r);
        store.connect_block(a2.clone()).unwrap();
        let a3 = grow(&store, &a2.id(), 3000, vec![], Amount::coins(50), m.address(), &mut r);
        store.connect_block(a3).unwrap();
        let b2 = grow(&store, &a1.id(), 2100, vec![spend], Amount::coins(50), m.address(), &mut r);
        store.connect_block(b2.clone()).unwrap();

        // An independent store that walked genesis -> a1 -> b2 directly.
        let mut direct = ChainStore::new(easy_params());
        direct.connect_block(a1).unwrap();
        direct.connect_block(b2.clone()).unwrap();
        assert_eq!(store.state_at(&b2.id()).unwrap(), *direct.tip_utxo());
        assert_eq!(store.state_at(&store.best_tip()).unwrap(), *store.tip_utxo());
    }

    #[test]
    fn insertion_order_does_not_change_the_winner() {
        let mut builder = ChainStore::new(easy_params());
        let mut r = rng(13);
        let m = kp(1);
        let g = builder.best_tip();
        let mut blocks = Vec::new();
        // Main chain of 4.
        let mut parent = g;
        for i in 1..=4u64 {
            let b = grow(&builder, &parent, 1000 * i, vec![], Amount::coins(50), m.address(), &mut r);
            builder.connect_block(b.clone()).unwrap();
            parent = b.id();
            blocks.push(b);
        }
        // Side branch of 2 off the first block.
        let mut parent = blocks[0].id();
        for i in 1..=2u64 {
            let b = grow(&builder, &parent, 1500 * i, vec![], Amount::coins(50), m.address(), &mut r);
            builder.connect_block(b.clone()).unwrap();
            parent = b.id();
            blocks.push(b);
        }
        let want_tip = builder.best_tip();
        let want_utxo = builder.tip_utxo().clone();

        let mut shuffle_rng = rng(14);
        for _ in 0..6 {
            blocks.shuffle(&mut shuffle_rng);
            let mut store = ChainStore::new(easy_params());
            for b in &blocks {
                store.connect_recursive(b.clone()).unwrap();
            }
            assert_eq!(store.best_tip(), want_tip);
            assert_eq!(store.tip_utxo(), &want_utxo);
            assert_eq!(store.orphan_count(), 0);
        }
    }

    #[test]
    fn cloned_stores_evolve_independently() {
        let mut store = ChainStore::new(easy_params());
        let mut r = rng(15);
        let m = kp(1);
        let b1 = grow(&store, &store.best_tip(), 1000, vec![], Amount::coins(50), m.address(), &mut r);
        store.connect_block(b1).unwrap();
        let mut fork = store.clone();
        let b2 = grow(&fork, &fork.best_tip(), 2000, vec![], Amount::coins(50), m.address(), &mut r);
        fork.connect_block(b2).unwrap();
        assert_eq!(store.best_height(), 1);
        assert_eq!(fork.best_height(), 2);
    }
}
