//! The event trace: one JSON object per line, in event order.
//!
//! The first line is always `meta`. Block discovery lines carry the full
//! block skeleton (parent, height, contained tx ids), so a trace file alone
//! reconstructs every chain any node held at any time. Identical config and
//! seed produce a byte-identical file; that property is part of the test
//! suite, so nothing nondeterministic (timestamps, map order, float noise)
//! may leak in here.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use crate::chain::{BlockId, Target};
use crate::ledger::{Amount, SigScheme, TxId};

pub const TRACE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "snake_case")]
pub enum TraceEvent {
    Meta {
        schema: u32,
        seed: u64,
        scheme: SigScheme,
        nodes: usize,
        spy: Option<usize>,
    },
    /// A wallet injected a fresh payment at its home node.
    TxArrival {
        t: f64,
        seq: u64,
        node: usize,
        tx: TxId,
        user: usize,
        amount: Amount,
        fee: Amount,
    },
    /// An arrival fizzled because the paying user had nothing to spend.
    TxSkipped { t: f64, seq: u64, node: usize, user: usize, reason: String },
    /// First acceptance of a transaction into a node's mempool.
    TxSeen { t: f64, seq: u64, node: usize, tx: TxId },
    /// A transaction message landed, duplicate or not.
    TxRecv { t: f64, seq: u64, node: usize, from: usize, tx: TxId },
    TxRejected { t: f64, seq: u64, node: usize, tx: TxId, reason: String },
    BlockFound {
        t: f64,
        seq: u64,
        node: usize,
        block: BlockId,
        parent: BlockId,
        height: u64,
        target: Target,
        attempts: u64,
        txs: Vec<TxId>,
        coinbase: TxId,
    },
    BlockRecv { t: f64, seq: u64, node: usize, from: usize, block: BlockId },
    /// A block was wired into a node's store. `tip`/`tip_height` describe
    /// the node's best chain right afterwards.
    BlockConnect {
        t: f64,
        seq: u64,
        node: usize,
        block: BlockId,
        outcome: ConnectKind,
        /// Blocks disconnected, for reorgs.
        depth: Option<u64>,
        tip: BlockId,
        tip_height: u64,
    },
    HashrateScale { t: f64, seq: u64, scale: f64 },
    /// Final tip per node, emitted once the event queue drains.
    NodeTip { t: f64, seq: u64, node: usize, tip: BlockId, height: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectKind {
    ExtendedBest,
    CreatedFork,
    Reorganized,
    Orphaned,
}

/// Block skeleton as recorded by its discovery line.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockInfo {
    pub parent: BlockId,
    pub height: u64,
    pub found_by: usize,
    pub t: f64,
    pub txs: Vec<TxId>,
    pub coinbase: TxId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxOrigin {
    pub user: usize,
    pub node: usize,
    pub t: f64,
    pub amount: Amount,
    pub fee: Amount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfStatus {
    /// The node had not heard of the transaction at that time.
    UnknownTx,
    /// Known but not on the node's best chain.
    Unconfirmed,
    /// On the node's best chain, at this depth (tip block = 1).
    Confirmed(u64),
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// An ordered event log plus indexes for time-travel queries.
#[derive(Debug, Clone, Default)]
pub struct EventTrace {
    events: Vec<TraceEvent>,
    blocks: HashMap<BlockId, BlockInfo>,
    tx_blocks: HashMap<TxId, Vec<BlockId>>,
    origins: HashMap<TxId, TxOrigin>,
    /// Per node: (t, seq, tip, tip_height) after every connect, in order.
    connects: Vec<Vec<(f64, u64, BlockId, u64)>>,
    first_seen: HashMap<(usize, TxId), f64>,
    final_tips: Vec<(BlockId, u64)>,
}

impl EventTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, ev: TraceEvent) {
        match &ev {
            TraceEvent::Meta { nodes, spy, .. } => {
                let total = nodes + usize::from(spy.is_some());
                self.connects = vec![Vec::new(); total];
                self.final_tips = vec![(BlockId::ZERO, 0); total];
            }
            TraceEvent::TxArrival { t, node, tx, user, amount, fee, .. } => {
                self.origins.insert(
                    *tx,
                    TxOrigin { user: *user, node: *node, t: *t, amount: *amount, fee: *fee },
                );
            }
            TraceEvent::TxSeen { t, node, tx, .. } => {
                self.first_seen.entry((*node, *tx)).or_insert(*t);
            }
            TraceEvent::BlockFound { t, node, block, parent, height, txs, coinbase, .. } => {
                for tx in txs {
                    self.tx_blocks.entry(*tx).or_default().push(*block);
                }
                self.tx_blocks.entry(*coinbase).or_default().push(*block);
                self.blocks.insert(
                    *block,
                    BlockInfo {
                        parent: *parent,
                        height: *height,
                        found_by: *node,
                        t: *t,
                        txs: txs.clone(),
                        coinbase: *coinbase,
                    },
                );
            }
            TraceEvent::BlockConnect { t, seq, node, tip, tip_height, .. } => {
                if let Some(list) = self.connects.get_mut(*node) {
                    list.push((*t, *seq, *tip, *tip_height));
                }
            }
            TraceEvent::NodeTip { node, tip, height, .. } => {
                if let Some(slot) = self.final_tips.get_mut(*node) {
                    *slot = (*tip, *height);
                }
            }
            _ => {}
        }
        self.events.push(ev);
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn meta(&self) -> Option<&TraceEvent> {
        self.events.first()
    }

    pub fn spy(&self) -> Option<usize> {
        match self.meta() {
            Some(TraceEvent::Meta { spy, .. }) => *spy,
            _ => None,
        }
    }

    pub fn node_count(&self) -> usize {
        match self.meta() {
            Some(TraceEvent::Meta { nodes, .. }) => *nodes,
            _ => 0,
        }
    }

    pub fn block_info(&self, id: &BlockId) -> Option<&BlockInfo> {
        self.blocks.get(id)
    }

    pub fn blocks(&self) -> &HashMap<BlockId, BlockInfo> {
        &self.blocks
    }

    pub fn origin(&self, tx: &TxId) -> Option<&TxOrigin> {
        self.origins.get(tx)
    }

    pub fn origins(&self) -> &HashMap<TxId, TxOrigin> {
        &self.origins
    }

    pub fn final_tip(&self, node: usize) -> Option<(BlockId, u64)> {
        self.final_tips.get(node).copied()
    }

    pub fn final_tips(&self) -> &[(BlockId, u64)] {
        &self.final_tips
    }

    /// The node's best tip as of time `at` (inclusive).
    pub fn tip_at(&self, node: usize, at: f64) -> Option<(BlockId, u64)> {
        let list = self.connects.get(node)?;
        let mut found = None;
        for &(t, _, tip, h) in list {
            if t > at {
                break;
            }
            found = Some((tip, h));
        }
        found
    }

    /// How deep `tx` sat in `node`'s best chain at time `at`. Walks the
    /// recorded block skeletons, so it works for any moment of the run,
    /// including across reorgs.
    pub fn confirmations_at(&self, tx: &TxId, node: usize, at: f64) -> ConfStatus {
        if let Some((tip, tip_h)) = self.tip_at(node, at) {
            if let Some(depth) = self.depth_in(tx, &tip, tip_h) {
                return ConfStatus::Confirmed(depth);
            }
        }
        let seen_by_then =
            self.first_seen.get(&(node, *tx)).is_some_and(|&t| t <= at);
        // Having connected a containing block (even one since reorged
        // away) also counts as having seen the transaction.
        let via_block = self.tx_blocks.get(tx).is_some_and(|blocks| {
            blocks.iter().any(|b| {
                self.connects.get(node).is_some_and(|list| {
                    list.iter()
                        .take_while(|&&(t, ..)| t <= at)
                        .any(|&(_, _, tip, tip_h)| self.depth_in_block(b, &tip, tip_h))
                })
            })
        });
        if seen_by_then || via_block {
            ConfStatus::Unconfirmed
        } else {
            ConfStatus::UnknownTx
        }
    }

    /// Depth of `tx` under the chain ending at `tip`, if any recorded
    /// containing block is `tip`'s ancestor (or `tip` itself).
    fn depth_in(&self, tx: &TxId, tip: &BlockId, tip_h: u64) -> Option<u64> {
        for cand in self.tx_blocks.get(tx)? {
            if self.depth_in_block(cand, tip, tip_h) {
                let h = self.blocks[cand].height;
                return Some(tip_h - h + 1);
            }
        }
        None
    }

    fn depth_in_block(&self, cand: &BlockId, tip: &BlockId, tip_h: u64) -> bool {
        let Some(info) = self.blocks.get(cand) else { return false };
        if info.height > tip_h {
            return false;
        }
        let mut cur = *tip;
        let mut cur_h = tip_h;
        while cur_h > info.height {
            match self.blocks.get(&cur) {
                Some(b) => {
                    cur = b.parent;
                    cur_h -= 1;
                }
                None => return false,
            }
        }
        cur == *cand
    }

    /// Earliest time `node`'s chain shows `tx` at depth >= `k`, if it ever
    /// does.
    pub fn time_to_confirmations(&self, tx: &TxId, node: usize, k: u64) -> Option<f64> {
        let list = self.connects.get(node)?;
        for &(t, _, tip, tip_h) in list {
            if let Some(d) = self.depth_in(tx, &tip, tip_h) {
                if d >= k {
                    return Some(t);
                }
            }
        }
        None
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for ev in &self.events {
            serde_json::to_writer(&mut w, ev)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<EventTrace, TraceError> {
        let mut trace = EventTrace::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: TraceEvent = serde_json::from_str(&line)
                .map_err(|e| TraceError::Parse { line: i + 1, message: e.to_string() })?;
            trace.record(ev);
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bid(n: u8) -> BlockId {
        BlockId([n; 32])
    }

    fn txid(n: u8) -> TxId {
        TxId([n; 32])
    }

    fn sample_trace() -> EventTrace {
        let mut tr = EventTrace::new();
        tr.record(TraceEvent::Meta {
            schema: TRACE_SCHEMA,
            seed: 7,
            scheme: SigScheme::Simulated,
            nodes: 2,
            spy: None,
        });
        tr.record(TraceEvent::TxArrival {
            t: 1.0,
            seq: 1,
            node: 0,
            tx: txid(10),
            user: 3,
            amount: Amount(500),
            fee: Amount(10),
        });
        tr.record(TraceEvent::TxSeen { t: 1.0, seq: 2, node: 0, tx: txid(10) });
        // Block 1 at height 1 contains the tx; block 2 extends it.
        tr.record(TraceEvent::BlockFound {
            t: 5.0,
            seq: 3,
            node: 0,
            block: bid(1),
            parent: bid(0),
            height: 1,
            target: Target::pow2(248),
            attempts: 100,
            txs: vec![txid(10)],
            coinbase: txid(91),
        });
        tr.record(TraceEvent::BlockConnect {
            t: 5.0,
            seq: 4,
            node: 0,
            block: bid(1),
            outcome: ConnectKind::ExtendedBest,
            depth: None,
            tip: bid(1),
            tip_height: 1,
        });
        tr.record(TraceEvent::BlockFound {
            t: 9.0,
            seq: 5,
            node: 0,
            block: bid(2),
            parent: bid(1),
            height: 2,
            target: Target::pow2(248),
            attempts: 3,
            txs: vec![],
            coinbase: txid(92),
        });
        tr.record(TraceEvent::BlockConnect {
            t: 9.0,
            seq: 6,
            node: 0,
            block: bid(2),
            outcome: ConnectKind::ExtendedBest,
            depth: None,
            tip: bid(2),
            tip_height: 2,
        });
        tr.record(TraceEvent::NodeTip { t: 10.0, seq: 7, node: 0, tip: bid(2), height: 2 });
        tr.record(TraceEvent::NodeTip { t: 10.0, seq: 8, node: 1, tip: bid(0), height: 0 });
        tr
    }

    #[test]
    fn confirmations_progress_with_the_chain() {
        let tr = sample_trace();
        let tx = txid(10);
        assert_eq!(tr.confirmations_at(&tx, 0, 0.5), ConfStatus::UnknownTx);
        assert_eq!(tr.confirmations_at(&tx, 0, 1.0), ConfStatus::Unconfirmed);
        assert_eq!(tr.confirmations_at(&tx, 0, 5.0), ConfStatus::Confirmed(1));
        assert_eq!(tr.confirmations_at(&tx, 0, 9.5), ConfStatus::Confirmed(2));
        // Node 1 never saw anything.
        assert_eq!(tr.confirmations_at(&tx, 1, 9.5), ConfStatus::UnknownTx);
        assert_eq!(tr.time_to_confirmations(&tx, 0, 2), Some(9.0));
        assert_eq!(tr.time_to_confirmations(&tx, 0, 3), None);
    }

    #[test]
    fn jsonl_roundtrip_preserves_events_and_indexes() {
        let tr = sample_trace();
        let mut buf = Vec::new();
        tr.write_jsonl(&mut buf).unwrap();
        let back = EventTrace::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.events(), tr.events());
        assert_eq!(back.final_tip(0), Some((bid(2), 2)));
        assert_eq!(back.confirmations_at(&txid(10), 0, 9.5), ConfStatus::Confirmed(2));

        // And the bytes themselves are stable under rewrite.
        let mut buf2 = Vec::new();
        back.write_jsonl(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn awkward_floats_survive_the_jsonl_roundtrip_bit_exactly() {
        // 17-digit times exercise the parser's full-precision path; losing
        // even one ulp skews replay-derived statistics.
        let mut tr = EventTrace::new();
        tr.record(TraceEvent::Meta {
            schema: TRACE_SCHEMA,
            seed: 0,
            scheme: SigScheme::Simulated,
            nodes: 1,
            spy: None,
        });
        for (i, t) in [24.579588796515274_f64, 0.1 + 0.2, 1e-300, 90.41370059466277]
            .into_iter()
            .enumerate()
        {
            tr.record(TraceEvent::TxSeen { t, seq: i as u64 + 1, node: 0, tx: txid(i as u8) });
        }
        let mut buf = Vec::new();
        tr.write_jsonl(&mut buf).unwrap();
        let back = EventTrace::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.events(), tr.events());
    }

    #[test]
    fn bad_lines_are_reported_with_their_number() {
        let data = b"{\"ev\":\"meta\",\"schema\":1,\"seed\":0,\"scheme\":\"simulated\",\"nodes\":1,\"spy\":null}\nnot json\n";
        match EventTrace::read_jsonl(&data[..]) {
            Err(TraceError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
