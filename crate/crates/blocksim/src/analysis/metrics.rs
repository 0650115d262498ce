//! Run-level health numbers distilled from a trace: who mined what, how
//! much work went stale, how long payments took to settle, and how deep
//! reorgs cut.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::netsim::{ConnectKind, EventTrace, TraceEvent};

pub const CONFIRMATION_DEPTHS: std::ops::RangeInclusive<u64> = 1..=6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WaitStat {
    pub mean: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    /// Blocks each node discovered, whether or not they survived.
    pub blocks_found: BTreeMap<usize, u64>,
    /// Of those, how many sit on the reference chain (node 0's final tip).
    pub blocks_on_chain: BTreeMap<usize, u64>,
    pub total_blocks: u64,
    pub chain_blocks: u64,
    /// Fraction of discovered blocks that did not make the reference chain.
    pub stale_rate: f64,
    /// Mean wait from injection to depth k, at the injecting node.
    pub confirmation_wait: BTreeMap<u64, WaitStat>,
    /// Reorg depth -> occurrences, over all honest nodes.
    pub reorg_depths: BTreeMap<u64, u64>,
    /// Mean spacing between consecutive reference-chain discoveries.
    pub mean_block_interval: Option<f64>,
}

impl Metrics {
    pub fn found_fraction(&self, node: usize) -> f64 {
        if self.total_blocks == 0 {
            return 0.0;
        }
        *self.blocks_found.get(&node).unwrap_or(&0) as f64 / self.total_blocks as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "metric,key,value")?;
        writeln!(w, "total_blocks,,{}", self.total_blocks)?;
        writeln!(w, "chain_blocks,,{}", self.chain_blocks)?;
        writeln!(w, "stale_rate,,{}", self.stale_rate)?;
        if let Some(iv) = self.mean_block_interval {
            writeln!(w, "block_interval_mean,,{iv}")?;
        }
        for (node, n) in &self.blocks_found {
            writeln!(w, "blocks_found,{node},{n}")?;
        }
        for (node, n) in &self.blocks_on_chain {
            writeln!(w, "blocks_on_chain,{node},{n}")?;
        }
        for (node, _) in &self.blocks_found {
            writeln!(w, "found_fraction,{node},{}", self.found_fraction(*node))?;
        }
        for (k, stat) in &self.confirmation_wait {
            writeln!(w, "confirmation_wait_mean,{k},{}", stat.mean)?;
            writeln!(w, "confirmation_wait_count,{k},{}", stat.count)?;
        }
        for (depth, n) in &self.reorg_depths {
            writeln!(w, "reorg_depth,{depth},{n}")?;
        }
        Ok(())
    }
}

/// Folds a finished trace into summary numbers. The reference chain is the
/// ancestry of node 0's final tip; any block off it counts as stale.
pub fn summarize(trace: &EventTrace) -> Metrics {
    let mut m = Metrics::default();

    let mut on_chain: std::collections::HashSet<_> = std::collections::HashSet::new();
    if let Some((tip, _)) = trace.final_tip(0) {
        let mut cur = tip;
        // Genesis predates the trace, so the walk stops where records end.
        while let Some(info) = trace.block_info(&cur) {
            on_chain.insert(cur);
            cur = info.parent;
        }
    }

    let mut chain_times: Vec<f64> = Vec::new();
    for (id, info) in trace.blocks() {
        m.total_blocks += 1;
        *m.blocks_found.entry(info.found_by).or_insert(0) += 1;
        if on_chain.contains(id) {
            m.chain_blocks += 1;
            *m.blocks_on_chain.entry(info.found_by).or_insert(0) += 1;
            chain_times.push(info.t);
        }
    }
    if m.total_blocks > 0 {
        m.stale_rate = 1.0 - m.chain_blocks as f64 / m.total_blocks as f64;
    }

    chain_times.sort_by(f64::total_cmp);
    if chain_times.len() >= 2 {
        let span = chain_times.last().unwrap() - chain_times.first().unwrap();
        m.mean_block_interval = Some(span / (chain_times.len() - 1) as f64);
    }

    let spy = trace.spy();
    // Injection order, so float accumulation below never depends on hash
    // iteration order.
    let mut arrivals: Vec<(crate::ledger::TxId, usize, f64)> = Vec::new();
    for ev in trace.events() {
        match ev {
            TraceEvent::BlockConnect {
                node,
                outcome: ConnectKind::Reorganized,
                depth: Some(depth),
                ..
            } if Some(*node) != spy => {
                *m.reorg_depths.entry(*depth).or_insert(0) += 1;
            }
            TraceEvent::TxArrival { tx, node, t, .. } => arrivals.push((*tx, *node, *t)),
            _ => {}
        }
    }

    for k in CONFIRMATION_DEPTHS {
        let mut sum = 0.0;
        let mut count = 0u64;
        for &(tx, node, t0) in &arrivals {
            if let Some(t) = trace.time_to_confirmations(&tx, node, k) {
                sum += t - t0;
                count += 1;
            }
        }
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        m.confirmation_wait.insert(k, WaitStat { mean, count });
    }

    m
}
