//! Source inference from relay timing: a spy peered with every node guesses
//! that whoever delivered a transaction to it first also injected it.

use std::io::{self, Write};

use crate::ledger::TxId;
use crate::netsim::{EventTrace, TraceEvent};

#[derive(Debug, thiserror::Error)]
pub enum DeanonError {
    #[error("trace has no spy node; rerun with spy = true")]
    NoSpy,
    #[error("trace has no meta line")]
    NoMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeanonRow {
    pub tx: TxId,
    /// Node the wallet actually injected at.
    pub truth: usize,
    /// First node to deliver the tx to the spy, if any delivery happened.
    pub guess: Option<usize>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeanonReport {
    pub rows: Vec<DeanonRow>,
    /// Fraction guessed right; transactions the spy never heard count as
    /// wrong, so this is a lower bound on the attack's power.
    pub accuracy: f64,
    /// Uniform guessing over the honest nodes.
    pub baseline: f64,
    pub heard: usize,
}

impl DeanonReport {
    pub fn total(&self) -> usize {
        self.rows.len()
    }

    pub fn correct(&self) -> usize {
        self.rows.iter().filter(|r| r.correct).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "tx,truth,guess,correct")?;
        for row in &self.rows {
            let guess = row.guess.map(|g| g.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", row.tx.to_hex(), row.truth, guess, row.correct)?;
        }
        Ok(())
    }
}

/// Replays the trace from the spy's point of view and scores its guesses
/// against the recorded injection points.
pub fn first_relayer_attack(trace: &EventTrace) -> Result<DeanonReport, DeanonError> {
    if trace.meta().is_none() {
        return Err(DeanonError::NoMeta);
    }
    let spy = trace.spy().ok_or(DeanonError::NoSpy)?;

    // First delivery wins; events are already in time order.
    let mut first_from: std::collections::HashMap<TxId, usize> = std::collections::HashMap::new();
    let mut arrivals: Vec<(TxId, usize)> = Vec::new();
    for ev in trace.events() {
        match ev {
            TraceEvent::TxRecv { node, from, tx, .. } if *node == spy => {
                first_from.entry(*tx).or_insert(*from);
            }
            TraceEvent::TxArrival { tx, node, .. } => arrivals.push((*tx, *node)),
            _ => {}
        }
    }

    let rows: Vec<DeanonRow> = arrivals
        .into_iter()
        .map(|(tx, truth)| {
            let guess = first_from.get(&tx).copied();
            DeanonRow { tx, truth, guess, correct: guess == Some(truth) }
        })
        .collect();

    let heard = rows.iter().filter(|r| r.guess.is_some()).count();
    let correct = rows.iter().filter(|r| r.correct).count();
    let accuracy = if rows.is_empty() { 0.0 } else { correct as f64 / rows.len() as f64 };
    let baseline = 1.0 / trace.node_count().max(1) as f64;
    Ok(DeanonReport { rows, accuracy, baseline, heard })
}
