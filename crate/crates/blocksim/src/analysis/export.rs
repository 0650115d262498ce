//! Flat, self-contained dump of a node's best chain.
//!
//! The trace records block skeletons (ids and tx ids) but not transaction
//! contents, so post-hoc analysis needs a second artifact: one JSON line per
//! block, with every input resolved to the address and amount it spent.
//! Resolution happens here, while the full chain state is still in hand;
//! readers of the file never need a ledger.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::chain::{BlockId, ChainStore};
use crate::ledger::{Address, Amount, OutPoint, Transaction, TxId, TxOutput};

pub const CHAIN_SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ExportError {
    fn at(line: usize, message: impl Into<String>) -> ExportError {
        ExportError::Parse { line, message: message.into() }
    }
}

/// An input with the output it consumed spliced in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedInput {
    pub tx: TxId,
    pub index: u32,
    pub address: Address,
    pub amount: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportOutput {
    pub address: Address,
    pub amount: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportTx {
    pub id: TxId,
    pub coinbase: bool,
    pub inputs: Vec<ResolvedInput>,
    pub outputs: Vec<ExportOutput>,
}

/// One best-chain block; `txs[0]` is always the coinbase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportBlock {
    pub id: BlockId,
    pub parent: BlockId,
    pub height: u64,
    pub timestamp_ms: u64,
    pub txs: Vec<ExportTx>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChainHeader {
    schema: u32,
    kind: String,
    tip: BlockId,
    height: u64,
    blocks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainExport {
    pub tip: BlockId,
    pub height: u64,
    pub blocks: Vec<ExportBlock>,
}

impl ChainExport {
    /// Walks `store`'s best chain from genesis and resolves every input
    /// against the outputs created before it.
    pub fn from_store(store: &ChainStore) -> ChainExport {
        let mut live: std::collections::HashMap<OutPoint, TxOutput> =
            std::collections::HashMap::new();
        let mut resolve = |tx: &Transaction| -> ExportTx {
            let inputs = tx
                .inputs()
                .iter()
                .map(|inp| {
                    let spent = live
                        .remove(&inp.outpoint)
                        .expect("best chain spends only live outputs");
                    ResolvedInput {
                        tx: inp.outpoint.tx,
                        index: inp.outpoint.index,
                        address: spent.address,
                        amount: spent.amount,
                    }
                })
                .collect();
            let outputs = tx
                .outputs()
                .iter()
                .enumerate()
                .map(|(i, out)| {
                    live.insert(OutPoint { tx: tx.id(), index: i as u32 }, *out);
                    ExportOutput { address: out.address, amount: out.amount }
                })
                .collect();
            ExportTx { id: tx.id(), coinbase: tx.is_coinbase(), inputs, outputs }
        };

        let mut blocks = Vec::with_capacity(store.best_chain().len());
        for id in store.best_chain() {
            let block = store.block(id).expect("best chain blocks are stored");
            let mut txs = vec![resolve(block.coinbase())];
            txs.extend(block.txs().iter().map(|tx| resolve(tx)));
            blocks.push(ExportBlock {
                id: *id,
                parent: block.parent(),
                height: block.height(),
                timestamp_ms: block.timestamp_ms(),
                txs,
            });
        }
        ChainExport { tip: store.best_tip(), height: store.best_height(), blocks }
    }

    pub fn tx_count(&self) -> usize {
        self.blocks.iter().map(|b| b.txs.len()).sum()
    }

    /// Header line, then one line per block, genesis first.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header = ChainHeader {
            schema: CHAIN_SCHEMA,
            kind: "chain".to_string(),
            tip: self.tip,
            height: self.height,
            blocks: self.blocks.len() as u64,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for block in &self.blocks {
            serde_json::to_writer(&mut w, block)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<ChainExport, ExportError> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| ExportError::at(1, "empty file, expected chain header"))??;
        let header: ChainHeader = serde_json::from_str(&first)
            .map_err(|e| ExportError::at(1, format!("bad chain header: {e}")))?;
        if header.kind != "chain" {
            return Err(ExportError::at(1, format!("kind {:?}, expected \"chain\"", header.kind)));
        }
        if header.schema != CHAIN_SCHEMA {
            return Err(ExportError::at(
                1,
                format!("schema {} unsupported (expected {CHAIN_SCHEMA})", header.schema),
            ));
        }

        let mut blocks: Vec<ExportBlock> = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let block: ExportBlock = serde_json::from_str(&line)
                .map_err(|e| ExportError::at(lineno, e.to_string()))?;
            if let Some(prev) = blocks.last() {
                if block.parent != prev.id || block.height != prev.height + 1 {
                    return Err(ExportError::at(
                        lineno,
                        format!(
                            "block {} does not extend {} (height {} after {})",
                            block.id.short(),
                            prev.id.short(),
                            block.height,
                            prev.height
                        ),
                    ));
                }
            }
            blocks.push(block);
        }

        if blocks.len() as u64 != header.blocks {
            return Err(ExportError::at(
                1,
                format!("header promises {} blocks, found {}", header.blocks, blocks.len()),
            ));
        }
        match blocks.last() {
            Some(last) if last.id == header.tip && last.height == header.height => {}
            Some(last) => {
                return Err(ExportError::at(
                    1,
                    format!("tip {} does not match last block {}", header.tip.short(), last.id.short()),
                ))
            }
            None => return Err(ExportError::at(1, "chain export has no blocks")),
        }
        Ok(ChainExport { tip: header.tip, height: header.height, blocks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{mine_block, BlockTemplate, ChainParams, RetargetParams, RewardSchedule, Target};
    use crate::ledger::{pay, KeyPair, SigScheme, Transaction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn grow_chain() -> (ChainStore, KeyPair, KeyPair) {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let params = ChainParams {
            initial_target: Target::MAX,
            reward: RewardSchedule { initial: Amount::coins(50), halving_interval: u64::MAX },
            retarget: RetargetParams::OFF,
            max_block_txs: 8,
            orphan_limit: 16,
        };
        let mut store = ChainStore::new(params.clone());
        let miner = SigScheme::Ed25519.generate_keypair(&mut rng);
        let payee = SigScheme::Ed25519.generate_keypair(&mut rng);

        // Height 1 funds the miner; height 2 carries a transfer to `payee`.
        for height in 1..=2u64 {
            let parent = store.best_tip();
            let coinbase = Transaction::coinbase(
                height,
                vec![pay(miner.address(), params.reward.reward(height))],
            )
            .unwrap();
            let txs = if height == 2 {
                let fund = store.block(&store.best_tip()).unwrap().coinbase().id();
                let spend = Transaction::transfer_signed(
                    &[(OutPoint { tx: fund, index: 0 }, &miner)],
                    vec![
                        pay(payee.address(), Amount::coins(20)),
                        pay(miner.address(), Amount::coins(30)),
                    ],
                )
                .unwrap();
                vec![std::sync::Arc::new(spend)]
            } else {
                vec![]
            };
            let template = BlockTemplate {
                parent,
                height,
                target: Target::MAX,
                timestamp_ms: height * 1000,
                coinbase,
                txs,
            };
            let mined = mine_block(template, u64::MAX, &mut rng).unwrap();
            store.connect_block(mined.block).unwrap();
        }
        (store, miner, payee)
    }

    #[test]
    fn resolves_inputs_to_spent_outputs() {
        let (store, miner, payee) = grow_chain();
        let export = ChainExport::from_store(&store);
        assert_eq!(export.blocks.len(), 3);
        assert_eq!(export.height, 2);

        let spend = &export.blocks[2].txs[1];
        assert!(!spend.coinbase);
        assert_eq!(spend.inputs.len(), 1);
        assert_eq!(spend.inputs[0].address, miner.address());
        assert_eq!(spend.inputs[0].amount, Amount::coins(50));
        assert_eq!(spend.outputs[0].address, payee.address());
        assert_eq!(spend.outputs[0].amount, Amount::coins(20));
    }

    #[test]
    fn roundtrips_through_jsonl() {
        let (store, _, _) = grow_chain();
        let export = ChainExport::from_store(&store);
        let mut buf = Vec::new();
        export.write_jsonl(&mut buf).unwrap();
        let back = ChainExport::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, export);
    }

    #[test]
    fn truncated_line_is_rejected_with_its_number() {
        let (store, _, _) = grow_chain();
        let export = ChainExport::from_store(&store);
        let mut buf = Vec::new();
        export.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let cut = lines[2];
        let truncated = &cut[..cut.len() / 2];
        lines[2] = truncated;
        let mangled = lines.join("\n");

        let err = ChainExport::read_jsonl(mangled.as_bytes()).unwrap_err();
        match err {
            ExportError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn broken_linkage_is_rejected() {
        let (store, _, _) = grow_chain();
        let mut export = ChainExport::from_store(&store);
        export.blocks[2].parent = BlockId::ZERO;
        let mut buf = Vec::new();
        export.write_jsonl(&mut buf).unwrap();
        let err = ChainExport::read_jsonl(buf.as_slice()).unwrap_err();
        assert!(matches!(err, ExportError::Parse { line: 4, .. }), "got {err:?}");
    }
}
