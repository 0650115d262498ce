//! Bipartite transaction graph: tx nodes and address nodes, with value
//! flowing tx -> address on outputs and address -> tx on spends.

use std::collections::{BTreeMap, BTreeSet};

use crate::ledger::{Address, Amount, TxId};

use super::export::ChainExport;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxNode {
    pub id: TxId,
    pub coinbase: bool,
    pub block_height: u64,
    /// (funding address, amount) per input, in input order.
    pub inputs: Vec<(Address, Amount)>,
    pub outputs: Vec<(Address, Amount)>,
}

impl TxNode {
    pub fn input_total(&self) -> Option<Amount> {
        self.inputs.iter().try_fold(Amount(0), |acc, (_, a)| acc.checked_add(*a))
    }

    pub fn output_total(&self) -> Option<Amount> {
        self.outputs.iter().try_fold(Amount(0), |acc, (_, a)| acc.checked_add(*a))
    }

    /// Distinct input addresses; the unit the clustering heuristic merges.
    pub fn input_address_set(&self) -> BTreeSet<Address> {
        self.inputs.iter().map(|(a, _)| *a).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct TxGraph {
    txs: BTreeMap<TxId, TxNode>,
    addresses: BTreeSet<Address>,
    /// tx -> address edges: value arriving at each address.
    receipts: BTreeMap<Address, Vec<(TxId, Amount)>>,
    /// address -> tx edges: value an address feeds into each spending tx.
    spends: BTreeMap<Address, Vec<(TxId, Amount)>>,
}

impl TxGraph {
    pub fn from_export(export: &ChainExport) -> TxGraph {
        let mut graph = TxGraph::default();
        for block in &export.blocks {
            for tx in &block.txs {
                let node = TxNode {
                    id: tx.id,
                    coinbase: tx.coinbase,
                    block_height: block.height,
                    inputs: tx.inputs.iter().map(|i| (i.address, i.amount)).collect(),
                    outputs: tx.outputs.iter().map(|o| (o.address, o.amount)).collect(),
                };
                for (addr, amount) in &node.inputs {
                    graph.addresses.insert(*addr);
                    graph.spends.entry(*addr).or_default().push((tx.id, *amount));
                }
                for (addr, amount) in &node.outputs {
                    graph.addresses.insert(*addr);
                    graph.receipts.entry(*addr).or_default().push((tx.id, *amount));
                }
                graph.txs.insert(tx.id, node);
            }
        }
        graph
    }

    pub fn tx(&self, id: &TxId) -> Option<&TxNode> {
        self.txs.get(id)
    }

    pub fn txs(&self) -> impl Iterator<Item = &TxNode> {
        self.txs.values()
    }

    pub fn tx_count(&self) -> usize {
        self.txs.len()
    }

    pub fn addresses(&self) -> &BTreeSet<Address> {
        &self.addresses
    }

    pub fn receipts(&self, addr: &Address) -> &[(TxId, Amount)] {
        self.receipts.get(addr).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn spends(&self, addr: &Address) -> &[(TxId, Amount)] {
        self.spends.get(addr).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Input address sets of every transaction that joins two or more
    /// distinct addresses, in chain order.
    pub fn multi_input_sets(&self) -> Vec<(TxId, BTreeSet<Address>)> {
        self.txs
            .values()
            .filter(|t| !t.coinbase)
            .map(|t| (t.id, t.input_address_set()))
            .filter(|(_, set)| set.len() >= 2)
            .collect()
    }

    /// Re-checks value conservation per transaction from the graph's own
    /// edges: transfers must not pay out more than they pull in. Returns
    /// the offenders, so a clean pass is an empty list.
    pub fn conservation_violations(&self) -> Vec<TxId> {
        self.txs
            .values()
            .filter(|t| !t.coinbase)
            .filter(|t| match (t.input_total(), t.output_total()) {
                (Some(inp), Some(out)) => out > inp,
                _ => true,
            })
            .map(|t| t.id)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::export::{ChainExport, ExportBlock, ExportOutput, ExportTx, ResolvedInput};
    use crate::chain::BlockId;
    use crate::ledger::sha256;

    fn addr(tag: u8) -> Address {
        Address(sha256(&[tag]))
    }

    fn txid(tag: u8) -> TxId {
        TxId(sha256(&[0xf0, tag]))
    }

    fn bid(tag: u8) -> BlockId {
        BlockId(sha256(&[0x0b, tag]))
    }

    fn coinbase_tx(tag: u8, to: Address, amount: Amount) -> ExportTx {
        ExportTx {
            id: txid(tag),
            coinbase: true,
            inputs: vec![],
            outputs: vec![ExportOutput { address: to, amount }],
        }
    }

    fn export_of(blocks: Vec<Vec<ExportTx>>) -> ChainExport {
        let mut out = Vec::new();
        let mut parent = BlockId::ZERO;
        for (h, txs) in blocks.into_iter().enumerate() {
            let id = bid(h as u8);
            out.push(ExportBlock {
                id,
                parent,
                height: h as u64,
                timestamp_ms: h as u64 * 1000,
                txs,
            });
            parent = id;
        }
        let (tip, height) = (out.last().unwrap().id, out.last().unwrap().height);
        ChainExport { tip, height, blocks: out }
    }

    #[test]
    fn coinbase_only_chain_has_no_spend_edges() {
        let export = export_of(vec![
            vec![coinbase_tx(0, addr(0), Amount::coins(50))],
            vec![coinbase_tx(1, addr(1), Amount::coins(50))],
            vec![coinbase_tx(2, addr(2), Amount::coins(50))],
        ]);
        let graph = TxGraph::from_export(&export);
        assert_eq!(graph.tx_count(), 3);
        assert_eq!(graph.addresses().len(), 3);
        assert!(graph.addresses().iter().all(|a| graph.spends(a).is_empty()));
        assert!(graph.multi_input_sets().is_empty());
        assert!(graph.conservation_violations().is_empty());
    }

    #[test]
    fn single_payment_produces_both_edge_kinds() {
        let (a, b, change) = (addr(10), addr(11), addr(12));
        let cb = coinbase_tx(0, a, Amount::coins(50));
        let spend = ExportTx {
            id: txid(1),
            coinbase: false,
            inputs: vec![ResolvedInput { tx: cb.id, index: 0, address: a, amount: Amount::coins(50) }],
            outputs: vec![
                ExportOutput { address: b, amount: Amount::coins(20) },
                ExportOutput { address: change, amount: Amount::coins(30) },
            ],
        };
        let export = export_of(vec![
            vec![cb.clone()],
            vec![coinbase_tx(2, addr(13), Amount::coins(50)), spend.clone()],
        ]);
        let graph = TxGraph::from_export(&export);

        assert_eq!(graph.receipts(&a), &[(cb.id, Amount::coins(50))]);
        assert_eq!(graph.spends(&a), &[(spend.id, Amount::coins(50))]);
        assert_eq!(graph.receipts(&b), &[(spend.id, Amount::coins(20))]);
        assert_eq!(graph.receipts(&change), &[(spend.id, Amount::coins(30))]);
        assert!(graph.conservation_violations().is_empty());
    }

    #[test]
    fn overpaying_transfer_is_flagged() {
        let a = addr(20);
        let cb = coinbase_tx(0, a, Amount::coins(10));
        let bad = ExportTx {
            id: txid(1),
            coinbase: false,
            inputs: vec![ResolvedInput { tx: cb.id, index: 0, address: a, amount: Amount::coins(10) }],
            outputs: vec![ExportOutput { address: addr(21), amount: Amount::coins(11) }],
        };
        let export = export_of(vec![vec![cb], vec![coinbase_tx(2, addr(22), Amount::coins(10)), bad.clone()]]);
        let graph = TxGraph::from_export(&export);
        assert_eq!(graph.conservation_violations(), vec![bad.id]);
    }
}
