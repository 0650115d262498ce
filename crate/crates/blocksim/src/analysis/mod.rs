//! Post-hoc analysis of finished runs: chain exports, the transaction
//! graph, address clustering, relay-timing deanonymization and summary
//! metrics.

mod cluster;
mod deanon;
mod export;
mod graph;
mod metrics;

pub use cluster::{components_by_bfs, ClusterSet};
pub use deanon::{first_relayer_attack, DeanonError, DeanonReport, DeanonRow};
pub use export::{
    ChainExport, ExportBlock, ExportOutput, ExportTx, ExportError, ResolvedInput, CHAIN_SCHEMA,
};
pub use graph::{TxGraph, TxNode};
pub use metrics::{summarize, Metrics, WaitStat, CONFIRMATION_DEPTHS};
