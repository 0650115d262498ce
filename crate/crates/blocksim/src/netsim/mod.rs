//! Network simulation: nodes, gossip, mining clocks, and the workload
//! that drives them, all replayable from a single seed.

mod config;
mod node;
mod sim;
mod trace;
mod workload;

pub use config::{
    ConfigError, LatencyModel, MinerSpec, SimConfig, Topology, ValueModel, WorkloadConfig,
};
pub use node::{Mempool, MempoolVerdict, Node, TxBacklog};
pub use sim::{run_simulation, SimOutput};
pub use trace::{
    BlockInfo, ConfStatus, ConnectKind, EventTrace, TraceError, TraceEvent, TxOrigin,
    TRACE_SCHEMA,
};
pub use workload::{Payment, SkipReason, UserWallet, Wallets};
