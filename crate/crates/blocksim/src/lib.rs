//! Deterministic, desk-scale simulator of a proof-of-work UTXO currency
//! network: signed transactions against an unspent-output set, hash-linked
//! blocks with real (cheap) proof-of-work, a gossip network of mining nodes,
//! double-spend attack drivers, and chain-analysis tooling.
//!
//! The crate is a library first. Each major capability has a runnable
//! example under `examples/`:
//!
//! - `keys_and_transactions` -- key pairs, addresses, signing, validation
//! - `mine_a_chain` -- proof-of-work mining, rewards, halvings, retargeting
//! - `fork_resolution` -- competing branches, reorgs, returned transactions
//! - `gossip_network` -- a multi-node simulation with summary metrics
//! - `confirmation_latency` -- waiting times to k confirmations
//! - `double_spend` -- double-spend success rates over a (q, z) grid
//! - `majority_attack` -- branch overtake probabilities vs. attacker share
//! - `green_addresses` -- trust-based zero-confirmation acceptance
//! - `address_clustering` -- multi-input address clustering vs. ground truth
//! - `first_relayer` -- origin-node inference from relay timing
//!
//! A thin `blocksim` binary wraps the same entry points as `run`, `attack`,
//! `analyze` and `report` subcommands. All randomness flows from a single
//! seed; identical config and seed produce byte-identical outputs.

pub mod adversary;
pub mod analysis;
pub mod chain;
pub mod cli;
pub mod ledger;
pub mod netsim;
pub mod scenario;
